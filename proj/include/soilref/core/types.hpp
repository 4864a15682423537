#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace soilref {

/// Per-pixel soiling categories. Codes are stored as raw bytes in label maps.
enum class SoilingClass : std::uint8_t {
  kClean = 0,
  kTransparent = 1,
  kSemiTransparent = 2,
  kOpaque = 3,
};

inline constexpr int kNumClasses = 4;
inline constexpr int kNumPseudoLabels = 9;
inline constexpr std::uint8_t kIgnore = 255;

/// Raised for any malformed raster, shape mismatch or invalid code.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a label map cannot be one-hot encoded.
class EncodingError : public std::invalid_argument {
 public:
  EncodingError(const std::string& what, int row, int col)
      : std::invalid_argument(what), row_(row), col_(col) {}
  int row() const { return row_; }
  int col() const { return col_; }

 private:
  int row_;
  int col_;
};

/// Validates a raw code (0..3 or 255) and returns it as a byte.
std::uint8_t checked_code(int code);
SoilingClass to_class(int code);
const char* class_name(int code);

/// H x W x 3 color raster with unit-range channels, interleaved per pixel.
class Image {
 public:
  Image() = default;
  Image(int width, int height);
  Image(int width, int height, std::vector<double> rgb);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }

  double at(int row, int col, int channel) const {
    return data_[(static_cast<std::size_t>(row) * width_ + col) * 3 + channel];
  }
  void set(int row, int col, int channel, double v) {
    data_[(static_cast<std::size_t>(row) * width_ + col) * 3 + channel] = v;
  }
  std::span<const double> data() const { return data_; }
  std::span<double> mutable_data() { return data_; }

  /// Throws ShapeError if any channel lies outside [0,1] or is not finite.
  void validate() const;

  bool operator==(const Image&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// H x W class codes; each cell is 0..3 or kIgnore.
class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(int width, int height, std::uint8_t fill = 0);
  LabelMap(int width, int height, std::vector<std::uint8_t> codes);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  std::size_t size() const { return data_.size(); }

  std::uint8_t at(int row, int col) const {
    return data_[static_cast<std::size_t>(row) * width_ + col];
  }
  void set(int row, int col, std::uint8_t code);
  std::span<const std::uint8_t> data() const { return data_; }

  bool has_ignore() const;
  bool same_shape(const LabelMap& o) const {
    return width_ == o.width_ && height_ == o.height_;
  }
  bool same_shape(const Image& img) const {
    return width_ == img.width() && height_ == img.height();
  }

  bool operator==(const LabelMap&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Nine candidate annotations for one image. Index 0 is the manual one.
class PseudoLabelStack {
 public:
  using Maps = std::array<LabelMap, kNumPseudoLabels>;
  using Provenance = std::array<std::string, kNumPseudoLabels>;

  PseudoLabelStack() = default;
  PseudoLabelStack(Maps maps, Provenance provenance);

  const LabelMap& operator[](std::size_t q) const { return maps_[q]; }
  const Maps& maps() const { return maps_; }
  const Provenance& provenance() const { return provenance_; }
  int width() const { return maps_[0].width(); }
  int height() const { return maps_[0].height(); }

  bool operator==(const PseudoLabelStack&) const = default;

 private:
  Maps maps_;
  Provenance provenance_;
};

/// Per-pixel class distribution, stored pixel-major (4 values per pixel).
class ProbMap {
 public:
  ProbMap() = default;
  ProbMap(int width, int height, std::vector<double> probs);

  int width() const { return width_; }
  int height() const { return height_; }
  double at(int row, int col, int cls) const {
    return data_[(static_cast<std::size_t>(row) * width_ + col) * kNumClasses + cls];
  }
  std::span<const double> data() const { return data_; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

struct Sample {
  std::string id;
  Image image;
  std::optional<LabelMap> truth;
  PseudoLabelStack pls;

  /// Dataset-level checks: matching dims, both at least 16 and divisible by 4.
  void validate() const;
};

}  // namespace soilref
