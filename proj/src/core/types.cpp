#include "soilref/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace soilref {

namespace {

void check_dims(int width, int height, const char* what) {
  if (width <= 0 || height <= 0) {
    throw ShapeError(std::string(what) + ": dimensions must be positive, got " +
                     std::to_string(width) + "x" + std::to_string(height));
  }
}

}  // namespace

std::uint8_t checked_code(int code) {
  if ((code >= 0 && code < kNumClasses) || code == kIgnore) {
    return static_cast<std::uint8_t>(code);
  }
  throw ShapeError("invalid soiling class code " + std::to_string(code));
}

SoilingClass to_class(int code) {
  if (code < 0 || code >= kNumClasses) {
    throw ShapeError("not a soiling class: " + std::to_string(code));
  }
  return static_cast<SoilingClass>(code);
}

const char* class_name(int code) {
  switch (code) {
    case 0: return "clean";
    case 1: return "transparent";
    case 2: return "semi_transparent";
    case 3: return "opaque";
    case kIgnore: return "ignore";
    default: return "invalid";
  }
}

Image::Image(int width, int height)
    : width_(width), height_(height) {
  check_dims(width, height, "Image");
  data_.assign(static_cast<std::size_t>(width) * height * 3, 0.0);
}

Image::Image(int width, int height, std::vector<double> rgb)
    : width_(width), height_(height), data_(std::move(rgb)) {
  check_dims(width, height, "Image");
  if (data_.size() != static_cast<std::size_t>(width) * height * 3) {
    throw ShapeError("Image: expected " + std::to_string(width * height * 3) +
                     " values, got " + std::to_string(data_.size()));
  }
  validate();
}

void Image::validate() const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    const double v = data_[i];
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw ShapeError("Image: channel value out of [0,1] at index " + std::to_string(i));
    }
  }
}

LabelMap::LabelMap(int width, int height, std::uint8_t fill)
    : width_(width), height_(height) {
  check_dims(width, height, "LabelMap");
  data_.assign(static_cast<std::size_t>(width) * height, checked_code(fill));
}

LabelMap::LabelMap(int width, int height, std::vector<std::uint8_t> codes)
    : width_(width), height_(height), data_(std::move(codes)) {
  check_dims(width, height, "LabelMap");
  if (data_.size() != static_cast<std::size_t>(width) * height) {
    throw ShapeError("LabelMap: expected " + std::to_string(width * height) +
                     " cells, got " + std::to_string(data_.size()));
  }
  for (auto c : data_) checked_code(c);
}

void LabelMap::set(int row, int col, std::uint8_t code) {
  data_[static_cast<std::size_t>(row) * width_ + col] = checked_code(code);
}

bool LabelMap::has_ignore() const {
  return std::find(data_.begin(), data_.end(), kIgnore) != data_.end();
}

PseudoLabelStack::PseudoLabelStack(Maps maps, Provenance provenance)
    : maps_(std::move(maps)), provenance_(std::move(provenance)) {
  for (int q = 0; q < kNumPseudoLabels; ++q) {
    if (maps_[q].empty() || !maps_[q].same_shape(maps_[0])) {
      throw ShapeError("PseudoLabelStack: map " + std::to_string(q + 1) +
                       " has mismatched dimensions");
    }
    if (maps_[q].has_ignore()) {
      throw ShapeError("PseudoLabelStack: map " + std::to_string(q + 1) +
                       " contains IGNORE cells");
    }
  }
}

ProbMap::ProbMap(int width, int height, std::vector<double> probs)
    : width_(width), height_(height), data_(std::move(probs)) {
  check_dims(width, height, "ProbMap");
  if (data_.size() != static_cast<std::size_t>(width) * height * kNumClasses) {
    throw ShapeError("ProbMap: wrong value count");
  }
  for (std::size_t p = 0; p < data_.size(); p += kNumClasses) {
    double sum = 0.0;
    for (int c = 0; c < kNumClasses; ++c) {
      const double v = data_[p + c];
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ShapeError("ProbMap: probability outside [0,1] at pixel " +
                         std::to_string(p / kNumClasses));
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw ShapeError("ProbMap: probabilities do not sum to 1 at pixel " +
                       std::to_string(p / kNumClasses));
    }
  }
}

void Sample::validate() const {
  const int w = image.width();
  const int h = image.height();
  if (w < 16 || h < 16 || w % 4 != 0 || h % 4 != 0) {
    throw ShapeError(fmt::format("sample {}: image {}x{} must be at least 16x16 "
                                 "with sides divisible by 4", id, w, h));
  }
  if (truth && !truth->same_shape(image)) {
    throw ShapeError("sample " + id + ": truth dimensions differ from image");
  }
  if (pls.width() != w || pls.height() != h) {
    throw ShapeError("sample " + id + ": pseudo-label dimensions differ from image");
  }
}

}  // namespace soilref
