#include "soilref/core/geometry.hpp"

#include <string>

namespace soilref {

namespace {

// Builds an out_w x out_h raster whose pixel (y, x) is read from the source
// pixel returned by `src(y, x)`.
template <typename Src>
Image remap(const Image& img, int out_w, int out_h, Src src) {
  std::vector<double> rgb(static_cast<std::size_t>(out_w) * out_h * 3);
  auto it = rgb.begin();
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      const auto [sy, sx] = src(y, x);
      for (int c = 0; c < 3; ++c) *it++ = img.at(sy, sx, c);
    }
  }
  return Image(out_w, out_h, std::move(rgb));
}

template <typename Src>
LabelMap remap(const LabelMap& map, int out_w, int out_h, Src src) {
  std::vector<std::uint8_t> codes(static_cast<std::size_t>(out_w) * out_h);
  auto it = codes.begin();
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      const auto [sy, sx] = src(y, x);
      *it++ = map.at(sy, sx);
    }
  }
  return LabelMap(out_w, out_h, std::move(codes));
}

void check_window(int width, int height, const Window& w) {
  if (w.height <= 0 || w.width <= 0 || w.row < 0 || w.col < 0 ||
      w.row + w.height > height || w.col + w.width > width) {
    throw ShapeError("crop window (" + std::to_string(w.row) + "," + std::to_string(w.col) +
                     ") size " + std::to_string(w.height) + "x" + std::to_string(w.width) +
                     " outside " + std::to_string(height) + "x" + std::to_string(width) +
                     " raster");
  }
  if (w.height % 4 != 0 || w.width % 4 != 0) {
    throw ShapeError("crop window size must be divisible by 4");
  }
}

template <typename R>
R crop_impl(const R& r, const Window& w) {
  check_window(r.width(), r.height(), w);
  return remap(r, w.width, w.height, [&](int y, int x) {
    return std::pair{w.row + y, w.col + x};
  });
}

template <typename R>
R flip_h_impl(const R& r) {
  const int w = r.width();
  return remap(r, w, r.height(), [w](int y, int x) { return std::pair{y, w - 1 - x}; });
}

template <typename R>
R flip_v_impl(const R& r) {
  const int h = r.height();
  return remap(r, r.width(), h, [h](int y, int x) { return std::pair{h - 1 - y, x}; });
}

template <typename R>
R rot90_impl(const R& r, int k) {
  const int w = r.width();
  const int h = r.height();
  switch (((k % 4) + 4) % 4) {
    case 1:
      return remap(r, h, w, [w](int y, int x) { return std::pair{x, w - 1 - y}; });
    case 2:
      return remap(r, w, h, [w, h](int y, int x) { return std::pair{h - 1 - y, w - 1 - x}; });
    case 3:
      return remap(r, h, w, [h](int y, int x) { return std::pair{h - 1 - x, y}; });
    default:
      return r;
  }
}

template <typename F>
AlignedParts apply(const AlignedParts& parts, F f) {
  parts.validate();
  AlignedParts out;
  out.image = f(parts.image);
  out.maps.reserve(parts.maps.size());
  for (const auto& m : parts.maps) out.maps.push_back(f(m));
  return out;
}

}  // namespace

Image crop(const Image& img, const Window& w) { return crop_impl(img, w); }
LabelMap crop(const LabelMap& map, const Window& w) { return crop_impl(map, w); }
Image flip_h(const Image& img) { return flip_h_impl(img); }
LabelMap flip_h(const LabelMap& map) { return flip_h_impl(map); }
Image flip_v(const Image& img) { return flip_v_impl(img); }
LabelMap flip_v(const LabelMap& map) { return flip_v_impl(map); }
Image rot90(const Image& img, int k) { return rot90_impl(img, k); }
LabelMap rot90(const LabelMap& map, int k) { return rot90_impl(map, k); }

void AlignedParts::validate() const {
  for (std::size_t i = 0; i < maps.size(); ++i) {
    if (!maps[i].same_shape(image)) {
      throw ShapeError("aligned parts: label map " + std::to_string(i) +
                       " does not match image dimensions");
    }
  }
}

AlignedParts crop(const AlignedParts& parts, const Window& w) {
  return apply(parts, [&](const auto& r) { return crop(r, w); });
}
AlignedParts flip_h(const AlignedParts& parts) {
  return apply(parts, [](const auto& r) { return flip_h(r); });
}
AlignedParts flip_v(const AlignedParts& parts) {
  return apply(parts, [](const auto& r) { return flip_v(r); });
}
AlignedParts rot90(const AlignedParts& parts, int k) {
  return apply(parts, [k](const auto& r) { return rot90(r, k); });
}

}  // namespace soilref
