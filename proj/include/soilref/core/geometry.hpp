#pragma once

#include <vector>

#include "soilref/core/types.hpp"

namespace soilref {

struct Window {
  int row = 0;
  int col = 0;
  int height = 0;
  int width = 0;
};

Image crop(const Image& img, const Window& w);
LabelMap crop(const LabelMap& map, const Window& w);

Image flip_h(const Image& img);
LabelMap flip_h(const LabelMap& map);
Image flip_v(const Image& img);
LabelMap flip_v(const LabelMap& map);

/// Counter-clockwise quarter turns; k is reduced modulo 4.
Image rot90(const Image& img, int k);
LabelMap rot90(const LabelMap& map, int k);

/// An image with any number of pixel-aligned label maps. Every transform
/// applies the identical geometry to all parts.
struct AlignedParts {
  Image image;
  std::vector<LabelMap> maps;

  void validate() const;
};

AlignedParts crop(const AlignedParts& parts, const Window& w);
AlignedParts flip_h(const AlignedParts& parts);
AlignedParts flip_v(const AlignedParts& parts);
AlignedParts rot90(const AlignedParts& parts, int k);

}  // namespace soilref
