#pragma once

#include "soilref/core/types.hpp"
#include "soilref/nn/network.hpp"

namespace soilref::eval {

/// Per-pixel argmax (ties to the lowest class) of the network output over
/// non-overlapping tiles of at most tile_height x tile_width. Works for both
/// ensemble networks (image + stack) and image-only models (stack ignored).
/// Throws ShapeError unless the image sides and tile sides are multiples of 4.
LabelMap refine(const nn::NetParams& params, const Image& image, const PseudoLabelStack& pls,
                int tile_height, int tile_width);

inline LabelMap refine(const nn::NetParams& params, const Sample& s, int tile_height, int tile_width) {
  return refine(params, s.image, s.pls, tile_height, tile_width);
}

}  // namespace soilref::eval
