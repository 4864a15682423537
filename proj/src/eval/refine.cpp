#include "soilref/eval/refine.hpp"

#include <fmt/format.h>

#include <algorithm>

#include "soilref/core/encode.hpp"
#include "soilref/core/geometry.hpp"

namespace soilref::eval {

LabelMap refine(const nn::NetParams& params, const Image& image, const PseudoLabelStack& pls,
                int tile_height, int tile_width) {
  const int h = image.height(), w = image.width();
  if (h % 4 != 0 || w % 4 != 0 || h == 0 || w == 0) {
    throw ShapeError(fmt::format("refine: image {}x{} is not divisible by 4", h, w));
  }
  if (tile_height <= 0 || tile_width <= 0 || tile_height % 4 != 0 || tile_width % 4 != 0) {
    throw ShapeError(fmt::format("refine: tile {}x{} is not a positive multiple of 4", tile_height,
                                 tile_width));
  }
  const bool with_pl = params.arch().has_pl_encoder();
  if (with_pl && (pls.width() != w || pls.height() != h)) {
    throw ShapeError("refine: pseudo-label stack does not match the image");
  }
  LabelMap out(w, h, 0);
  for (int y0 = 0; y0 < h; y0 += tile_height) {
    for (int x0 = 0; x0 < w; x0 += tile_width) {
      const Window win{y0, x0, std::min(tile_height, h - y0), std::min(tile_width, w - x0)};
      Tensor pl;
      if (with_pl) {
        PseudoLabelStack::Maps maps;
        for (int q = 0; q < kNumPseudoLabels; ++q) maps[q] = crop(pls[q], win);
        pl = stack_encode(PseudoLabelStack(std::move(maps), pls.provenance()));
      }
      const Tensor logits = nn::predict_logits(params, image_tensor(crop(image, win)), pl);
      const LabelMap tile = argmax_block(logits);
      for (int y = 0; y < win.height; ++y)
        for (int x = 0; x < win.width; ++x) out.set(y0 + y, x0 + x, tile.at(y, x));
    }
  }
  return out;
}

}  // namespace soilref::eval
