#pragma once

#include "soilref/core/tensor.hpp"
#include "soilref/core/types.hpp"

namespace soilref {

/// (4, H, W) binary tensor; throws EncodingError on the first IGNORE cell.
Tensor one_hot(const LabelMap& map);

/// Channel-wise concatenation of the nine one-hot maps: (36, H, W).
/// Block [4q, 4q+4) holds pseudo-label q (zero-based).
Tensor stack_encode(const PseudoLabelStack& pls);

/// Per-pixel argmax over a (4, H, W) block starting at channel `offset`;
/// ties resolve to the lowest class code.
LabelMap argmax_block(const Tensor& t, int offset = 0);

/// Image as a (3, H, W) tensor with channels shifted to [-0.5, 0.5].
Tensor image_tensor(const Image& img);

/// Row-wise softmax of (4, H, W) logits into a probability map.
ProbMap softmax_probs(const Tensor& logits);

}  // namespace soilref
