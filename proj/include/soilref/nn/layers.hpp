#pragma once

#include <cstdint>
#include <vector>

#include "soilref/core/tensor.hpp"

namespace soilref::nn {

/// Output extent of a zero-padded "same" convolution with odd kernel size.
constexpr int conv_out_extent(int in, int kernel, int stride) {
  const int pad = kernel / 2;
  return (in + 2 * pad - kernel) / stride + 1;
}

/// in (C, H, W), weight (O, C, k, k), bias (O) -> (O, Ho, Wo).
Tensor conv2d_forward(const Tensor& in, const Tensor& weight, const Tensor& bias, int stride);

/// Accumulates parameter gradients into d_weight / d_bias. When d_in is not
/// null it receives (overwrites) the gradient with respect to `in`.
void conv2d_backward(const Tensor& in, const Tensor& weight, int stride, const Tensor& d_out,
                     Tensor& d_weight, Tensor& d_bias, Tensor* d_in);

/// Class index per (block, y, x) when every `block`-channel group of `in` is
/// exactly one-hot; empty otherwise.
std::vector<std::uint8_t> onehot_indices(const Tensor& in, int block);

/// Same result as conv2d_forward on the one-hot tensor described by `indices`
/// (from onehot_indices), computed by weight lookup instead of dense products.
Tensor conv2d_forward_onehot(const std::vector<std::uint8_t>& indices, int height, int width,
                             const Tensor& weight, const Tensor& bias, int stride, int block);
void relu_inplace(Tensor& t);
/// Zeroes d_out where the forward activation was clipped.
void relu_backward_inplace(const Tensor& activated, Tensor& d_out);

Tensor upsample2x(const Tensor& in);
Tensor upsample2x_backward(const Tensor& d_out);

/// Concatenates two (C_i, H, W) tensors along the channel axis.
Tensor concat_channels(const Tensor& a, const Tensor& b);
/// Splits a channel-concatenated gradient back into its two halves.
std::pair<Tensor, Tensor> split_channels(const Tensor& t, int first_channels);

}  // namespace soilref::nn
