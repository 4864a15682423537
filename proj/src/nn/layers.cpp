#include "soilref/nn/layers.hpp"

#include <algorithm>
#include <cstring>

#include "soilref/core/types.hpp"

namespace soilref::nn {

namespace {

struct Range {
  int lo;
  int hi;  // exclusive
};

// Output indices o with 0 <= o*stride + tap - pad < in_extent.
Range valid_range(int out_extent, int in_extent, int tap, int pad, int stride) {
  const int off = tap - pad;
  int lo = 0;
  if (off < 0) lo = (-off + stride - 1) / stride;
  int hi = out_extent;
  // largest o with o*stride + off <= in_extent - 1
  const int lim = in_extent - 1 - off;
  if (lim < 0) return {0, 0};
  hi = std::min(hi, lim / stride + 1);
  return {lo, std::max(lo, hi)};
}

void check_conv(const Tensor& in, const Tensor& weight, const Tensor& bias) {
  if (in.rank() != 3 || weight.rank() != 4 || bias.rank() != 1) {
    throw ShapeError("conv2d: bad tensor ranks");
  }
  if (weight.dim(1) != in.dim(0)) {
    throw ShapeError("conv2d: weight expects " + std::to_string(weight.dim(1)) +
                     " input channels, got " + std::to_string(in.dim(0)));
  }
  if (weight.dim(2) != weight.dim(3) || weight.dim(2) % 2 == 0) {
    throw ShapeError("conv2d: kernel must be square and odd");
  }
  if (bias.dim(0) != weight.dim(0)) throw ShapeError("conv2d: bias size mismatch");
}

}  // namespace

Tensor conv2d_forward(const Tensor& in, const Tensor& weight, const Tensor& bias, int stride) {
  check_conv(in, weight, bias);
  const int C = in.dim(0), H = in.dim(1), W = in.dim(2);
  const int O = weight.dim(0), k = weight.dim(2), pad = k / 2;
  const int Ho = conv_out_extent(H, k, stride);
  const int Wo = conv_out_extent(W, k, stride);
  Tensor out = Tensor::chw(O, Ho, Wo);
  const double* __restrict src = in.data();
  const double* __restrict wt = weight.data();
  double* __restrict dst = out.data();
  const std::size_t plane = static_cast<std::size_t>(Ho) * Wo;

  for (int o = 0; o < O; ++o) {
    double* __restrict oplane = dst + o * plane;
    std::fill(oplane, oplane + plane, bias[o]);
    for (int c = 0; c < C; ++c) {
      const double* __restrict iplane = src + static_cast<std::size_t>(c) * H * W;
      for (int ky = 0; ky < k; ++ky) {
        const Range ry = valid_range(Ho, H, ky, pad, stride);
        for (int kx = 0; kx < k; ++kx) {
          const double wv = wt[((static_cast<std::size_t>(o) * C + c) * k + ky) * k + kx];
          const Range rx = valid_range(Wo, W, kx, pad, stride);
          const int xoff = kx - pad;
          for (int y = ry.lo; y < ry.hi; ++y) {
            const double* __restrict irow =
                iplane + static_cast<std::size_t>(y * stride + ky - pad) * W;
            double* __restrict orow = oplane + static_cast<std::size_t>(y) * Wo;
            if (stride == 1) {
              const double* __restrict ir = irow + xoff;
              for (int x = rx.lo; x < rx.hi; ++x) orow[x] += wv * ir[x];
            } else {
              for (int x = rx.lo; x < rx.hi; ++x) orow[x] += wv * irow[x * stride + xoff];
            }
          }
        }
      }
    }
  }
  return out;
}

void conv2d_backward(const Tensor& in, const Tensor& weight, int stride, const Tensor& d_out,
                     Tensor& d_weight, Tensor& d_bias, Tensor* d_in) {
  const int C = in.dim(0), H = in.dim(1), W = in.dim(2);
  const int O = weight.dim(0), k = weight.dim(2), pad = k / 2;
  const int Ho = d_out.dim(1), Wo = d_out.dim(2);
  if (d_out.dim(0) != O || Ho != conv_out_extent(H, k, stride) ||
      Wo != conv_out_extent(W, k, stride)) {
    throw ShapeError("conv2d_backward: upstream gradient " + d_out.shape_string() +
                     " does not match layer output");
  }
  if (!d_weight.same_shape(weight) || d_bias.size() != static_cast<std::size_t>(O)) {
    throw ShapeError("conv2d_backward: gradient buffers have wrong shape");
  }
  if (d_in) {
    if (!d_in->same_shape(in)) *d_in = Tensor(in.shape());
    else d_in->fill(0.0);
  }
  const double* __restrict src = in.data();
  const double* __restrict wt = weight.data();
  const double* __restrict g = d_out.data();
  double* __restrict dw = d_weight.data();
  double* __restrict gin = d_in ? d_in->data() : nullptr;
  const std::size_t plane = static_cast<std::size_t>(Ho) * Wo;
  std::vector<double> partial(Wo);

  for (int o = 0; o < O; ++o) {
    const double* __restrict gplane = g + o * plane;
    double bsum = 0.0;
    for (std::size_t i = 0; i < plane; ++i) bsum += gplane[i];
    d_bias[o] += bsum;
    for (int c = 0; c < C; ++c) {
      const std::size_t ioff = static_cast<std::size_t>(c) * H * W;
      for (int ky = 0; ky < k; ++ky) {
        const Range ry = valid_range(Ho, H, ky, pad, stride);
        for (int kx = 0; kx < k; ++kx) {
          const std::size_t widx = ((static_cast<std::size_t>(o) * C + c) * k + ky) * k + kx;
          const double wv = wt[widx];
          const Range rx = valid_range(Wo, W, kx, pad, stride);
          const int xoff = kx - pad;
          // Column-wise partial sums keep the inner loops free of a serial
          // dependency; the final reduction order is fixed.
          std::fill(partial.begin(), partial.end(), 0.0);
          double* __restrict ps = partial.data();
          for (int y = ry.lo; y < ry.hi; ++y) {
            const std::size_t irow = ioff + static_cast<std::size_t>(y * stride + ky - pad) * W;
            const double* __restrict grow = gplane + static_cast<std::size_t>(y) * Wo;
            if (stride == 1) {
              const double* __restrict ir = src + irow + xoff;
              for (int x = rx.lo; x < rx.hi; ++x) ps[x] += grow[x] * ir[x];
              if (gin) {
                double* __restrict gr = gin + irow + xoff;
                for (int x = rx.lo; x < rx.hi; ++x) gr[x] += wv * grow[x];
              }
            } else {
              const double* __restrict ir = src + irow;
              for (int x = rx.lo; x < rx.hi; ++x) ps[x] += grow[x] * ir[x * stride + xoff];
              if (gin) {
                double* __restrict gr = gin + irow;
                for (int x = rx.lo; x < rx.hi; ++x) gr[x * stride + xoff] += wv * grow[x];
              }
            }
          }
          double acc = 0.0;
          for (int x = rx.lo; x < rx.hi; ++x) acc += ps[x];
          dw[widx] += acc;
        }
      }
    }
  }
}

std::vector<std::uint8_t> onehot_indices(const Tensor& in, int block) {
  if (in.rank() != 3 || in.dim(0) % block != 0) return {};
  const int blocks = in.dim(0) / block;
  const std::size_t plane = static_cast<std::size_t>(in.dim(1)) * in.dim(2);
  std::vector<std::uint8_t> idx(blocks * plane);
  const double* v = in.data();
  for (int q = 0; q < blocks; ++q) {
    for (std::size_t p = 0; p < plane; ++p) {
      int hot = -1;
      for (int c = 0; c < block; ++c) {
        const double x = v[(static_cast<std::size_t>(q) * block + c) * plane + p];
        if (x == 1.0 && hot < 0) {
          hot = c;
        } else if (x != 0.0) {
          return {};
        }
      }
      if (hot < 0) return {};
      idx[q * plane + p] = static_cast<std::uint8_t>(hot);
    }
  }
  return idx;
}

Tensor conv2d_forward_onehot(const std::vector<std::uint8_t>& indices, int H, int W,
                             const Tensor& weight, const Tensor& bias, int stride, int block) {
  const int O = weight.dim(0), C = weight.dim(1), k = weight.dim(2), pad = k / 2;
  const int blocks = C / block;
  if (C % block != 0 || indices.size() != static_cast<std::size_t>(blocks) * H * W) {
    throw ShapeError("conv2d_forward_onehot: index planes do not match weight");
  }
  const int Ho = conv_out_extent(H, k, stride);
  const int Wo = conv_out_extent(W, k, stride);
  Tensor out = Tensor::chw(O, Ho, Wo);
  const std::size_t plane = static_cast<std::size_t>(Ho) * Wo;
  const std::size_t iplane = static_cast<std::size_t>(H) * W;
  double lut[256];
  for (int o = 0; o < O; ++o) {
    double* __restrict oplane = out.data() + o * plane;
    std::fill(oplane, oplane + plane, bias[o]);
    for (int q = 0; q < blocks; ++q) {
      const std::uint8_t* __restrict cls = indices.data() + q * iplane;
      for (int ky = 0; ky < k; ++ky) {
        const Range ry = valid_range(Ho, H, ky, pad, stride);
        for (int kx = 0; kx < k; ++kx) {
          for (int c = 0; c < block; ++c) {
            lut[c] = weight[((static_cast<std::size_t>(o) * C + q * block + c) * k + ky) * k + kx];
          }
          const Range rx = valid_range(Wo, W, kx, pad, stride);
          const int xoff = kx - pad;
          for (int y = ry.lo; y < ry.hi; ++y) {
            const std::uint8_t* __restrict crow =
                cls + static_cast<std::size_t>(y * stride + ky - pad) * W;
            double* __restrict orow = oplane + static_cast<std::size_t>(y) * Wo;
            for (int x = rx.lo; x < rx.hi; ++x) orow[x] += lut[crow[x * stride + xoff]];
          }
        }
      }
    }
  }
  return out;
}

void relu_inplace(Tensor& t) {
  for (double& v : t.values()) v = v > 0.0 ? v : 0.0;
}

void relu_backward_inplace(const Tensor& activated, Tensor& d_out) {
  const double* a = activated.data();
  double* g = d_out.data();
  for (std::size_t i = 0; i < d_out.size(); ++i) {
    if (!(a[i] > 0.0)) g[i] = 0.0;
  }
}

Tensor upsample2x(const Tensor& in) {
  const int C = in.dim(0), H = in.dim(1), W = in.dim(2);
  Tensor out = Tensor::chw(C, 2 * H, 2 * W);
  for (int c = 0; c < C; ++c) {
    for (int y = 0; y < 2 * H; ++y) {
      for (int x = 0; x < 2 * W; ++x) out.at(c, y, x) = in.at(c, y / 2, x / 2);
    }
  }
  return out;
}

Tensor upsample2x_backward(const Tensor& d_out) {
  const int C = d_out.dim(0), H = d_out.dim(1) / 2, W = d_out.dim(2) / 2;
  Tensor d_in = Tensor::chw(C, H, W);
  for (int c = 0; c < C; ++c) {
    for (int y = 0; y < 2 * H; ++y) {
      for (int x = 0; x < 2 * W; ++x) d_in.at(c, y / 2, x / 2) += d_out.at(c, y, x);
    }
  }
  return d_in;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2)) {
    throw ShapeError("concat: spatial mismatch " + a.shape_string() + " vs " + b.shape_string());
  }
  Tensor out = Tensor::chw(a.dim(0) + b.dim(0), a.dim(1), a.dim(2));
  std::copy(a.values().begin(), a.values().end(), out.values().begin());
  std::copy(b.values().begin(), b.values().end(), out.values().begin() + a.size());
  return out;
}

std::pair<Tensor, Tensor> split_channels(const Tensor& t, int first_channels) {
  const int h = t.dim(1), w = t.dim(2);
  Tensor a = Tensor::chw(first_channels, h, w);
  Tensor b = Tensor::chw(t.dim(0) - first_channels, h, w);
  std::copy(t.values().begin(), t.values().begin() + a.size(), a.values().begin());
  std::copy(t.values().begin() + a.size(), t.values().end(), b.values().begin());
  return {std::move(a), std::move(b)};
}

}  // namespace soilref::nn
