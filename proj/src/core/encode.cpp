#include "soilref/core/encode.hpp"

#include <algorithm>
#include <cmath>

namespace soilref {

namespace {

void encode_into(const LabelMap& map, Tensor& out, int offset) {
  const int h = map.height();
  const int w = map.width();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::uint8_t c = map.at(y, x);
      if (c == kIgnore) {
        throw EncodingError("one_hot: IGNORE cell at (" + std::to_string(y) + ", " +
                                std::to_string(x) + ")",
                            y, x);
      }
      out.at(offset + c, y, x) = 1.0;
    }
  }
}

}  // namespace

Tensor one_hot(const LabelMap& map) {
  Tensor out = Tensor::chw(kNumClasses, map.height(), map.width());
  encode_into(map, out, 0);
  return out;
}

Tensor stack_encode(const PseudoLabelStack& pls) {
  Tensor out = Tensor::chw(kNumClasses * kNumPseudoLabels, pls.height(), pls.width());
  for (int q = 0; q < kNumPseudoLabels; ++q) {
    encode_into(pls[q], out, kNumClasses * q);
  }
  return out;
}

LabelMap argmax_block(const Tensor& t, int offset) {
  if (t.rank() != 3 || t.dim(0) < offset + kNumClasses) {
    throw ShapeError("argmax_block: tensor " + t.shape_string() + " has no block at " +
                     std::to_string(offset));
  }
  const int h = t.dim(1);
  const int w = t.dim(2);
  std::vector<std::uint8_t> codes(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int best = 0;
      double best_v = t.at(offset, y, x);
      for (int c = 1; c < kNumClasses; ++c) {
        const double v = t.at(offset + c, y, x);
        if (v > best_v) {
          best_v = v;
          best = c;
        }
      }
      codes[static_cast<std::size_t>(y) * w + x] = static_cast<std::uint8_t>(best);
    }
  }
  return LabelMap(w, h, std::move(codes));
}

Tensor image_tensor(const Image& img) {
  Tensor out = Tensor::chw(3, img.height(), img.width());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < 3; ++c) out.at(c, y, x) = img.at(y, x, c) - 0.5;
    }
  }
  return out;
}

ProbMap softmax_probs(const Tensor& logits) {
  if (logits.rank() != 3 || logits.dim(0) != kNumClasses) {
    throw ShapeError("softmax_probs: expected (4, H, W) logits, got " + logits.shape_string());
  }
  const int h = logits.dim(1);
  const int w = logits.dim(2);
  std::vector<double> probs(static_cast<std::size_t>(h) * w * kNumClasses);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double m = logits.at(0, y, x);
      for (int c = 1; c < kNumClasses; ++c) m = std::max(m, logits.at(c, y, x));
      double e[kNumClasses];
      double sum = 0.0;
      for (int c = 0; c < kNumClasses; ++c) {
        e[c] = std::exp(logits.at(c, y, x) - m);
        sum += e[c];
      }
      double* p = &probs[(static_cast<std::size_t>(y) * w + x) * kNumClasses];
      for (int c = 0; c < kNumClasses; ++c) p[c] = e[c] / sum;
    }
  }
  return ProbMap(w, h, std::move(probs));
}

}  // namespace soilref
