#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "soilref/core/tensor.hpp"
#include "soilref/core/types.hpp"

namespace soilref::nn {

/// Channel widths of the dual-encoder / single-decoder network.
///
///   image  -> conv3x3(3->h)+ReLU -> conv3x3/2(h->e)+ReLU --+
///                                                           concat -> conv3x3(->d)+ReLU
///   S(PL)  -> conv3x3(36->h)+ReLU -> conv3x3/2(h->e)+ReLU -+         -> up x2
///                                                                    -> conv3x3(d->u)+ReLU
///                                                                    -> conv1x1(u->4)
///
/// Setting `pl_channels` to 0 drops the pseudo-label encoder and gives a
/// plain image-only segmentation model with the same decoder.
struct ArchConfig {
  int image_channels = 3;
  int pl_channels = kNumClasses * kNumPseudoLabels;
  int enc_hidden = 8;
  int enc_out = 16;
  int dec_hidden = 16;
  int dec_up = 8;
  int classes = kNumClasses;

  bool has_pl_encoder() const { return pl_channels > 0; }
  bool operator==(const ArchConfig&) const = default;
};

struct LayerSpec {
  std::string name;
  int in = 0;
  int out = 0;
  int kernel = 3;
  int stride = 1;
  bool relu = true;

  bool operator==(const LayerSpec&) const = default;
};

/// Layer list implied by an architecture, in parameter order.
std::vector<LayerSpec> describe(const ArchConfig& arch);

struct ConvLayer {
  LayerSpec spec;
  Tensor weight;  // (out, in, k, k)
  Tensor bias;    // (out)
};

class NetParams {
 public:
  NetParams() = default;
  NetParams(ArchConfig arch, std::vector<ConvLayer> layers, std::uint64_t seed);

  /// He-normal kernels from the seeded generator, zero biases. The final 1x1
  /// classifier is zero when `zero_final` so initial logits are exactly 0.
  static NetParams init(const ArchConfig& arch, std::uint64_t seed, bool zero_final = true);

  const ArchConfig& arch() const { return arch_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<ConvLayer>& layers() const { return layers_; }
  std::vector<ConvLayer>& mutable_layers() {
    ++version_;
    return layers_;
  }
  const ConvLayer& layer(const std::string& name) const;
  std::size_t parameter_count() const;

  /// Bumped on every mutation; forward caches record it.
  std::uint64_t version() const { return version_; }
  void touch() { ++version_; }

  /// Parameter equality (ignores the version counter).
  bool operator==(const NetParams& o) const;

 private:
  ArchConfig arch_;
  std::vector<ConvLayer> layers_;
  std::uint64_t seed_ = 0;
  std::uint64_t version_ = 0;
};

/// Parameter-shaped gradient buffers; `weights[i]` / `biases[i]` match layer i.
struct Gradients {
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;

  static Gradients zeros_like(const NetParams& params);
  Gradients& operator+=(const Gradients& o);
  void scale(double s);
  bool all_finite() const;
  double max_abs() const;
};

/// Activations retained by forward for the backward pass.
struct ForwardCache {
  const NetParams* params = nullptr;
  std::uint64_t version = 0;
  Tensor image;
  Tensor pl;
  Tensor img1, img2, pl1, pl2;
  Tensor concat;
  Tensor dec1, up, dec2;
};

struct ForwardResult {
  Tensor logits;  // (4, H, W)
  ForwardCache cache;
};

/// image: (3, H, W); pl: (36, H, W) or empty when the architecture has no
/// pseudo-label encoder. H and W must be divisible by 4.
ForwardResult forward(const NetParams& params, const Tensor& image, const Tensor& pl);
/// Inference-only forward that keeps no cache.
Tensor predict_logits(const NetParams& params, const Tensor& image, const Tensor& pl);

/// Exact reverse-mode gradients; throws if the cache is stale or foreign.
Gradients backward(const NetParams& params, const ForwardCache& cache, const Tensor& d_logits);

struct LossResult {
  double loss = 0.0;
  Tensor d_logits;
  std::size_t counted = 0;
};

/// Mean per-pixel cross-entropy over non-IGNORE target pixels, with
/// max-subtracted log-softmax. Optional per-class weights turn the mean into
/// a weighted mean. Throws when every target pixel is IGNORE.
LossResult softmax_ce(const Tensor& logits, const LabelMap& target,
                      const std::optional<std::array<double, kNumClasses>>& class_weights = {});

/// SGD with heavy-ball momentum: v = mu * v + g; p -= lr * v.
class SgdOptimizer {
 public:
  SgdOptimizer(double lr, double momentum);

  void step(NetParams& params, const Gradients& grads);
  double lr() const { return lr_; }
  void set_lr(double lr);
  double momentum() const { return momentum_; }

 private:
  double lr_;
  double momentum_;
  std::optional<Gradients> velocity_;
};

}  // namespace soilref::nn
