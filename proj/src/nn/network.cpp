#include "soilref/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "soilref/core/rng.hpp"
#include "soilref/nn/layers.hpp"

namespace soilref::nn {

std::vector<LayerSpec> describe(const ArchConfig& a) {
  if (a.image_channels <= 0 || a.enc_hidden <= 0 || a.enc_out <= 0 || a.dec_hidden <= 0 ||
      a.dec_up <= 0 || a.classes <= 0 || a.pl_channels < 0) {
    throw ShapeError("architecture: channel counts must be positive");
  }
  std::vector<LayerSpec> s;
  s.push_back({"img_conv1", a.image_channels, a.enc_hidden, 3, 1, true});
  s.push_back({"img_conv2", a.enc_hidden, a.enc_out, 3, 2, true});
  if (a.has_pl_encoder()) {
    s.push_back({"pl_conv1", a.pl_channels, a.enc_hidden, 3, 1, true});
    s.push_back({"pl_conv2", a.enc_hidden, a.enc_out, 3, 2, true});
  }
  const int fused = a.has_pl_encoder() ? 2 * a.enc_out : a.enc_out;
  s.push_back({"dec_conv1", fused, a.dec_hidden, 3, 1, true});
  s.push_back({"dec_conv2", a.dec_hidden, a.dec_up, 3, 1, true});
  s.push_back({"dec_out", a.dec_up, a.classes, 1, 1, false});
  return s;
}

NetParams::NetParams(ArchConfig arch, std::vector<ConvLayer> layers, std::uint64_t seed)
    : arch_(arch), layers_(std::move(layers)), seed_(seed) {
  const auto specs = describe(arch_);
  if (specs.size() != layers_.size()) {
    throw ShapeError("NetParams: expected " + std::to_string(specs.size()) + " layers, got " +
                     std::to_string(layers_.size()));
  }
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& l = layers_[i];
    const auto& s = specs[i];
    if (!(l.spec == s)) throw ShapeError("NetParams: layer " + s.name + " descriptor mismatch");
    if (l.weight.shape() != std::vector<int>{s.out, s.in, s.kernel, s.kernel} ||
        l.bias.shape() != std::vector<int>{s.out}) {
      throw ShapeError("NetParams: layer " + s.name + " tensor shapes do not match descriptor");
    }
  }
}

NetParams NetParams::init(const ArchConfig& arch, std::uint64_t seed, bool zero_final) {
  Rng rng(seed);
  std::vector<ConvLayer> layers;
  const auto specs = describe(arch);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    ConvLayer l{s, Tensor({s.out, s.in, s.kernel, s.kernel}), Tensor({s.out})};
    const double stddev = std::sqrt(2.0 / (s.in * s.kernel * s.kernel));
    for (double& w : l.weight.values()) w = rng.normal() * stddev;
    if (zero_final && i + 1 == specs.size()) l.weight.fill(0.0);
    layers.push_back(std::move(l));
  }
  return NetParams(arch, std::move(layers), seed);
}

const ConvLayer& NetParams::layer(const std::string& name) const {
  for (const auto& l : layers_) {
    if (l.spec.name == name) return l;
  }
  throw ShapeError("NetParams: no layer named " + name);
}

std::size_t NetParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

bool NetParams::operator==(const NetParams& o) const {
  if (!(arch_ == o.arch_) || seed_ != o.seed_ || layers_.size() != o.layers_.size()) return false;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (!(layers_[i].spec == o.layers_[i].spec) || !(layers_[i].weight == o.layers_[i].weight) ||
        !(layers_[i].bias == o.layers_[i].bias)) {
      return false;
    }
  }
  return true;
}

Gradients Gradients::zeros_like(const NetParams& params) {
  Gradients g;
  for (const auto& l : params.layers()) {
    g.weights.emplace_back(l.weight.shape());
    g.biases.emplace_back(l.bias.shape());
  }
  return g;
}

Gradients& Gradients::operator+=(const Gradients& o) {
  if (o.weights.size() != weights.size()) throw ShapeError("Gradients: layer count mismatch");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!weights[i].same_shape(o.weights[i]) || !biases[i].same_shape(o.biases[i])) {
      throw ShapeError("Gradients: shape mismatch at layer " + std::to_string(i));
    }
    for (std::size_t j = 0; j < weights[i].size(); ++j) weights[i][j] += o.weights[i][j];
    for (std::size_t j = 0; j < biases[i].size(); ++j) biases[i][j] += o.biases[i][j];
  }
  return *this;
}

void Gradients::scale(double s) {
  for (auto& t : weights)
    for (double& v : t.values()) v *= s;
  for (auto& t : biases)
    for (double& v : t.values()) v *= s;
}

bool Gradients::all_finite() const {
  return std::all_of(weights.begin(), weights.end(), [](const Tensor& t) { return t.all_finite(); }) &&
         std::all_of(biases.begin(), biases.end(), [](const Tensor& t) { return t.all_finite(); });
}

double Gradients::max_abs() const {
  double m = 0.0;
  for (const auto* group : {&weights, &biases})
    for (const auto& t : *group)
      for (double v : t.values()) m = std::max(m, std::abs(v));
  return m;
}

namespace {

struct LayerIndex {
  int img1 = 0, img2 = 1, pl1 = -1, pl2 = -1, dec1, dec2, out;
  explicit LayerIndex(const ArchConfig& a) {
    int next = 2;
    if (a.has_pl_encoder()) {
      pl1 = next++;
      pl2 = next++;
    }
    dec1 = next++;
    dec2 = next++;
    out = next;
  }
};

Tensor conv_layer(const ConvLayer& l, const Tensor& in) {
  if (in.dim(0) != l.spec.in) {
    throw ShapeError("layer " + l.spec.name + ": expected " + std::to_string(l.spec.in) +
                     " input channels, got " + std::to_string(in.dim(0)));
  }
  Tensor out = conv2d_forward(in, l.weight, l.bias, l.spec.stride);
  if (l.spec.relu) relu_inplace(out);
  return out;
}

void check_inputs(const NetParams& params, const Tensor& image, const Tensor& pl) {
  const auto& a = params.arch();
  if (image.rank() != 3 || image.dim(0) != a.image_channels) {
    throw ShapeError("layer img_conv1: image tensor " + image.shape_string() +
                     " has the wrong channel count");
  }
  if (image.dim(1) % 4 != 0 || image.dim(2) % 4 != 0) {
    throw ShapeError("forward: spatial dims must be divisible by 4, got " + image.shape_string());
  }
  if (a.has_pl_encoder()) {
    if (pl.rank() != 3 || pl.dim(0) != a.pl_channels) {
      throw ShapeError("layer pl_conv1: pseudo-label tensor " + pl.shape_string() +
                       " has the wrong channel count");
    }
    if (pl.dim(1) != image.dim(1) || pl.dim(2) != image.dim(2)) {
      throw ShapeError("layer pl_conv1: pseudo-label tensor spatial dims differ from image");
    }
  }
}

}  // namespace

ForwardResult forward(const NetParams& params, const Tensor& image, const Tensor& pl) {
  check_inputs(params, image, pl);
  const LayerIndex li(params.arch());
  const auto& L = params.layers();
  ForwardResult r;
  auto& c = r.cache;
  c.params = &params;
  c.version = params.version();
  c.image = image;
  c.img1 = conv_layer(L[li.img1], image);
  c.img2 = conv_layer(L[li.img2], c.img1);
  if (params.arch().has_pl_encoder()) {
    c.pl = pl;
    const auto indices = onehot_indices(pl, kNumClasses);
    if (indices.empty()) {
      c.pl1 = conv_layer(L[li.pl1], pl);
    } else {
      const auto& l = L[li.pl1];
      c.pl1 = conv2d_forward_onehot(indices, pl.dim(1), pl.dim(2), l.weight, l.bias,
                                    l.spec.stride, kNumClasses);
      relu_inplace(c.pl1);
    }
    c.pl2 = conv_layer(L[li.pl2], c.pl1);
    c.concat = concat_channels(c.img2, c.pl2);
  } else {
    c.concat = c.img2;
  }
  c.dec1 = conv_layer(L[li.dec1], c.concat);
  c.up = upsample2x(c.dec1);
  c.dec2 = conv_layer(L[li.dec2], c.up);
  r.logits = conv_layer(L[li.out], c.dec2);
  return r;
}

Tensor predict_logits(const NetParams& params, const Tensor& image, const Tensor& pl) {
  return forward(params, image, pl).logits;
}

Gradients backward(const NetParams& params, const ForwardCache& cache, const Tensor& d_logits) {
  if (cache.params != &params || cache.version != params.version()) {
    throw std::logic_error("backward: stale forward cache (parameters changed since forward)");
  }
  const LayerIndex li(params.arch());
  const auto& L = params.layers();
  Gradients g = Gradients::zeros_like(params);
  if (!d_logits.same_shape(Tensor::chw(params.arch().classes, cache.dec2.dim(1), cache.dec2.dim(2)))) {
    throw ShapeError("backward: logits gradient has shape " + d_logits.shape_string());
  }

  Tensor d_dec2, d_up, d_concat;
  conv2d_backward(cache.dec2, L[li.out].weight, 1, d_logits, g.weights[li.out], g.biases[li.out],
                  &d_dec2);
  relu_backward_inplace(cache.dec2, d_dec2);
  conv2d_backward(cache.up, L[li.dec2].weight, 1, d_dec2, g.weights[li.dec2], g.biases[li.dec2],
                  &d_up);
  Tensor d_dec1 = upsample2x_backward(d_up);
  relu_backward_inplace(cache.dec1, d_dec1);
  conv2d_backward(cache.concat, L[li.dec1].weight, 1, d_dec1, g.weights[li.dec1],
                  g.biases[li.dec1], &d_concat);

  Tensor d_img2;
  Tensor d_pl2;
  if (params.arch().has_pl_encoder()) {
    std::tie(d_img2, d_pl2) = split_channels(d_concat, params.arch().enc_out);
  } else {
    d_img2 = std::move(d_concat);
  }

  Tensor d_img1;
  relu_backward_inplace(cache.img2, d_img2);
  conv2d_backward(cache.img1, L[li.img2].weight, 2, d_img2, g.weights[li.img2], g.biases[li.img2],
                  &d_img1);
  relu_backward_inplace(cache.img1, d_img1);
  conv2d_backward(cache.image, L[li.img1].weight, 1, d_img1, g.weights[li.img1],
                  g.biases[li.img1], nullptr);

  if (params.arch().has_pl_encoder()) {
    Tensor d_pl1;
    relu_backward_inplace(cache.pl2, d_pl2);
    conv2d_backward(cache.pl1, L[li.pl2].weight, 2, d_pl2, g.weights[li.pl2], g.biases[li.pl2],
                    &d_pl1);
    relu_backward_inplace(cache.pl1, d_pl1);
    conv2d_backward(cache.pl, L[li.pl1].weight, 1, d_pl1, g.weights[li.pl1], g.biases[li.pl1],
                    nullptr);
  }
  return g;
}

LossResult softmax_ce(const Tensor& logits, const LabelMap& target,
                      const std::optional<std::array<double, kNumClasses>>& class_weights) {
  if (logits.rank() != 3 || logits.dim(0) != kNumClasses || logits.dim(1) != target.height() ||
      logits.dim(2) != target.width()) {
    throw ShapeError("softmax_ce: logits " + logits.shape_string() + " vs target " +
                     std::to_string(target.height()) + "x" + std::to_string(target.width()));
  }
  const int h = target.height(), w = target.width();
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  LossResult r;
  r.d_logits = Tensor(logits.shape());
  double total = 0.0;
  double norm = 0.0;
  const double* z = logits.data();
  double* dz = r.d_logits.data();
  for (std::size_t p = 0; p < plane; ++p) {
    const std::uint8_t t = target.data()[p];
    if (t == kIgnore) continue;
    double m = z[p];
    for (int c = 1; c < kNumClasses; ++c) m = std::max(m, z[c * plane + p]);
    double e[kNumClasses];
    double sum = 0.0;
    for (int c = 0; c < kNumClasses; ++c) {
      e[c] = std::exp(z[c * plane + p] - m);
      sum += e[c];
    }
    const double log_sum = std::log(sum);
    const double wt = class_weights ? (*class_weights)[t] : 1.0;
    total += wt * (log_sum - (z[t * plane + p] - m));
    norm += wt;
    for (int c = 0; c < kNumClasses; ++c) {
      dz[c * plane + p] = wt * (e[c] / sum - (c == t ? 1.0 : 0.0));
    }
    ++r.counted;
  }
  if (r.counted == 0) throw ShapeError("softmax_ce: target has no non-IGNORE pixels");
  if (!(norm > 0.0)) throw ShapeError("softmax_ce: class weights sum to zero on target");
  r.loss = total / norm;
  for (double& v : r.d_logits.values()) v /= norm;
  return r;
}

SgdOptimizer::SgdOptimizer(double lr, double momentum) : lr_(lr), momentum_(momentum) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("sgd: lr must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("sgd: momentum must lie in [0, 1)");
  }
}

void SgdOptimizer::set_lr(double lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("sgd: lr must be >= 0");
  lr_ = lr;
}

void SgdOptimizer::step(NetParams& params, const Gradients& grads) {
  if (grads.weights.size() != params.layers().size()) {
    throw ShapeError("sgd: gradient layer count does not match parameters");
  }
  if (!grads.all_finite()) throw std::domain_error("sgd: non-finite gradient");
  if (!velocity_) velocity_ = Gradients::zeros_like(params);
  auto& layers = params.mutable_layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto update = [&](Tensor& p, Tensor& v, const Tensor& g) {
      if (!p.same_shape(g)) throw ShapeError("sgd: shape mismatch at layer " + layers[i].spec.name);
      for (std::size_t j = 0; j < p.size(); ++j) {
        v[j] = momentum_ * v[j] + g[j];
        p[j] -= lr_ * v[j];
      }
    };
    update(layers[i].weight, velocity_->weights[i], grads.weights[i]);
    update(layers[i].bias, velocity_->biases[i], grads.biases[i]);
  }
  for (const auto& l : layers) {
    if (!l.weight.all_finite() || !l.bias.all_finite()) {
      throw std::domain_error("sgd: parameters became non-finite");
    }
  }
}

}  // namespace soilref::nn
