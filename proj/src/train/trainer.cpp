#include "soilref/train/trainer.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <stdexcept>

#include "soilref/core/encode.hpp"
#include "soilref/nn/checkpoint.hpp"

namespace soilref::train {

namespace {

// Stream identifiers for seeds derived from TrainConfig::seed.
constexpr std::uint64_t kInitStage1 = 101;
constexpr std::uint64_t kInitStage2 = 102;
constexpr std::uint64_t kInitSegmenter = 103;
constexpr std::uint64_t kDrawStage1 = 201;
constexpr std::uint64_t kDrawStage2 = 202;
constexpr std::uint64_t kDrawSegmenter = 203;

std::vector<LabelMap> stack_maps(const PseudoLabelStack& pls) {
  return {pls.maps().begin(), pls.maps().end()};
}

PseudoLabelStack to_stack(const std::vector<LabelMap>& maps, std::size_t first,
                          const PseudoLabelStack::Provenance& prov) {
  PseudoLabelStack::Maps m;
  for (int q = 0; q < kNumPseudoLabels; ++q) m[q] = maps[first + q];
  return PseudoLabelStack(std::move(m), prov);
}

void check_samples(const std::vector<Sample>& data, const TrainConfig& cfg) {
  for (const auto& s : data) {
    s.validate();
    cfg.validate(s.image.height(), s.image.width());
  }
}

using DrawFn = std::function<BatchEntry()>;
using ValFn = std::function<double(const nn::NetParams&)>;

StageResult run_loop(int stage, std::size_t n, const TrainConfig& cfg, const nn::ArchConfig& arch,
                     std::uint64_t init_seed, const DrawFn& draw, const ValFn& val,
                     const EpochCallback& on_epoch) {
  const auto t0 = std::chrono::steady_clock::now();
  const int m = cfg.batch_size;
  const int steps = cfg.steps_per_epoch > 0 ? cfg.steps_per_epoch
                                            : static_cast<int>((n + m - 1) / m);
  StageResult res;
  res.report.stage = stage;
  nn::NetParams params = nn::NetParams::init(arch, init_seed);
  nn::SgdOptimizer opt(cfg.lr, cfg.momentum);
  nn::NetParams best = params;
  double best_score = std::numeric_limits<double>::infinity();
  int stale = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (int s = 0; s < steps; ++s) {
      if (cfg.cosine_lr) {
        const double t = static_cast<double>(res.report.steps) / (static_cast<double>(steps) * cfg.max_epochs);
        opt.set_lr(cfg.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t)));
      }
      nn::Gradients grads = nn::Gradients::zeros_like(params);
      double batch_loss = 0.0;
      for (int j = 0; j < m; ++j) {
        BatchEntry e = draw();
        if (e.pl_index >= 0) ++res.report.histogram[e.pl_index];
        const Tensor x = image_tensor(e.image);
        const Tensor pl = arch.has_pl_encoder() ? stack_encode(e.pls) : Tensor{};
        const nn::ForwardResult fwd = nn::forward(params, x, pl);
        const nn::LossResult loss = nn::softmax_ce(fwd.logits, e.target, cfg.class_weights);
        if (!std::isfinite(loss.loss)) {
          throw std::runtime_error(fmt::format("stage {}: non-finite loss at epoch {}, step {}",
                                               stage, epoch, s));
        }
        batch_loss += loss.loss;
        grads += nn::backward(params, fwd.cache, loss.d_logits);
      }
      grads.scale(1.0 / m);
      opt.step(params, grads);
      epoch_loss += batch_loss / m;
      ++res.report.steps;
    }
    epoch_loss /= steps;
    res.report.train_loss.push_back(epoch_loss);

    const bool evaluate = epoch % cfg.val_every == 0 || epoch == cfg.max_epochs;
    std::optional<double> vloss;
    if (evaluate) {
      const double score = val ? val(params) : epoch_loss;
      if (val) vloss = score;
      if (!std::isfinite(score)) {
        throw std::runtime_error(fmt::format("stage {}: non-finite validation loss", stage));
      }
      if (score < best_score) {
        best_score = score;
        best = params;
        res.report.best_epoch = epoch;
        stale = 0;
      } else {
        ++stale;
      }
    }
    res.report.val_loss.push_back(vloss);
    if (on_epoch) on_epoch(stage, epoch, epoch_loss, vloss);
    if (evaluate && stale >= cfg.patience) break;
  }
  res.params = std::move(best);
  res.report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

struct CenterView {
  Image image;
  PseudoLabelStack pls;
};

std::vector<CenterView> center_views(const std::vector<Sample>& data, const TrainConfig& cfg) {
  std::vector<CenterView> out;
  for (const auto& s : data) {
    const Augment a = center_augment(cfg, s.image.height(), s.image.width());
    AlignedParts parts = apply_augment(s.image, stack_maps(s.pls), a);
    out.push_back({std::move(parts.image), to_stack(parts.maps, 0, s.pls.provenance())});
  }
  return out;
}

}  // namespace

void TrainConfig::validate(int image_height, int image_width) const {
  if (batch_size < 1) throw std::invalid_argument("batch size m must be at least 1");
  if (max_epochs < 1) throw std::invalid_argument("max_epochs must be at least 1");
  if (steps_per_epoch < 0) throw std::invalid_argument("steps_per_epoch must be non-negative");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("lr must be finite and >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0,1)");
  if (crop_height < 4 || crop_width < 4 || crop_height % 4 != 0 || crop_width % 4 != 0) {
    throw std::invalid_argument("crop dims must be positive multiples of 4");
  }
  if (val_every < 1) throw std::invalid_argument("val_every must be at least 1");
  if (patience < 1) throw std::invalid_argument("patience must be at least 1");
  if (class_weights) {
    for (double w : *class_weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("class weights must be finite and >= 0");
    }
  }
  if (image_height > 0 && (crop_height > image_height || crop_width > image_width)) {
    throw std::invalid_argument(fmt::format("crop {}x{} exceeds image {}x{}", crop_height, crop_width,
                                            image_height, image_width));
  }
}

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j;
  j["batch_size"] = c.batch_size;
  j["max_epochs"] = c.max_epochs;
  j["steps_per_epoch"] = c.steps_per_epoch;
  j["lr"] = c.lr;
  j["momentum"] = c.momentum;
  j["cosine_lr"] = c.cosine_lr;
  j["crop_height"] = c.crop_height;
  j["crop_width"] = c.crop_width;
  j["flips"] = c.flips;
  j["rotations"] = c.rotations;
  j["seed"] = c.seed;
  j["val_every"] = c.val_every;
  j["patience"] = c.patience;
  j["class_weights"] = c.class_weights ? nlohmann::json(*c.class_weights) : nlohmann::json(nullptr);
  j["full_image_selection"] = c.full_image_selection;
  j["arch"] = nn::arch_to_json(c.arch);
  return j;
}

TrainConfig config_from_json(const nlohmann::json& j, TrainConfig c) {
  if (!j.is_object()) throw std::invalid_argument("training config must be a JSON object");
  static const std::set<std::string> known{
      "batch_size", "max_epochs", "steps_per_epoch", "lr",         "momentum", "cosine_lr",
      "crop_height", "crop_width", "flips",          "rotations",  "seed",
      "val_every",  "patience",   "class_weights",   "full_image_selection", "arch"};
  for (const auto& [k, v] : j.items()) {
    if (!known.contains(k)) throw std::invalid_argument("unknown training config key '" + k + "'");
  }
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
  };
  get("batch_size", c.batch_size);
  get("max_epochs", c.max_epochs);
  get("steps_per_epoch", c.steps_per_epoch);
  get("lr", c.lr);
  get("momentum", c.momentum);
  get("crop_height", c.crop_height);
  get("crop_width", c.crop_width);
  get("flips", c.flips);
  get("rotations", c.rotations);
  get("seed", c.seed);
  get("val_every", c.val_every);
  get("patience", c.patience);
  get("full_image_selection", c.full_image_selection);
  if (j.contains("class_weights")) {
    if (j["class_weights"].is_null()) c.class_weights.reset();
    else c.class_weights = j["class_weights"].get<std::array<double, kNumClasses>>();
  }
  if (j.contains("arch")) c.arch = nn::arch_from_json(j["arch"]);
  c.validate();
  return c;
}

Augment draw_augment(Rng& rng, const TrainConfig& cfg, int height, int width) {
  Augment a;
  a.window = {rng.range(0, height - cfg.crop_height), rng.range(0, width - cfg.crop_width),
              cfg.crop_height, cfg.crop_width};
  if (cfg.flips) {
    a.flip_h = rng.bernoulli(0.5);
    a.flip_v = rng.bernoulli(0.5);
  }
  if (cfg.rotations) {
    // Odd quarter turns would change a non-square crop's shape.
    a.rot = cfg.crop_height == cfg.crop_width ? rng.range(0, 3) : 2 * rng.range(0, 1);
  }
  return a;
}

Augment center_augment(const TrainConfig& cfg, int height, int width) {
  Augment a;
  a.window = {(height - cfg.crop_height) / 2, (width - cfg.crop_width) / 2, cfg.crop_height,
              cfg.crop_width};
  return a;
}

AlignedParts apply_augment(const Image& image, const std::vector<LabelMap>& maps, const Augment& a) {
  AlignedParts parts{image, maps};
  parts = crop(parts, a.window);
  if (a.flip_h) parts = flip_h(parts);
  if (a.flip_v) parts = flip_v(parts);
  if (a.rot != 0) parts = rot90(parts, a.rot);
  return parts;
}

Predictor network_predictor(const nn::NetParams& params) {
  return [&params](const Image& image, const PseudoLabelStack& pls) {
    const Tensor pl = params.arch().has_pl_encoder() ? stack_encode(pls) : Tensor{};
    return softmax_probs(nn::predict_logits(params, image_tensor(image), pl));
  };
}

std::array<double, kNumPseudoLabels> pl_cross_entropies(const ProbMap& yhat, const PseudoLabelStack& pls) {
  if (yhat.width() != pls.width() || yhat.height() != pls.height()) {
    throw ShapeError(fmt::format("select_nn_pl: prediction is {}x{}, stack is {}x{}", yhat.height(),
                                 yhat.width(), pls.height(), pls.width()));
  }
  std::array<double, kNumPseudoLabels> ce{};
  const double count = static_cast<double>(yhat.width()) * yhat.height();
  for (int q = 0; q < kNumPseudoLabels; ++q) {
    const auto codes = pls[q].data();
    double sum = 0.0;
    for (std::size_t i = 0; i < codes.size(); ++i) sum -= std::log(yhat.data()[i * kNumClasses + codes[i]]);
    ce[q] = sum / count;
  }
  return ce;
}

int select_nn_pl(const ProbMap& yhat, const PseudoLabelStack& pls) {
  const auto ce = pl_cross_entropies(yhat, pls);
  int best = 0;
  for (int q = 1; q < kNumPseudoLabels; ++q) {
    if (ce[q] < ce[best]) best = q;
  }
  return best;
}

BatchSampler::BatchSampler(const std::vector<Sample>& data, const TrainConfig& cfg, std::uint64_t seed)
    : data_(data), cfg_(cfg), rng_(seed) {
  if (data_.empty()) throw std::invalid_argument("training set is empty");
  check_samples(data_, cfg_);
}

BatchEntry BatchSampler::augmented(std::size_t p) {
  const Sample& s = data_[p];
  BatchEntry e;
  e.sample = p;
  e.augment = draw_augment(rng_, cfg_, s.image.height(), s.image.width());
  AlignedParts parts = apply_augment(s.image, stack_maps(s.pls), e.augment);
  e.image = std::move(parts.image);
  e.pls = to_stack(parts.maps, 0, s.pls.provenance());
  return e;
}

BatchEntry BatchSampler::draw_stage1() {
  const std::size_t p = rng_.below(data_.size());
  const int q = static_cast<int>(rng_.below(kNumPseudoLabels));
  BatchEntry e = augmented(p);
  e.pl_index = q;
  e.target = e.pls[q];
  return e;
}

BatchEntry BatchSampler::draw_stage2(const Predictor& h1) {
  const std::size_t p = rng_.below(data_.size());
  BatchEntry e = augmented(p);
  if (cfg_.full_image_selection) {
    e.pl_index = select_nn_pl(h1(data_[p].image, data_[p].pls), data_[p].pls);
  } else {
    e.pl_index = select_nn_pl(h1(e.image, e.pls), e.pls);
  }
  e.target = e.pls[e.pl_index];
  return e;
}

StageResult train_stage1(const std::vector<Sample>& train, const std::vector<Sample>& val,
                         const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  BatchSampler sampler(train, cfg, derive_seed(cfg.seed, kDrawStage1));
  check_samples(val, cfg);
  const auto views = center_views(val, cfg);
  ValFn val_fn;
  if (!views.empty()) {
    // Expected loss of the random rule: the mean over all nine targets.
    val_fn = [&](const nn::NetParams& params) {
      double total = 0.0;
      for (const auto& v : views) {
        const Tensor logits = nn::predict_logits(params, image_tensor(v.image), stack_encode(v.pls));
        double s = 0.0;
        for (int q = 0; q < kNumPseudoLabels; ++q) s += nn::softmax_ce(logits, v.pls[q], cfg.class_weights).loss;
        total += s / kNumPseudoLabels;
      }
      return total / static_cast<double>(views.size());
    };
  }
  return run_loop(1, train.size(), cfg, cfg.arch, derive_seed(cfg.seed, kInitStage1),
                  [&] { return sampler.draw_stage1(); }, val_fn, on_epoch);
}

StageResult train_stage2(const std::vector<Sample>& train, const std::vector<Sample>& val,
                         const Predictor& h1, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  BatchSampler sampler(train, cfg, derive_seed(cfg.seed, kDrawStage2));
  check_samples(val, cfg);
  const auto views = center_views(val, cfg);
  std::vector<int> chosen;
  for (std::size_t i = 0; i < views.size(); ++i) {
    chosen.push_back(cfg.full_image_selection ? select_nn_pl(h1(val[i].image, val[i].pls), val[i].pls)
                                              : select_nn_pl(h1(views[i].image, views[i].pls), views[i].pls));
  }
  ValFn val_fn;
  if (!views.empty()) {
    val_fn = [&](const nn::NetParams& params) {
      double total = 0.0;
      for (std::size_t i = 0; i < views.size(); ++i) {
        const Tensor logits =
            nn::predict_logits(params, image_tensor(views[i].image), stack_encode(views[i].pls));
        total += nn::softmax_ce(logits, views[i].pls[chosen[i]], cfg.class_weights).loss;
      }
      return total / static_cast<double>(views.size());
    };
  }
  return run_loop(2, train.size(), cfg, cfg.arch, derive_seed(cfg.seed, kInitStage2),
                  [&] { return sampler.draw_stage2(h1); }, val_fn, on_epoch);
}

StageResult train_stage2(const std::vector<Sample>& train, const std::vector<Sample>& val,
                         const nn::NetParams& h1, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  if (!h1.arch().has_pl_encoder()) throw std::invalid_argument("stage 2 needs an ensemble network as H1");
  return train_stage2(train, val, network_predictor(h1), cfg, on_epoch);
}

StageResult train_segmenter(const std::vector<LabeledImage>& train, const std::vector<LabeledImage>& val,
                            const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train.empty()) throw std::invalid_argument("training set is empty");
  auto check = [&](const LabeledImage& li) {
    if (!li.label.same_shape(li.image)) throw ShapeError("segmenter: label and image differ in size");
    cfg.validate(li.image.height(), li.image.width());
  };
  for (const auto& li : train) check(li);
  for (const auto& li : val) check(li);

  nn::ArchConfig arch = cfg.arch;
  arch.pl_channels = 0;
  Rng rng(derive_seed(cfg.seed, kDrawSegmenter));
  auto draw = [&] {
    const std::size_t p = rng.below(train.size());
    const auto& li = train[p];
    BatchEntry e;
    e.sample = p;
    e.augment = draw_augment(rng, cfg, li.image.height(), li.image.width());
    AlignedParts parts = apply_augment(li.image, {li.label}, e.augment);
    e.image = std::move(parts.image);
    e.target = std::move(parts.maps[0]);
    return e;
  };
  std::vector<LabeledImage> views;
  for (const auto& li : val) {
    AlignedParts parts = apply_augment(li.image, {li.label}, center_augment(cfg, li.image.height(), li.image.width()));
    views.push_back({std::move(parts.image), std::move(parts.maps[0])});
  }
  ValFn val_fn;
  if (!views.empty()) {
    val_fn = [&](const nn::NetParams& params) {
      double total = 0.0;
      for (const auto& v : views) {
        total += nn::softmax_ce(nn::predict_logits(params, image_tensor(v.image), Tensor{}), v.label,
                                cfg.class_weights)
                     .loss;
      }
      return total / static_cast<double>(views.size());
    };
  }
  return run_loop(0, train.size(), cfg, arch, derive_seed(cfg.seed, kInitSegmenter), draw, val_fn,
                  on_epoch);
}

}  // namespace soilref::train
