#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "soilref/core/geometry.hpp"
#include "soilref/core/rng.hpp"
#include "soilref/core/types.hpp"
#include "soilref/nn/network.hpp"

namespace soilref::train {

struct TrainConfig {
  int batch_size = 8;  // m
  int max_epochs = 12;
  /// SGD steps per epoch; 0 means ceil(n / batch_size).
  int steps_per_epoch = 0;
  double lr = 0.05;
  double momentum = 0.9;
  /// Cosine decay of lr to zero over max_epochs * steps; constant otherwise.
  bool cosine_lr = true;
  int crop_height = 32;
  int crop_width = 32;
  bool flips = true;
  bool rotations = true;
  std::uint64_t seed = 1;
  /// Validate every this many epochs (the final epoch is always validated).
  int val_every = 1;
  int patience = 4;
  std::optional<std::array<double, kNumClasses>> class_weights;
  /// Stage 2: choose the target on the whole image instead of the crop.
  bool full_image_selection = false;
  nn::ArchConfig arch;

  /// Throws std::invalid_argument; image dims are checked when given.
  void validate(int image_height = 0, int image_width = 0) const;
};

nlohmann::json to_json(const TrainConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig config_from_json(const nlohmann::json& j, TrainConfig base = {});

struct StageReport {
  int stage = 0;
  std::vector<double> train_loss;                // per epoch
  std::vector<std::optional<double>> val_loss;   // per epoch, empty when not evaluated
  /// Zero-based pseudo-label index counts of every target drawn.
  std::array<std::uint64_t, kNumPseudoLabels> histogram{};
  int best_epoch = 0;
  std::uint64_t steps = 0;
  double seconds = 0.0;
};

struct StageResult {
  nn::NetParams params;
  StageReport report;
};

/// Geometry drawn for one batch entry, applied as crop, flip_h, flip_v, rot90.
struct Augment {
  Window window;
  bool flip_h = false;
  bool flip_v = false;
  int rot = 0;
};

Augment draw_augment(Rng& rng, const TrainConfig& cfg, int height, int width);
Augment center_augment(const TrainConfig& cfg, int height, int width);
AlignedParts apply_augment(const Image& image, const std::vector<LabelMap>& maps, const Augment& a);

struct BatchEntry {
  std::size_t sample = 0;
  int pl_index = -1;  // zero-based; -1 when the target is not a pseudo-label
  Augment augment;
  Image image;
  PseudoLabelStack pls;
  LabelMap target;
};

/// Maps (image, stack) to a class distribution; H_1 in stage 2.
using Predictor = std::function<ProbMap(const Image&, const PseudoLabelStack&)>;
Predictor network_predictor(const nn::NetParams& params);

/// Mean per-pixel cross-entropy -log yhat[pl] for each of the nine maps.
std::array<double, kNumPseudoLabels> pl_cross_entropies(const ProbMap& yhat, const PseudoLabelStack& pls);
/// Zero-based index of the lowest cross-entropy; ties go to the lowest index.
int select_nn_pl(const ProbMap& yhat, const PseudoLabelStack& pls);

/// Draws training entries in the fixed order: sample, pseudo-label (stage 1
/// only), then augmentation.
class BatchSampler {
 public:
  BatchSampler(const std::vector<Sample>& data, const TrainConfig& cfg, std::uint64_t seed);

  BatchEntry draw_stage1();
  BatchEntry draw_stage2(const Predictor& h1);

 private:
  BatchEntry augmented(std::size_t p);

  const std::vector<Sample>& data_;
  TrainConfig cfg_;
  Rng rng_;
};

using EpochCallback = std::function<void(int stage, int epoch, double train_loss,
                                         std::optional<double> val_loss)>;

/// Stage 1: random pseudo-label targets.
StageResult train_stage1(const std::vector<Sample>& train, const std::vector<Sample>& val,
                         const TrainConfig& cfg, const EpochCallback& on_epoch = {});
/// Stage 2: nearest-neighbour targets chosen by the frozen predictor.
StageResult train_stage2(const std::vector<Sample>& train, const std::vector<Sample>& val,
                         const Predictor& h1, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {});
StageResult train_stage2(const std::vector<Sample>& train, const std::vector<Sample>& val,
                         const nn::NetParams& h1, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {});

struct LabeledImage {
  Image image;
  LabelMap label;
};

/// Plain image-only segmentation model (no pseudo-label encoder) trained on
/// fixed labels with the same loop, augmentation and stopping rule.
StageResult train_segmenter(const std::vector<LabeledImage>& train,
                            const std::vector<LabeledImage>& val, const TrainConfig& cfg,
                            const EpochCallback& on_epoch = {});

}  // namespace soilref::train
