#pragma once

#include <vector>

#include "soilref/eval/metrics.hpp"
#include "soilref/train/trainer.hpp"

namespace soilref::app {

struct EnsembleResult {
  train::StageResult h1;
  train::StageResult h2;
};

/// Stage 1 then stage 2 with the same configuration.
EnsembleResult train_ensemble(const std::vector<Sample>& train, const std::vector<Sample>& val,
                              const train::TrainConfig& cfg, const train::EpochCallback& on_epoch = {});

std::vector<LabelMap> refine_all(const nn::NetParams& h2, const std::vector<Sample>& samples,
                                 int tile_height, int tile_width);

struct DownstreamResult {
  train::StageResult manual_model;
  train::StageResult refined_model;
  /// Three-way (plus truth, when available) reports for both models.
  std::vector<eval::EvalReport> reports;
};

inline constexpr const char* kManualModel = "manual-trained";
inline constexpr const char* kEnsembleModel = "ensemble-trained";

/// Trains two identically configured image-only models, one on the manual
/// annotations and one on the refined ones, and evaluates both on the test
/// samples. `refined_*` are aligned with the corresponding sample vectors.
DownstreamResult compare_downstream(const std::vector<Sample>& train, const std::vector<LabelMap>& refined_train,
                                    const std::vector<Sample>& val, const std::vector<LabelMap>& refined_val,
                                    const std::vector<Sample>& test, const std::vector<LabelMap>& refined_test,
                                    const train::TrainConfig& cfg, const train::EpochCallback& on_epoch = {});

/// Micro-aggregated metrics of label maps against truth.
eval::ClassMetrics score_against_truth(const std::vector<Sample>& samples, const std::vector<LabelMap>& maps);

}  // namespace soilref::app
