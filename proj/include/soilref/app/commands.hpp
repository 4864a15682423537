#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "soilref/app/review.hpp"
#include "soilref/app/run.hpp"
#include "soilref/synth/synth.hpp"
#include "soilref/train/trainer.hpp"

namespace soilref::app {

struct GenOptions {
  synth::SceneSpec spec;
  int n = 500;
  fs::path out;
};
void cmd_gen(const GenOptions& o, const Log& log);

struct TrainOptions {
  fs::path data;
  fs::path out;
  train::TrainConfig cfg;
};
/// Writes config.json, metrics_stage{1,2}.csv, h1.ckpt, h2.ckpt and
/// pl_histogram.csv.
void cmd_train(const TrainOptions& o, const Log& log);

struct RefineOptions {
  fs::path data;
  fs::path checkpoint;  // h2.ckpt or a train run directory
  fs::path out;
  std::string split = "test";  // train | val | test | all
};
/// One <id>.pgm per selected sample plus refined.json.
void cmd_refine(const RefineOptions& o, const Log& log);

struct EvalOptions {
  fs::path data;
  fs::path refined;
  fs::path out;
  train::TrainConfig cfg;
};
/// Trains the manual- and ensemble-trained downstream models and writes
/// reports.json, reports.csv and table.txt. Returns the table text.
std::string cmd_eval(const EvalOptions& o, const Log& log);

/// Renders table text from an eval run directory or reports.json, or a
/// review summary JSON.
std::string cmd_report(const fs::path& in);

struct ExportReviewOptions {
  fs::path data;
  fs::path refined;
  fs::path out;
  fs::path key;  // default: <out>.key.json next to the bundle
  ExportOptions opt;
};
/// Returns the path of the key file.
fs::path cmd_export_review(const ExportReviewOptions& o, const Log& log);

struct ImportReviewOptions {
  fs::path key;
  std::vector<fs::path> results;
  std::optional<fs::path> out;
};
ReviewSummary cmd_import_review(const ImportReviewOptions& o, const Log& log);

}  // namespace soilref::app
