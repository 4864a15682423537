#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "soilref/core/types.hpp"

namespace soilref::eval {

/// Rows are ground-truth classes, columns predicted classes.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses> counts{};
  std::uint64_t ignored = 0;

  std::uint64_t total() const;
  ConfusionMatrix& operator+=(const ConfusionMatrix& o);
  bool operator==(const ConfusionMatrix&) const = default;
};

/// Counts over pixels whose gt is not IGNORE. Throws ShapeError on a size
/// mismatch or when pred contains IGNORE.
ConfusionMatrix confusion(const LabelMap& gt, const LabelMap& pred);

/// Per-class metrics in percent. A class absent from both gt and pred has no
/// IoU and no Acc; a class absent from gt only has IoU 0 and no Acc (recall is
/// 0/0). Missing values are excluded from the means.
struct ClassMetrics {
  std::array<std::optional<double>, kNumClasses> iou;
  std::array<std::optional<double>, kNumClasses> acc;
  std::optional<double> mean_iou;
  std::optional<double> mean_acc;
  /// Classes left out of each mean, for the report log.
  std::vector<int> excluded_iou;
  std::vector<int> excluded_acc;
};

ClassMetrics metrics(const ConfusionMatrix& cm);

/// Shared class where both maps agree, IGNORE elsewhere.
LabelMap intersection_set(const LabelMap& manual, const LabelMap& ensemble);

struct EvalReport {
  std::string model;    // e.g. "manual-trained"
  std::string variant;  // manual | ensemble | intersection | truth
  ConfusionMatrix cm;
  ClassMetrics m;
};

nlohmann::json to_json(const EvalReport& r);
/// Header plus one row per report: model,variant,class,iou,acc.
std::string reports_csv(const std::vector<EvalReport>& reports);
/// Text table: one block per class plus Mean, models as column
/// groups, annotation variants as sub-columns.
std::string render_table(const std::vector<EvalReport>& reports);

/// Aligned per-sample maps for one model's three-way evaluation.
struct EvalItem {
  LabelMap prediction;
  LabelMap manual;
  LabelMap refined;
  std::optional<LabelMap> truth;
};

/// Micro-aggregated reports against manual, ensemble and intersection
/// labels (plus truth when every item carries it). Throws on missing or
/// misaligned variants.
std::vector<EvalReport> three_way_eval(const std::string& model, const std::vector<EvalItem>& items);

}  // namespace soilref::eval
