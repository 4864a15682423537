#include "soilref/eval/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <map>

namespace soilref::eval {

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (const auto& row : counts)
    for (auto v : row) t += v;
  return t;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) {
  for (int i = 0; i < kNumClasses; ++i)
    for (int j = 0; j < kNumClasses; ++j) counts[i][j] += o.counts[i][j];
  ignored += o.ignored;
  return *this;
}

ConfusionMatrix confusion(const LabelMap& gt, const LabelMap& pred) {
  if (!gt.same_shape(pred)) {
    throw ShapeError(fmt::format("confusion: gt is {}x{}, pred is {}x{}", gt.height(), gt.width(),
                                 pred.height(), pred.width()));
  }
  ConfusionMatrix cm;
  const auto g = gt.data();
  const auto p = pred.data();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (p[i] == kIgnore) throw ShapeError("confusion: prediction contains IGNORE");
    if (g[i] == kIgnore) {
      ++cm.ignored;
      continue;
    }
    ++cm.counts[g[i]][p[i]];
  }
  return cm;
}

ClassMetrics metrics(const ConfusionMatrix& cm) {
  ClassMetrics out;
  double iou_sum = 0.0, acc_sum = 0.0;
  int iou_n = 0, acc_n = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    const double tp = static_cast<double>(cm.counts[c][c]);
    double fn = 0.0, fp = 0.0;
    for (int k = 0; k < kNumClasses; ++k) {
      if (k == c) continue;
      fn += static_cast<double>(cm.counts[c][k]);
      fp += static_cast<double>(cm.counts[k][c]);
    }
    if (tp + fp + fn > 0.0) {
      out.iou[c] = 100.0 * tp / (tp + fp + fn);
      iou_sum += *out.iou[c];
      ++iou_n;
    } else {
      out.excluded_iou.push_back(c);
    }
    if (tp + fn > 0.0) {
      out.acc[c] = 100.0 * tp / (tp + fn);
      acc_sum += *out.acc[c];
      ++acc_n;
    } else {
      out.excluded_acc.push_back(c);
    }
  }
  if (iou_n > 0) out.mean_iou = iou_sum / iou_n;
  if (acc_n > 0) out.mean_acc = acc_sum / acc_n;
  return out;
}

LabelMap intersection_set(const LabelMap& manual, const LabelMap& ensemble) {
  if (!manual.same_shape(ensemble)) throw ShapeError("intersection_set: size mismatch");
  std::vector<std::uint8_t> codes(manual.size());
  const auto a = manual.data();
  const auto b = ensemble.data();
  for (std::size_t i = 0; i < codes.size(); ++i) codes[i] = a[i] == b[i] ? a[i] : kIgnore;
  return LabelMap(manual.width(), manual.height(), std::move(codes));
}

namespace {

nlohmann::json opt(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::string cell(const std::optional<double>& v) { return v ? fmt::format("{:.1f}", *v) : "-"; }
std::string csv_cell(const std::optional<double>& v) { return v ? fmt::format("{:.6f}", *v) : ""; }

}  // namespace

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["model"] = r.model;
  j["variant"] = r.variant;
  nlohmann::json classes = nlohmann::json::array();
  for (int c = 0; c < kNumClasses; ++c) {
    classes.push_back({{"class", class_name(c)}, {"iou", opt(r.m.iou[c])}, {"acc", opt(r.m.acc[c])}});
  }
  j["classes"] = classes;
  j["mean_iou"] = opt(r.m.mean_iou);
  j["mean_acc"] = opt(r.m.mean_acc);
  j["excluded_from_mean_iou"] = r.m.excluded_iou;
  j["excluded_from_mean_acc"] = r.m.excluded_acc;
  j["confusion"] = r.cm.counts;
  j["ignored_pixels"] = r.cm.ignored;
  j["acc_definition"] = "per-class recall TP/(TP+FN)";
  j["aggregation"] = "micro (confusion matrices summed over samples)";
  return j;
}

std::string reports_csv(const std::vector<EvalReport>& reports) {
  std::string out = "model,variant,class,iou,acc\n";
  for (const auto& r : reports) {
    for (int c = 0; c < kNumClasses; ++c) {
      out += fmt::format("{},{},{},{},{}\n", r.model, r.variant, class_name(c), csv_cell(r.m.iou[c]),
                         csv_cell(r.m.acc[c]));
    }
    out += fmt::format("{},{},mean,{},{}\n", r.model, r.variant, csv_cell(r.m.mean_iou),
                       csv_cell(r.m.mean_acc));
  }
  return out;
}

std::string render_table(const std::vector<EvalReport>& reports) {
  std::vector<std::string> models;
  std::vector<std::string> variants;
  std::map<std::pair<std::string, std::string>, const EvalReport*> index;
  for (const auto& r : reports) {
    if (std::find(models.begin(), models.end(), r.model) == models.end()) models.push_back(r.model);
    if (std::find(variants.begin(), variants.end(), r.variant) == variants.end()) {
      variants.push_back(r.variant);
    }
    index[{r.model, r.variant}] = &r;
  }
  constexpr int kLabel = 18;
  constexpr int kCol = 16;
  std::string out;
  for (const auto& model : models) {
    out += fmt::format("model: {}\n", model);
    out += fmt::format("{:<{}}", "test labels", kLabel);
    for (const auto& v : variants) out += fmt::format("{:>{}}", v, kCol);
    out += "\n" + fmt::format("{:<{}}", "class", kLabel);
    for (std::size_t i = 0; i < variants.size(); ++i) out += fmt::format("{:>{}}", "IoU    Acc", kCol);
    out += "\n";
    auto line = [&](const std::string& label, auto get_iou, auto get_acc) {
      std::string row = fmt::format("{:<{}}", label, kLabel);
      for (const auto& v : variants) {
        auto it = index.find({model, v});
        std::optional<double> iou, acc;
        if (it != index.end()) {
          iou = get_iou(*it->second);
          acc = get_acc(*it->second);
        }
        row += fmt::format("{:>{}}", fmt::format("{:>5} {:>6}", cell(iou), cell(acc)), kCol);
      }
      return row + "\n";
    };
    for (int c = 0; c < kNumClasses; ++c) {
      out += line(class_name(c), [c](const EvalReport& r) { return r.m.iou[c]; },
                  [c](const EvalReport& r) { return r.m.acc[c]; });
    }
    out += line("mean", [](const EvalReport& r) { return r.m.mean_iou; },
                [](const EvalReport& r) { return r.m.mean_acc; });
    out += "\n";
  }
  return out;
}

std::vector<EvalReport> three_way_eval(const std::string& model, const std::vector<EvalItem>& items) {
  if (items.empty()) throw std::invalid_argument("three_way_eval: no samples");
  ConfusionMatrix vs_manual, vs_refined, vs_inter, vs_truth;
  bool all_truth = true;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& it = items[i];
    if (it.prediction.empty() || it.manual.empty() || it.refined.empty()) {
      throw std::invalid_argument(fmt::format("three_way_eval: sample {} is missing a variant", i));
    }
    if (!it.prediction.same_shape(it.manual) || !it.prediction.same_shape(it.refined)) {
      throw ShapeError(fmt::format("three_way_eval: sample {} has misaligned maps", i));
    }
    vs_manual += confusion(it.manual, it.prediction);
    vs_refined += confusion(it.refined, it.prediction);
    vs_inter += confusion(intersection_set(it.manual, it.refined), it.prediction);
    if (it.truth) vs_truth += confusion(*it.truth, it.prediction);
    else all_truth = false;
  }
  std::vector<EvalReport> out;
  out.push_back({model, "manual", vs_manual, metrics(vs_manual)});
  out.push_back({model, "ensemble", vs_refined, metrics(vs_refined)});
  out.push_back({model, "intersection", vs_inter, metrics(vs_inter)});
  if (all_truth) out.push_back({model, "truth", vs_truth, metrics(vs_truth)});
  return out;
}

}  // namespace soilref::eval
