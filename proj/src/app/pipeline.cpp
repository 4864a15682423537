#include "soilref/app/pipeline.hpp"

#include <stdexcept>

#include "soilref/eval/refine.hpp"

namespace soilref::app {

EnsembleResult train_ensemble(const std::vector<Sample>& train, const std::vector<Sample>& val,
                              const train::TrainConfig& cfg, const train::EpochCallback& on_epoch) {
  EnsembleResult r;
  r.h1 = train::train_stage1(train, val, cfg, on_epoch);
  r.h2 = train::train_stage2(train, val, r.h1.params, cfg, on_epoch);
  return r;
}

std::vector<LabelMap> refine_all(const nn::NetParams& h2, const std::vector<Sample>& samples,
                                 int tile_height, int tile_width) {
  std::vector<LabelMap> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(eval::refine(h2, s, tile_height, tile_width));
  return out;
}

namespace {

std::vector<train::LabeledImage> pair_up(const std::vector<Sample>& samples, const std::vector<LabelMap>* labels) {
  if (labels && labels->size() != samples.size()) {
    throw std::invalid_argument("refined maps are not aligned with the samples");
  }
  std::vector<train::LabeledImage> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out.push_back({samples[i].image, labels ? (*labels)[i] : samples[i].pls[0]});
  }
  return out;
}

}  // namespace

DownstreamResult compare_downstream(const std::vector<Sample>& train, const std::vector<LabelMap>& refined_train,
                                    const std::vector<Sample>& val, const std::vector<LabelMap>& refined_val,
                                    const std::vector<Sample>& test, const std::vector<LabelMap>& refined_test,
                                    const train::TrainConfig& cfg, const train::EpochCallback& on_epoch) {
  if (refined_test.size() != test.size()) throw std::invalid_argument("refined test maps are not aligned");
  DownstreamResult r;
  r.manual_model = train::train_segmenter(pair_up(train, nullptr), pair_up(val, nullptr), cfg, on_epoch);
  r.refined_model =
      train::train_segmenter(pair_up(train, &refined_train), pair_up(val, &refined_val), cfg, on_epoch);
  for (const auto* model : {&r.manual_model, &r.refined_model}) {
    std::vector<eval::EvalItem> items;
    for (std::size_t i = 0; i < test.size(); ++i) {
      items.push_back({eval::refine(model->params, test[i], cfg.crop_height, cfg.crop_width), test[i].pls[0],
                       refined_test[i], test[i].truth});
    }
    const auto reports = eval::three_way_eval(model == &r.manual_model ? kManualModel : kEnsembleModel, items);
    r.reports.insert(r.reports.end(), reports.begin(), reports.end());
  }
  return r;
}

eval::ClassMetrics score_against_truth(const std::vector<Sample>& samples, const std::vector<LabelMap>& maps) {
  if (maps.size() != samples.size()) throw std::invalid_argument("maps are not aligned with the samples");
  eval::ConfusionMatrix cm;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!samples[i].truth) throw std::invalid_argument("sample " + samples[i].id + " has no truth map");
    cm += eval::confusion(*samples[i].truth, maps[i]);
  }
  return eval::metrics(cm);
}

}  // namespace soilref::app
