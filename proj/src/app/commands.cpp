#include "soilref/app/commands.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <stdexcept>

#include "soilref/app/config.hpp"
#include "soilref/app/dataset.hpp"
#include "soilref/app/pipeline.hpp"
#include "soilref/core/io.hpp"
#include "soilref/eval/refine.hpp"
#include "soilref/nn/checkpoint.hpp"

namespace soilref::app {

namespace {

std::string manifest_hash(const fs::path& data) { return io::sha256_file(data / "manifest.json"); }

train::EpochCallback epoch_logger(const Log& log, std::vector<std::string>* csv_rows) {
  return [&log, csv_rows](int stage, int epoch, double train_loss, std::optional<double> val_loss) {
    std::string msg = fmt::format("  stage {} epoch {:3d}  train {:.5f}", stage, epoch, train_loss);
    if (val_loss) msg += fmt::format("  val {:.5f}", *val_loss);
    log.info(msg);
    if (csv_rows) {
      csv_rows->push_back(fmt::format("{},train,{:.10g}", epoch, train_loss));
      if (val_loss) csv_rows->push_back(fmt::format("{},val,{:.10g}", epoch, *val_loss));
    }
  };
}

std::string join_csv(const std::vector<std::string>& rows) {
  std::string out = "epoch,split,loss\n";
  for (const auto& r : rows) out += r + "\n";
  return out;
}

std::vector<LabelMap> aligned(const std::map<std::string, LabelMap>& maps, const std::vector<Sample>& samples) {
  std::vector<LabelMap> out;
  for (const auto& s : samples) {
    const LabelMap& m = maps.at(s.id);
    if (!m.same_shape(s.image)) throw ShapeError("refined map for " + s.id + " does not match its image");
    out.push_back(m);
  }
  return out;
}

fs::path resolve_checkpoint(const fs::path& p) {
  const fs::path file = fs::is_directory(p) ? p / "h2.ckpt" : p;
  if (!fs::exists(file)) throw std::runtime_error("checkpoint not found: " + file.string());
  return file;
}

}  // namespace

void cmd_gen(const GenOptions& o, const Log& log) {
  if (o.n < 10) throw std::invalid_argument("gen needs at least 10 samples for a 6:2:2 split");
  o.spec.validate();
  StagedRun run(o.out, "gen");
  log.info(fmt::format("generating {} samples of {}x{} (seed {})", o.n, o.spec.height, o.spec.width, o.spec.seed));
  write_dataset(run.dir(), o.spec, o.n);
  run.manifest()["seed"] = o.spec.seed;
  run.manifest()["config"] = {{"n", o.n}, {"scene", to_json(o.spec)}};
  run.commit();
  log.info("dataset written to " + run.out().string());
}

void cmd_train(const TrainOptions& o, const Log& log) {
  const Dataset ds = load_dataset(o.data);
  const auto train = ds.select(eval::Split::kTrain);
  const auto val = ds.select(eval::Split::kVal);
  if (train.empty()) throw std::runtime_error("dataset has no training samples");
  o.cfg.validate();
  if (!o.cfg.arch.has_pl_encoder()) throw std::invalid_argument("the ensemble network needs the pseudo-label encoder");
  StagedRun run(o.out, "train");
  const std::string data_hash = manifest_hash(o.data);
  nlohmann::json config = to_json(o.cfg);
  io::write_text(run.dir() / "config.json", config.dump(2) + "\n");

  log.info(fmt::format("stage 1 on {} training / {} validation samples", train.size(), val.size()));
  std::vector<std::string> rows1, rows2;
  train::StageResult h1 = train::train_stage1(train, val, o.cfg, epoch_logger(log, &rows1));
  log.info("stage 2");
  train::StageResult h2 = train::train_stage2(train, val, h1.params, o.cfg, epoch_logger(log, &rows2));

  auto meta = [&](const train::StageResult& r) {
    return nlohmann::json{{"stage", r.report.stage},
                          {"tile", {o.cfg.crop_height, o.cfg.crop_width}},
                          {"best_epoch", r.report.best_epoch},
                          {"steps", r.report.steps},
                          {"train_config", config},
                          {"dataset_manifest_sha256", data_hash}};
  };
  nn::save_checkpoint(run.dir() / "h1.ckpt", h1.params, meta(h1));
  nn::save_checkpoint(run.dir() / "h2.ckpt", h2.params, meta(h2));
  io::write_text(run.dir() / "metrics_stage1.csv", join_csv(rows1));
  io::write_text(run.dir() / "metrics_stage2.csv", join_csv(rows2));
  std::string hist = "stage,pl,provenance,count\n";
  const auto& prov = train.front().pls.provenance();
  for (const auto* r : {&h1, &h2}) {
    for (int q = 0; q < kNumPseudoLabels; ++q) {
      hist += fmt::format("{},{},{},{}\n", r->report.stage, q + 1, prov[q], r->report.histogram[q]);
    }
  }
  io::write_text(run.dir() / "pl_histogram.csv", hist);

  run.manifest()["seed"] = o.cfg.seed;
  run.manifest()["config"] = config;
  run.manifest()["inputs"] = {{"dataset", fs::absolute(o.data).string()}, {"dataset_manifest_sha256", data_hash}};
  run.manifest()["wall_clock_seconds"] = {{"stage1", h1.report.seconds}, {"stage2", h2.report.seconds}};
  run.commit();
  log.info("checkpoints written to " + run.out().string());
}

void cmd_refine(const RefineOptions& o, const Log& log) {
  const fs::path ckpt_path = resolve_checkpoint(o.checkpoint);
  const nn::Checkpoint ckpt = nn::load_checkpoint(ckpt_path);
  if (!ckpt.params.arch().has_pl_encoder()) {
    throw std::invalid_argument("checkpoint " + ckpt_path.string() + " is not an ensemble network");
  }
  int tile_h = 32, tile_w = 32;
  if (ckpt.metadata.contains("tile")) {
    tile_h = ckpt.metadata["tile"].at(0);
    tile_w = ckpt.metadata["tile"].at(1);
  }
  const Dataset ds = load_dataset(o.data);
  std::vector<const Sample*> chosen;
  const bool all = o.split == "all";
  const eval::Split want = all ? eval::Split::kTrain : eval::split_from_name(o.split);
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    if (all || ds.splits[i] == want) chosen.push_back(&ds.samples[i]);
  }
  StagedRun run(o.out, "refine");
  nlohmann::json ids = nlohmann::json::array();
  for (const Sample* s : chosen) {
    io::save_pgm(run.dir() / (s->id + ".pgm"), eval::refine(ckpt.params, *s, tile_h, tile_w));
    ids.push_back(s->id);
  }
  const std::string ckpt_hash = io::sha256_file(ckpt_path);
  io::write_text(run.dir() / "refined.json",
                 nlohmann::json{{"split", o.split},
                                {"tile", {tile_h, tile_w}},
                                {"checkpoint_sha256", ckpt_hash},
                                {"dataset_manifest_sha256", manifest_hash(o.data)},
                                {"ids", ids}}
                         .dump(2) +
                     "\n");
  run.manifest()["seed"] = ckpt.params.seed();
  run.manifest()["config"] = {{"split", o.split}, {"tile", {tile_h, tile_w}}};
  run.manifest()["inputs"] = {{"dataset", fs::absolute(o.data).string()},
                              {"checkpoint", fs::absolute(ckpt_path).string()},
                              {"checkpoint_sha256", ckpt_hash}};
  run.commit();
  log.info(fmt::format("refined {} samples into {}", chosen.size(), run.out().string()));
}

std::string cmd_eval(const EvalOptions& o, const Log& log) {
  const Dataset ds = load_dataset(o.data);
  const auto train = ds.select(eval::Split::kTrain);
  const auto val = ds.select(eval::Split::kVal);
  const auto test = ds.select(eval::Split::kTest);
  if (train.empty() || test.empty()) throw std::runtime_error("dataset needs train and test samples");
  std::vector<std::string> ids;
  for (const auto& s : ds.samples) ids.push_back(s.id);
  const auto maps = load_label_dir(o.refined, ids);

  StagedRun run(o.out, "eval");
  log.info("training manual-trained and ensemble-trained downstream models");
  const DownstreamResult r = compare_downstream(train, aligned(maps, train), val, aligned(maps, val), test,
                                                aligned(maps, test), o.cfg, epoch_logger(log, nullptr));
  nlohmann::json reports = nlohmann::json::array();
  for (const auto& rep : r.reports) reports.push_back(eval::to_json(rep));
  const std::string table = eval::render_table(r.reports);
  nlohmann::json doc;
  doc["reports"] = reports;
  std::vector<LabelMap> manual_test;
  for (const auto& s : test) manual_test.push_back(s.pls[0]);
  const bool has_truth = std::all_of(test.begin(), test.end(), [](const Sample& s) { return s.truth.has_value(); });
  if (has_truth) {
    const auto refined_q = score_against_truth(test, aligned(maps, test));
    const auto manual_q = score_against_truth(test, manual_test);
    doc["annotation_quality_vs_truth"] = {{"refined_mean_iou", *refined_q.mean_iou},
                                          {"manual_mean_iou", *manual_q.mean_iou}};
  }
  doc["train_config"] = to_json(o.cfg);
  io::write_text(run.dir() / "reports.json", doc.dump(2) + "\n");
  io::write_text(run.dir() / "reports.csv", eval::reports_csv(r.reports));
  io::write_text(run.dir() / "table.txt", table);
  nn::save_checkpoint(run.dir() / "models" / "manual_trained.ckpt", r.manual_model.params,
                      {{"labels", "manual"}, {"tile", {o.cfg.crop_height, o.cfg.crop_width}}});
  nn::save_checkpoint(run.dir() / "models" / "ensemble_trained.ckpt", r.refined_model.params,
                      {{"labels", "ensemble"}, {"tile", {o.cfg.crop_height, o.cfg.crop_width}}});
  run.manifest()["seed"] = o.cfg.seed;
  run.manifest()["config"] = to_json(o.cfg);
  run.manifest()["inputs"] = {{"dataset", fs::absolute(o.data).string()},
                              {"dataset_manifest_sha256", manifest_hash(o.data)},
                              {"refined", fs::absolute(o.refined).string()}};
  run.commit();
  return table;
}

std::string cmd_report(const fs::path& in) {
  fs::path file = in;
  if (fs::is_directory(in)) {
    file = fs::exists(in / "reports.json") ? in / "reports.json" : in / "review_report.json";
  }
  if (!fs::exists(file)) throw std::runtime_error("no reports.json or review_report.json at " + in.string());
  const auto j = nlohmann::json::parse(io::read_text(file));
  if (j.contains("rows")) {
    ReviewSummary s;
    auto row = [](const nlohmann::json& r) {
      return ReviewRow{r.at("reviewer"), r.at("items"), r.at("manual_better"), r.at("ensemble_better"),
                       r.at("similar")};
    };
    for (const auto& r : j["rows"]) s.rows.push_back(row(r));
    s.average = row(j.at("average"));
    return render_review_table(s);
  }
  std::vector<eval::EvalReport> reports;
  for (const auto& r : j.at("reports")) {
    eval::EvalReport rep;
    rep.model = r.at("model");
    rep.variant = r.at("variant");
    rep.cm.counts = r.at("confusion").get<decltype(rep.cm.counts)>();
    rep.cm.ignored = r.at("ignored_pixels");
    rep.m = eval::metrics(rep.cm);
    reports.push_back(std::move(rep));
  }
  return eval::render_table(reports);
}

fs::path cmd_export_review(const ExportReviewOptions& o, const Log& log) {
  const Dataset ds = load_dataset(o.data);
  const auto test = ds.select(eval::Split::kTest);
  if (test.empty()) throw std::runtime_error("dataset has no test samples");
  const auto picked = pick_review_items(test.size(), o.opt.fraction, o.opt.seed);
  std::vector<std::string> ids;
  for (auto i : picked) ids.push_back(test[i].id);
  const auto maps = load_label_dir(o.refined, ids);
  std::vector<ReviewSource> items;
  for (auto i : picked) items.push_back({test[i].id, test[i].image, test[i].pls[0], maps.at(test[i].id)});

  StagedRun run(o.out, "export-review");
  nlohmann::json key = write_review_bundle(run.dir(), items, o.opt);
  run.manifest()["seed"] = o.opt.seed;
  run.manifest()["config"] = {{"fraction", o.opt.fraction}, {"reviewers", o.opt.reviewers}};
  run.manifest()["inputs"] = {{"dataset", fs::absolute(o.data).string()}, {"refined", fs::absolute(o.refined).string()}};
  run.commit();
  const fs::path key_path =
      o.key.empty() ? run.out().parent_path() / (run.out().filename().string() + ".key.json") : o.key;
  if (!key_path.parent_path().empty()) fs::create_directories(key_path.parent_path());
  write_text_atomic(key_path, key.dump(2) + "\n");
  log.info(fmt::format("review bundle with {} items x {} reviewers at {}; key at {}", items.size(),
                       o.opt.reviewers.size(), run.out().string(), key_path.string()));
  return key_path;
}

ReviewSummary cmd_import_review(const ImportReviewOptions& o, const Log& log) {
  if (o.results.empty()) throw std::invalid_argument("no reviewer result files given");
  if (!fs::exists(o.key)) throw std::runtime_error("review key not found: " + o.key.string());
  const auto key = nlohmann::json::parse(io::read_text(o.key));
  std::vector<Decision> all;
  for (const auto& f : o.results) {
    auto d = read_decisions(f);
    all.insert(all.end(), d.begin(), d.end());
  }
  const ReviewSummary s = summarize_review(key, all);
  if (s.duplicates > 0) log.info(fmt::format("{} repeated decisions superseded by later ones", s.duplicates));
  if (s.undecided > 0) log.info(fmt::format("{} items have no decision", s.undecided));
  if (o.out) {
    StagedRun run(*o.out, "import-review");
    io::write_text(run.dir() / "review_report.json", to_json(s).dump(2) + "\n");
    std::string csv = "reviewer,items,manual_better,ensemble_better,similar\n";
    std::vector<ReviewRow> rows = s.rows;
    rows.push_back(s.average);
    for (const auto& row : rows) {
      csv += fmt::format("{},{},{:.6f},{:.6f},{:.6f}\n", row.reviewer, row.items, row.manual_better,
                         row.ensemble_better, row.similar);
    }
    io::write_text(run.dir() / "review_report.csv", csv);
    io::write_text(run.dir() / "table.txt", render_review_table(s));
    nlohmann::json inputs = nlohmann::json::array();
    for (const auto& f : o.results) inputs.push_back(fs::absolute(f).string());
    run.manifest()["inputs"] = {{"key", fs::absolute(o.key).string()}, {"results", inputs}};
    run.commit();
  }
  return s;
}

}  // namespace soilref::app
