// soilref: command-line front end for data generation, ensemble training,
// refinement, evaluation and the blinded review workflow.

#include <fmt/format.h>

#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "soilref/app/commands.hpp"
#include "soilref/app/config.hpp"

namespace {

using namespace soilref;
namespace fs = std::filesystem;

constexpr int kUsageError = 2;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudo-label ensemble annotation refinement for camera-soiling segmentation"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::string out;
  bool quiet = false;
  app.add_option("--seed", seed, "Seed for generation, training and review blinding");
  app.add_option("--config", config_path, "JSON config with optional gen/train/eval sections")->check(CLI::ExistingFile);
  app.add_option("--out", out, "Output directory");
  app.add_flag("--quiet", quiet, "Suppress progress output");

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset with a stratified 6:2:2 split");
  std::optional<int> gen_n, gen_h, gen_w;
  gen->add_option("--n", gen_n, "Number of samples (default 500)")->check(CLI::PositiveNumber);
  gen->add_option("--height", gen_h, "Image height (multiple of 4, >= 16)");
  gen->add_option("--width", gen_w, "Image width (multiple of 4, >= 16)");

  // train
  auto* train = app.add_subcommand("train", "Train the stage-1 and stage-2 ensemble networks");
  std::string train_data;
  std::optional<int> epochs, steps, batch, crop;
  std::optional<double> lr;
  train->add_option("--data", train_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--epochs", epochs, "Maximum epochs per stage")->check(CLI::PositiveNumber);
  train->add_option("--steps", steps, "SGD steps per epoch (0: one pass over the training set)");
  train->add_option("--batch", batch, "Mini-batch size m")->check(CLI::PositiveNumber);
  train->add_option("--lr", lr, "Learning rate");
  train->add_option("--crop", crop, "Square crop size (multiple of 4)")->check(CLI::PositiveNumber);

  // refine
  auto* refine = app.add_subcommand("refine", "Write refined annotations from a stage-2 checkpoint");
  std::string refine_data, refine_ckpt, refine_split = "test";
  refine->add_option("--data", refine_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  refine->add_option("--checkpoint", refine_ckpt, "h2.ckpt or a train output directory")->required();
  refine->add_option("--split", refine_split, "train, val, test or all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}));

  // eval
  auto* evalc = app.add_subcommand("eval", "Train manual- and ensemble-trained models and evaluate three ways");
  std::string eval_data, eval_refined;
  std::optional<int> eval_epochs, eval_steps;
  evalc->add_option("--data", eval_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  evalc->add_option("--refined", eval_refined, "Refined maps for every sample (refine --split all)")
      ->required()
      ->check(CLI::ExistingDirectory);
  evalc->add_option("--epochs", eval_epochs, "Maximum epochs")->check(CLI::PositiveNumber);
  evalc->add_option("--steps", eval_steps, "SGD steps per epoch");

  // report
  auto* report = app.add_subcommand("report", "Print the evaluation or review table of a previous run");
  std::string report_in;
  report->add_option("--in", report_in, "eval or import-review output (directory or JSON)")->required();

  // export-review
  auto* exp = app.add_subcommand("export-review", "Write a blinded A/B review bundle");
  std::string exp_data, exp_refined, exp_key, exp_reviewers = "r1";
  double exp_fraction = 0.2;
  exp->add_option("--data", exp_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  exp->add_option("--refined", exp_refined, "Directory of refined maps")->required()->check(CLI::ExistingDirectory);
  exp->add_option("--fraction", exp_fraction, "Share of the test split to review")->check(CLI::Range(0.0, 1.0));
  exp->add_option("--reviewers", exp_reviewers, "Comma-separated reviewer ids");
  exp->add_option("--key", exp_key, "Where to write the unblinding key (default <out>.key.json)");

  // import-review
  auto* imp = app.add_subcommand("import-review", "Aggregate reviewer decisions into the inspection table");
  std::string imp_key;
  std::vector<std::string> imp_results;
  imp->add_option("--key", imp_key, "Key file written by export-review")->required();
  imp->add_option("results", imp_results, "Reviewer JSON-lines files")->required();

  for (auto* sub : {gen, train, refine, evalc, report, exp, imp}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  const app::Log log{quiet};
  try {
    app::ConfigFile cfg;
    if (!config_path.empty()) cfg = app::load_config_file(config_path);

    if (*gen) {
      app::GenOptions o;
      o.spec = app::scene_spec_from_json(cfg.gen);
      o.n = cfg.gen.value("n", o.n);
      if (gen_n) o.n = *gen_n;
      if (gen_h) o.spec.height = *gen_h;
      if (gen_w) o.spec.width = *gen_w;
      if (seed) o.spec.seed = *seed;
      o.out = out;
      app::cmd_gen(o, log);
    } else if (*train) {
      app::TrainOptions o;
      o.data = train_data;
      o.out = out;
      o.cfg = train::config_from_json(cfg.train, app::ensemble_defaults());
      if (epochs) o.cfg.max_epochs = *epochs;
      if (steps) o.cfg.steps_per_epoch = *steps;
      if (batch) o.cfg.batch_size = *batch;
      if (lr) o.cfg.lr = *lr;
      if (crop) o.cfg.crop_height = o.cfg.crop_width = *crop;
      if (seed) o.cfg.seed = *seed;
      app::cmd_train(o, log);
    } else if (*refine) {
      app::cmd_refine({refine_data, refine_ckpt, out, refine_split}, log);
    } else if (*evalc) {
      app::EvalOptions o;
      o.data = eval_data;
      o.refined = eval_refined;
      o.out = out;
      o.cfg = train::config_from_json(cfg.eval, app::downstream_defaults());
      if (eval_epochs) o.cfg.max_epochs = *eval_epochs;
      if (eval_steps) o.cfg.steps_per_epoch = *eval_steps;
      if (seed) o.cfg.seed = *seed;
      fmt::print("{}", app::cmd_eval(o, log));
    } else if (*report) {
      fmt::print("{}", app::cmd_report(report_in));
    } else if (*exp) {
      app::ExportReviewOptions o;
      o.data = exp_data;
      o.refined = exp_refined;
      o.out = out;
      o.key = exp_key;
      o.opt.fraction = exp_fraction;
      o.opt.reviewers = split_list(exp_reviewers);
      if (seed) o.opt.seed = *seed;
      app::cmd_export_review(o, log);
    } else if (*imp) {
      app::ImportReviewOptions o;
      o.key = imp_key;
      for (const auto& r : imp_results) o.results.emplace_back(r);
      if (!out.empty()) o.out = fs::path(out);
      fmt::print("{}", app::render_review_table(app::cmd_import_review(o, log)));
    }
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
