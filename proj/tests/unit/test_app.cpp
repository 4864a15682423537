#include <doctest.h>

#include <fstream>

#include "oracles.hpp"
#include "soilref/app/config.hpp"
#include "soilref/app/dataset.hpp"
#include "soilref/app/pipeline.hpp"
#include "soilref/app/run.hpp"
#include "soilref/core/io.hpp"

using namespace soilref;
using namespace soilref::app;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("soilref_app_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

synth::SceneSpec small_spec(std::uint64_t seed = 3) {
  synth::SceneSpec s;
  s.height = s.width = 32;
  s.radius_min = 3;
  s.radius_max = 8;
  s.seed = seed;
  return s;
}

train::TrainConfig tiny_config() {
  train::TrainConfig c;
  c.batch_size = 2;
  c.max_epochs = 1;
  c.steps_per_epoch = 2;
  c.crop_height = c.crop_width = 16;
  return c;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("scene spec json round trip") {
    auto s = small_spec();
    s.p_conf = 0.5;
    s.morph[1] = {-2, 0.2};
    s.fixed_blobs.push_back({2, 10, 11, 4, 0.1, 0.05, 0.3, 0.7});
    const auto back = scene_spec_from_json(to_json(s));
    CHECK(to_json(back) == to_json(s));
    CHECK(scene_spec_from_json({{"width", 48}}, s).width == 48);
    CHECK(scene_spec_from_json({{"width", 48}}, s).height == 32);
    CHECK_THROWS(scene_spec_from_json({{"colour", 1}}));
  }

  TEST_CASE("defaults are valid") {
    CHECK_NOTHROW(ensemble_defaults().validate(64, 64));
    CHECK_NOTHROW(downstream_defaults().validate(64, 64));
    CHECK(ensemble_defaults().arch.has_pl_encoder());
    CHECK_FALSE(downstream_defaults().arch.has_pl_encoder());
    CHECK_NOTHROW(synth::SceneSpec{}.validate());
  }

  TEST_CASE("config file sections") {
    TempDir dir("cfg");
    io::write_text(dir.path / "ok.json", R"({"gen": {"width": 32}, "train": {"lr": 0.1}})");
    const auto c = load_config_file(dir.path / "ok.json");
    CHECK(c.gen["width"] == 32);
    CHECK(c.train["lr"] == 0.1);
    CHECK(c.eval.empty());
    io::write_text(dir.path / "bad.json", R"({"gen": {}, "extra": 1})");
    CHECK_THROWS(load_config_file(dir.path / "bad.json"));
    io::write_text(dir.path / "broken.json", "{");
    CHECK_THROWS(load_config_file(dir.path / "broken.json"));
  }
}

TEST_SUITE("dataset") {
  TEST_CASE("write and load round trip") {
    TempDir dir("ds");
    const auto spec = small_spec();
    write_dataset(dir.path, spec, 20);
    const auto ds = load_dataset(dir.path);
    REQUIRE(ds.samples.size() == 20);
    CHECK(ds.select(eval::Split::kTrain).size() == 12);
    CHECK(ds.select(eval::Split::kVal).size() == 4);
    CHECK(ds.select(eval::Split::kTest).size() == 4);
    const auto split = nlohmann::json::parse(io::read_text(dir.path / "split.json"));
    CHECK(split["ids"]["test"].get<std::vector<std::string>>() == ds.ids(eval::Split::kTest));
    for (int i = 0; i < 20; ++i) {
      const auto& s = ds.samples[i];
      const auto gen = synth::generate_sample(spec, static_cast<std::uint64_t>(i), s.id);
      CHECK(s.pls == gen.pls);
      CHECK(*s.truth == *gen.truth);
      CHECK(io::encode_ppm(s.image) == io::encode_ppm(gen.image));
      CHECK(ds.manifest["samples"][i]["pls"].size() == 9);
    }
  }

  TEST_CASE("identical inputs give identical files") {
    TempDir a("ds_a"), b("ds_b");
    write_dataset(a.path, small_spec(), 12);
    write_dataset(b.path, small_spec(), 12);
    CHECK(hash_tree(a.path) == hash_tree(b.path));
    TempDir c("ds_c");
    write_dataset(c.path, small_spec(4), 12);
    CHECK(hash_tree(a.path) != hash_tree(c.path));
  }

  TEST_CASE("corruption and missing files are detected") {
    TempDir dir("ds_bad");
    write_dataset(dir.path, small_spec(), 10);
    const auto first = nlohmann::json::parse(io::read_text(dir.path / "manifest.json"))["samples"][0];
    const fs::path pl = dir.path / first["pls"][4].get<std::string>();
    auto bytes = io::read_file(pl);
    bytes.back() ^= 1;
    io::write_file(pl, bytes);
    CHECK_THROWS_WITH(load_dataset(dir.path), doctest::Contains("hash mismatch"));
    CHECK_NOTHROW(load_dataset(dir.path, false));
    fs::remove(pl);
    CHECK_THROWS(load_dataset(dir.path, false));
    CHECK_THROWS(load_dataset(dir.path / "nowhere"));
    CHECK_THROWS(write_dataset(dir.path, small_spec(), 0));
  }

  TEST_CASE("label directory lookup lists missing ids") {
    TempDir dir("labels");
    io::write_file(dir.path / "a.pgm", io::encode_pgm(LabelMap(4, 4, 1)));
    const auto got = load_label_dir(dir.path, {"a"});
    CHECK(got.at("a") == LabelMap(4, 4, 1));
    CHECK_THROWS_WITH(load_label_dir(dir.path, {"a", "b", "c"}), doctest::Contains("b, c"));
  }
}

TEST_SUITE("run directory") {
  TEST_CASE("commit promotes the stage with hashes") {
    TempDir dir("run");
    const fs::path out = dir.path / "out";
    {
      StagedRun run(out, "test");
      io::write_text(run.dir() / "x.txt", "hello");
      CHECK_FALSE(fs::exists(out));
      run.commit();
    }
    const auto manifest = nlohmann::json::parse(io::read_text(out / "run.json"));
    CHECK(manifest["command"] == "test");
    CHECK(manifest["outputs"]["x.txt"] == io::sha256_hex({'h', 'e', 'l', 'l', 'o'}));
    CHECK(manifest.contains("started"));
    CHECK(manifest.contains("finished"));
    // A previous run may be replaced.
    {
      StagedRun run(out, "again");
      io::write_text(run.dir() / "y.txt", "y");
      run.commit();
    }
    CHECK_FALSE(fs::exists(out / "x.txt"));
    CHECK(fs::exists(out / "y.txt"));
  }

  TEST_CASE("abandoned stage leaves nothing behind") {
    TempDir dir("abandon");
    const fs::path out = dir.path / "out";
    fs::path staging;
    {
      StagedRun run(out, "test");
      staging = run.dir();
      io::write_text(run.dir() / "x.txt", "x");
    }
    CHECK_FALSE(fs::exists(staging));
    CHECK_FALSE(fs::exists(out));
  }

  TEST_CASE("foreign directories are refused") {
    TempDir dir("foreign");
    io::write_text(dir.path / "precious.txt", "keep");
    CHECK_THROWS(StagedRun(dir.path, "test"));
    CHECK(fs::exists(dir.path / "precious.txt"));
    CHECK_THROWS(StagedRun(dir.path / "precious.txt", "test"));
    CHECK_THROWS(StagedRun(fs::path{}, "test"));
  }

  TEST_CASE("atomic text write") {
    TempDir dir("atomic");
    write_text_atomic(dir.path / "f.txt", "one");
    write_text_atomic(dir.path / "f.txt", "two");
    CHECK(io::read_text(dir.path / "f.txt") == "two");
    int files = 0;
    for (const auto& e : fs::directory_iterator(dir.path)) files += e.is_regular_file();
    CHECK(files == 1);
    CHECK(utc_now().size() == 20);
  }
}

TEST_SUITE("pipeline") {
  TEST_CASE("truth scores 100 against itself") {
    std::vector<Sample> samples;
    std::vector<LabelMap> maps;
    for (int i = 0; i < 3; ++i) {
      samples.push_back(synth::generate_sample(small_spec(), static_cast<std::uint64_t>(i), "s"));
      maps.push_back(*samples.back().truth);
    }
    const auto m = score_against_truth(samples, maps);
    CHECK(*m.mean_iou == 100.0);
    maps.pop_back();
    CHECK_THROWS(score_against_truth(samples, maps));
  }

  TEST_CASE("ensemble, refinement and downstream comparison run end to end") {
    std::vector<Sample> samples;
    for (int i = 0; i < 6; ++i) {
      samples.push_back(synth::generate_sample(small_spec(), static_cast<std::uint64_t>(i), "s" + std::to_string(i)));
    }
    const std::vector<Sample> tr(samples.begin(), samples.begin() + 4);
    const std::vector<Sample> va{samples[4]}, te{samples[5]};
    const auto cfg = tiny_config();
    int callbacks = 0;
    const auto ens = train_ensemble(tr, va, cfg, [&](int, int, double, std::optional<double>) { ++callbacks; });
    CHECK(callbacks == 2);
    CHECK(ens.h1.report.stage == 1);
    CHECK(ens.h2.report.stage == 2);
    const auto rtr = refine_all(ens.h2.params, tr, 16, 16);
    REQUIRE(rtr.size() == tr.size());
    CHECK(rtr[0].width() == 32);
    auto dcfg = tiny_config();
    dcfg.arch.pl_channels = 0;
    const auto down = compare_downstream(tr, rtr, va, refine_all(ens.h2.params, va, 16, 16), te,
                                         refine_all(ens.h2.params, te, 16, 16), dcfg);
    REQUIRE(down.reports.size() == 8);
    CHECK(down.reports[0].model == kManualModel);
    CHECK(down.reports[4].model == kEnsembleModel);
    CHECK(down.reports[3].variant == "truth");
    CHECK_FALSE(down.manual_model.params.arch().has_pl_encoder());
  }
}
