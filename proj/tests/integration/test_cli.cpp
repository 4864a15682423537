#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "soilref/core/io.hpp"

namespace fs = std::filesystem;
using namespace soilref;

namespace {

struct Result {
  int code = -1;
  std::string output;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(SOILREF_CLI) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  while (fgets(buf.data(), buf.size(), pipe)) r.output += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("soilref_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& rel) const { return (path / rel).string(); }
};

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(io::read_text(p)); }

}  // namespace

TEST_CASE("usage errors exit with status 2") {
  CHECK(run("").code == 2);
  CHECK(run("frobnicate").code == 2);
  CHECK(run("gen --n 0 --out /tmp/soilref_cli_never").code == 2);
  CHECK(run("train --out /tmp/soilref_cli_never").code == 2);
  CHECK(run("--help").code == 0);
}

TEST_CASE("gen is reproducible and splits 6:2:2") {
  TempDir dir("gen");
  const auto a = run("gen --n 20 --height 32 --width 32 --seed 4 --quiet --out " + dir / "a");
  REQUIRE(a.code == 0);
  REQUIRE(run("gen --n 20 --height 32 --width 32 --seed 4 --quiet --out " + dir / "b").code == 0);
  CHECK(io::read_file(dir.path / "a/manifest.json") == io::read_file(dir.path / "b/manifest.json"));
  CHECK(io::read_file(dir.path / "a/split.json") == io::read_file(dir.path / "b/split.json"));
  CHECK(read_json(dir.path / "a/run.json")["outputs"] == read_json(dir.path / "b/run.json")["outputs"]);
  REQUIRE(run("gen --n 20 --height 32 --width 32 --seed 5 --quiet --out " + dir / "c").code == 0);
  CHECK(io::read_file(dir.path / "a/manifest.json") != io::read_file(dir.path / "c/manifest.json"));

  REQUIRE(run("gen --n 500 --seed 1 --quiet --out " + dir / "full").code == 0);
  const auto split = read_json(dir.path / "full/split.json");
  CHECK(split["counts"]["train"] == 300);
  CHECK(split["counts"]["val"] == 100);
  CHECK(split["counts"]["test"] == 100);
  const auto manifest = read_json(dir.path / "full/manifest.json");
  REQUIRE(manifest["samples"].size() == 500);
  const auto first = manifest["samples"][0];
  CHECK(first["pls"].size() == 9);
  CHECK(fs::exists(dir.path / "full" / first["image"].get<std::string>()));

  // A non-empty foreign directory is never overwritten.
  io::write_text(dir.path / "foreign/keep.txt", "x");
  const auto refused = run("gen --n 20 --quiet --out " + dir / "foreign");
  CHECK(refused.code == 1);
  CHECK(fs::exists(dir.path / "foreign/keep.txt"));
}

TEST_CASE("train, refine, eval, report and review round trip") {
  TempDir dir("pipe");
  REQUIRE(run("gen --n 12 --height 32 --width 32 --seed 2 --quiet --out " + dir / "data").code == 0);
  const std::string small = " --epochs 1 --steps 2 --batch 2 --quiet";
  const auto tr = run("train --data " + dir / "data" + " --crop 16" + small + " --out " + dir / "train");
  REQUIRE_MESSAGE(tr.code == 0, tr.output);
  for (const char* f : {"h1.ckpt", "h2.ckpt", "config.json", "metrics_stage1.csv", "metrics_stage2.csv",
                        "pl_histogram.csv", "run.json"}) {
    CHECK_MESSAGE(fs::exists(dir.path / "train" / f), f);
  }
  const auto run_json = read_json(dir.path / "train/run.json");
  CHECK(run_json["outputs"].contains("h2.ckpt"));

  const auto rf = run("refine --data " + dir / "data" + " --checkpoint " + dir / "train" +
                      " --split all --quiet --out " + dir / "refined");
  REQUIRE_MESSAGE(rf.code == 0, rf.output);
  int pgms = 0;
  for (const auto& e : fs::directory_iterator(dir.path / "refined")) {
    if (e.path().extension() != ".pgm") continue;
    ++pgms;
    const auto m = io::load_pgm(e.path());
    CHECK(m.width() == 32);
    CHECK(m.height() == 32);
  }
  CHECK(pgms == 12);

  const auto ev = run("eval --data " + dir / "data" + " --refined " + dir / "refined" +
                      " --epochs 1 --steps 2 --quiet --out " + dir / "eval");
  REQUIRE_MESSAGE(ev.code == 0, ev.output);
  const auto reports = read_json(dir.path / "eval/reports.json")["reports"];
  REQUIRE(reports.size() == 8);
  int truth = 0;
  for (const auto& r : reports) truth += r["variant"] == "truth";
  CHECK(truth == 2);
  CHECK(ev.output.find("manual-trained") != std::string::npos);
  const auto rep = run("report --in " + dir / "eval");
  CHECK(rep.code == 0);
  CHECK(rep.output == io::read_text(dir.path / "eval/table.txt"));

  const auto ex = run("export-review --data " + dir / "data" + " --refined " + dir / "refined" +
                      " --fraction 1 --reviewers alice,bob --seed 3 --quiet --out " + dir / "bundle");
  REQUIRE_MESSAGE(ex.code == 0, ex.output);
  const auto manifest = read_json(dir.path / "bundle/manifest.json");
  const auto key = read_json(dir.path / "bundle.key.json");
  REQUIRE(manifest["items"].size() == 4);  // 2 test samples x 2 reviewers
  for (const auto& it : manifest["items"]) {
    for (const char* f : {"original", "overlay_a", "overlay_b"}) {
      CHECK(fs::exists(dir.path / "bundle" / it[f].get<std::string>()));
    }
  }
  // alice prefers the refined overlay on both items; bob picks manual then similar.
  std::ofstream alice(dir.path / "alice.jsonl"), bob(dir.path / "bob.jsonl");
  int bob_seen = 0;
  for (const auto& it : manifest["items"]) {
    const std::string id = it["item_id"];
    const std::string reviewer = it["reviewer_id"];
    const auto& k = key["items"][id];
    nlohmann::json rec{{"item_id", id}, {"reviewer_id", reviewer}, {"timestamp", "2024-01-01T00:00:00Z"}};
    if (reviewer == "alice") {
      rec["choice"] = k["A"] == "ensemble" ? "A" : "B";
      alice << rec.dump() << "\n";
    } else {
      rec["choice"] = bob_seen++ == 0 ? (k["A"] == "manual" ? "A" : "B") : "similar";
      bob << rec.dump() << "\n";
    }
  }
  alice.close();
  bob.close();
  const auto im = run("import-review --key " + dir / "bundle.key.json" + " " + dir / "alice.jsonl" + " " +
                      dir / "bob.jsonl" + " --quiet --out " + dir / "review");
  REQUIRE_MESSAGE(im.code == 0, im.output);
  const auto summary = read_json(dir.path / "review/review_report.json");
  REQUIRE(summary["rows"].size() == 2);
  CHECK(summary["rows"][0]["reviewer"] == "alice");
  CHECK(summary["rows"][0]["ensemble_better"] == 100.0);
  CHECK(summary["rows"][1]["manual_better"] == 50.0);
  CHECK(summary["rows"][1]["similar"] == 50.0);
  CHECK(summary["average"]["manual_better"] == 25.0);
  CHECK(summary["average"]["ensemble_better"] == 50.0);
  CHECK(summary["average"]["similar"] == 25.0);
  CHECK(run("report --in " + dir / "review").output == io::read_text(dir.path / "review/table.txt"));

  std::ofstream(dir.path / "bad.jsonl") << R"({"item_id":"alice-x","reviewer_id":"alice","choice":"A","timestamp":"t"})"
                                        << "\n";
  CHECK(run("import-review --key " + dir / "bundle.key.json" + " " + dir / "bad.jsonl" + " --quiet").code == 1);
}

TEST_CASE("missing inputs are reported") {
  TempDir dir("missing");
  REQUIRE(run("gen --n 10 --height 32 --width 32 --quiet --out " + dir / "data").code == 0);
  const auto r = run("refine --data " + dir / "data" + " --checkpoint " + dir / "nope.ckpt" + " --quiet --out " +
                     dir / "out");
  CHECK(r.code == 1);
  CHECK(r.output.find("checkpoint not found") != std::string::npos);
  CHECK_FALSE(fs::exists(dir.path / "out"));
  CHECK(run("train --data " + dir / "absent" + " --quiet --out " + dir / "t").code == 2);
}
