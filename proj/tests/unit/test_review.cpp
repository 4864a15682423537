#include <doctest.h>

#include <fstream>

#include "oracles.hpp"
#include "soilref/app/review.hpp"
#include "soilref/core/io.hpp"

using namespace soilref;
using namespace soilref::app;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("soilref_review_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<ReviewSource> sources(int n, std::uint64_t seed) {
  oracle::TestRng r(seed);
  std::vector<ReviewSource> out;
  for (int i = 0; i < n; ++i) {
    out.push_back({"s" + std::to_string(i), oracle::random_image(r, 8, 8), oracle::random_map(r, 8, 8),
                   oracle::random_map(r, 8, 8)});
  }
  return out;
}

// Letter under which the key shows the wanted source for an item.
std::string letter_for(const nlohmann::json& key, const std::string& item, const std::string& source) {
  return key["items"][item]["A"] == source ? "A" : "B";
}

Decision decide(const nlohmann::json& key, const std::string& reviewer, const std::string& sample,
                const std::string& want) {
  const std::string item = reviewer + "-" + sample;
  const std::string choice = want == "similar" ? "similar" : letter_for(key, item, want);
  return {item, reviewer, choice, "2024-01-01T00:00:00Z"};
}

void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
  std::ofstream out(p);
  for (const auto& l : lines) out << l << "\n";
}

}  // namespace

TEST_SUITE("overlay") {
  TEST_CASE("clean map leaves the image unchanged") {
    oracle::TestRng r(1);
    const auto img = oracle::random_image(r, 6, 5);
    CHECK(overlay(img, LabelMap(6, 5, 0)) == img);
    CHECK(overlay(img, LabelMap(6, 5, kIgnore)) == img);
  }

  TEST_CASE("soiled pixels blend with the class tint") {
    const Image img(1, 1, {0.2, 0.4, 0.6});
    const auto o = overlay(img, LabelMap(1, 1, 3));
    CHECK(o.at(0, 0, 0) == doctest::Approx(0.6));
    CHECK(o.at(0, 0, 1) == doctest::Approx(0.2));
    CHECK(o.at(0, 0, 2) == doctest::Approx(0.3));
    const auto g = overlay(img, LabelMap(1, 1, 1));
    CHECK(g.at(0, 0, 1) == doctest::Approx(0.7));
    CHECK_THROWS_AS(overlay(img, LabelMap(2, 1, 0)), ShapeError);
  }
}

TEST_SUITE("bundle") {
  TEST_CASE("manifest, assets and key agree") {
    TempDir dir("bundle");
    const auto items = sources(4, 2);
    ExportOptions opt;
    opt.reviewers = {"alice", "bob"};
    opt.seed = 5;
    const auto key = write_review_bundle(dir.path, items, opt);
    const auto manifest = nlohmann::json::parse(io::read_text(dir.path / "manifest.json"));
    CHECK(manifest["format"] == "soilref-review-bundle");
    CHECK(manifest["choices"] == nlohmann::json({"A", "B", "similar"}));
    REQUIRE(manifest["items"].size() == 8);
    CHECK(key["manifest_sha256"] == io::sha256_file(dir.path / "manifest.json"));
    CHECK(key["items"].size() == 8);
    for (const auto& it : manifest["items"]) {
      const std::string id = it["item_id"];
      REQUIRE(key["items"].contains(id));
      CHECK(id == it["reviewer_id"].get<std::string>() + "-" + it["sample_id"].get<std::string>());
      // The manifest itself reveals nothing about which side is manual.
      CHECK_FALSE(it.contains("A"));
      const auto& k = key["items"][id];
      CHECK(k["A"] != k["B"]);
      const auto& src = items[std::stoi(it["sample_id"].get<std::string>().substr(1))];
      const Image a = io::decode_bmp(io::read_file(dir.path / it["overlay_a"].get<std::string>()));
      const Image b = io::decode_bmp(io::read_file(dir.path / it["overlay_b"].get<std::string>()));
      const Image orig = io::decode_bmp(io::read_file(dir.path / it["original"].get<std::string>()));
      const auto quantized = [](const Image& im) { return io::decode_bmp(io::encode_bmp(im)); };
      CHECK(orig == quantized(src.image));
      const Image manual = quantized(overlay(src.image, src.manual));
      const Image refined = quantized(overlay(src.image, src.refined));
      CHECK((k["A"] == "manual" ? a : b) == manual);
      CHECK((k["A"] == "manual" ? b : a) == refined);
    }
  }

  TEST_CASE("export is deterministic in the seed") {
    TempDir d1("det1"), d2("det2");
    const auto items = sources(6, 3);
    ExportOptions opt;
    opt.reviewers = {"r1", "r2"};
    const auto k1 = write_review_bundle(d1.path, items, opt);
    const auto k2 = write_review_bundle(d2.path, items, opt);
    CHECK(k1 == k2);
    CHECK(io::read_file(d1.path / "manifest.json") == io::read_file(d2.path / "manifest.json"));
  }

  TEST_CASE("A/B sides are balanced") {
    TempDir dir("balance");
    const auto items = sources(200, 4);
    const auto key = write_review_bundle(dir.path, items, ExportOptions{});
    int manual_a = 0;
    for (const auto& [id, k] : key["items"].items()) manual_a += k["A"] == "manual";
    // Binomial(200, 1/2): 5 sigma is about 35.
    CHECK(std::abs(manual_a - 100) <= 35);
  }

  TEST_CASE("reviewer ids are validated") {
    TempDir dir("ids");
    ExportOptions opt;
    opt.reviewers = {};
    CHECK_THROWS(write_review_bundle(dir.path, sources(1, 5), opt));
    opt.reviewers = {"x", "x"};
    CHECK_THROWS(write_review_bundle(dir.path, sources(1, 5), opt));
  }

  TEST_CASE("item picking") {
    const auto p = pick_review_items(100, 0.2, 7);
    CHECK(p.size() == 20);
    CHECK(std::is_sorted(p.begin(), p.end()));
    CHECK(std::adjacent_find(p.begin(), p.end()) == p.end());
    CHECK(p.back() < 100);
    CHECK(p == pick_review_items(100, 0.2, 7));
    CHECK(p != pick_review_items(100, 0.2, 8));
    CHECK(pick_review_items(7, 1.0, 1).size() == 7);
    CHECK_THROWS(pick_review_items(10, 0.0, 1));
    CHECK_THROWS(pick_review_items(10, 1.5, 1));
  }
}

TEST_SUITE("results") {
  TEST_CASE("scripted choices reproduce the expected table") {
    TempDir dir("table");
    const auto items = sources(10, 6);
    const auto key = write_review_bundle(dir.path, items, ExportOptions{});
    // 1 manual, 5 ensemble, 4 similar.
    const std::vector<std::string> want{"manual", "ensemble", "ensemble", "ensemble", "ensemble",
                                        "ensemble", "similar", "similar", "similar", "similar"};
    std::vector<Decision> ds;
    for (int i = 0; i < 10; ++i) ds.push_back(decide(key, "r1", items[i].id, want[i]));
    const auto s = summarize_review(key, ds);
    REQUIRE(s.rows.size() == 1);
    CHECK(s.rows[0].reviewer == "r1");
    CHECK(s.rows[0].items == 10);
    CHECK(s.rows[0].manual_better == doctest::Approx(10.0));
    CHECK(s.rows[0].ensemble_better == doctest::Approx(50.0));
    CHECK(s.rows[0].similar == doctest::Approx(40.0));
    CHECK(s.average.manual_better == doctest::Approx(10.0));
    CHECK(s.undecided == 0);
    const auto table = render_review_table(s);
    CHECK(table.find("r1") != std::string::npos);
    CHECK(table.find("10.0%") != std::string::npos);
    CHECK(table.find("50.0%") != std::string::npos);
    CHECK(table.find("40.0%") != std::string::npos);
    CHECK(table.find("Average") != std::string::npos);
  }

  TEST_CASE("all similar") {
    TempDir dir("similar");
    const auto items = sources(5, 7);
    const auto key = write_review_bundle(dir.path, items, ExportOptions{});
    std::vector<Decision> ds;
    for (const auto& it : items) ds.push_back(decide(key, "r1", it.id, "similar"));
    const auto s = summarize_review(key, ds);
    CHECK(s.rows[0].manual_better == 0.0);
    CHECK(s.rows[0].ensemble_better == 0.0);
    CHECK(s.rows[0].similar == 100.0);
  }

  TEST_CASE("three reviewers and the unweighted average") {
    TempDir dir("three");
    const auto items = sources(4, 8);
    ExportOptions opt;
    opt.reviewers = {"a", "b", "c"};
    const auto key = write_review_bundle(dir.path, items, opt);
    std::vector<Decision> ds;
    // a: 4 ensemble. b: 2 manual, 2 similar. c: 1 of each on 2 items only, 2 left undecided.
    for (const auto& it : items) ds.push_back(decide(key, "a", it.id, "ensemble"));
    for (int i = 0; i < 4; ++i) ds.push_back(decide(key, "b", items[i].id, i < 2 ? "manual" : "similar"));
    ds.push_back(decide(key, "c", items[0].id, "manual"));
    ds.push_back(decide(key, "c", items[1].id, "ensemble"));
    const auto s = summarize_review(key, ds);
    REQUIRE(s.rows.size() == 3);
    CHECK(s.rows[0].ensemble_better == 100.0);
    CHECK(s.rows[1].manual_better == 50.0);
    CHECK(s.rows[1].similar == 50.0);
    CHECK(s.rows[2].items == 2);
    CHECK(s.rows[2].manual_better == 50.0);
    CHECK(s.rows[2].ensemble_better == 50.0);
    CHECK(s.average.manual_better == doctest::Approx(100.0 / 3));
    CHECK(s.average.ensemble_better == doctest::Approx(50.0));
    CHECK(s.average.similar == doctest::Approx(50.0 / 3));
    CHECK(s.average.items == 10);
    CHECK(s.undecided == 2);
    const auto j = to_json(s);
    CHECK(j["rows"].size() == 3);
    CHECK(j["undecided_items"] == 2);
  }

  TEST_CASE("repeated decisions keep the last one") {
    TempDir dir("dup");
    const auto items = sources(2, 9);
    const auto key = write_review_bundle(dir.path, items, ExportOptions{});
    std::vector<Decision> ds{decide(key, "r1", items[0].id, "manual"), decide(key, "r1", items[1].id, "manual"),
                             decide(key, "r1", items[0].id, "ensemble")};
    const auto s = summarize_review(key, ds);
    CHECK(s.duplicates == 1);
    CHECK(s.rows[0].items == 2);
    CHECK(s.rows[0].manual_better == 50.0);
    CHECK(s.rows[0].ensemble_better == 50.0);
  }

  TEST_CASE("invalid decisions") {
    TempDir dir("bad");
    const auto items = sources(2, 10);
    ExportOptions opt;
    opt.reviewers = {"r1", "r2"};
    const auto key = write_review_bundle(dir.path, items, opt);
    CHECK_THROWS(summarize_review(key, {{"r1-zzz", "r1", "A", "t"}}));
    CHECK_THROWS(summarize_review(key, {{"r1-s0", "r2", "A", "t"}}));
    CHECK_THROWS(summarize_review(nlohmann::json::object(), {}));
  }

  TEST_CASE("json-lines parsing") {
    TempDir dir("jsonl");
    const auto p = dir.path / "results.jsonl";
    write_lines(p, {R"({"item_id":"r1-s0","reviewer_id":"r1","choice":"A","timestamp":"t0"})", "",
                    R"({"item_id":"r1-s1","reviewer_id":"r1","choice":"similar","timestamp":"t1"})"});
    const auto ds = read_decisions(p);
    REQUIRE(ds.size() == 2);
    CHECK(ds[0].item_id == "r1-s0");
    CHECK(ds[1].choice == "similar");
    CHECK(ds[1].timestamp == "t1");

    write_lines(p, {R"({"item_id":"r1-s0","reviewer_id":"r1","choice":"C","timestamp":"t0"})"});
    CHECK_THROWS_WITH_AS(read_decisions(p), doctest::Contains("results.jsonl:1"), std::runtime_error);
    write_lines(p, {R"({"item_id":"r1-s0","reviewer_id":"r1","choice":"A","timestamp":"t"})", "{not json"});
    CHECK_THROWS_WITH_AS(read_decisions(p), doctest::Contains("results.jsonl:2"), std::runtime_error);
    write_lines(p, {R"({"item_id":"r1-s0","choice":"A","timestamp":"t"})"});
    CHECK_THROWS(read_decisions(p));
    CHECK_THROWS(read_decisions(dir.path / "missing.jsonl"));
  }
}
