#include "soilref/app/review.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include "soilref/core/io.hpp"
#include "soilref/core/rng.hpp"

namespace soilref::app {

namespace {

constexpr double kOverlayAlpha = 0.5;
constexpr std::uint64_t kPickStream = 0x5245564945570001ull;
constexpr std::uint64_t kBlindStream = 0x5245564945570100ull;

constexpr std::array<std::array<double, 3>, kNumClasses> kTint{{
    {0.0, 0.0, 0.0},
    {0.0, 1.0, 0.0},
    {0.0, 0.0, 1.0},
    {1.0, 0.0, 0.0},
}};

}  // namespace

Image overlay(const Image& image, const LabelMap& map) {
  if (!map.same_shape(image)) throw ShapeError("overlay: map and image differ in size");
  Image out = image;
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const int c = map.at(y, x);
      if (c == 0 || c == kIgnore) continue;
      for (int ch = 0; ch < 3; ++ch) {
        out.set(y, x, ch, (1.0 - kOverlayAlpha) * image.at(y, x, ch) + kOverlayAlpha * kTint[c][ch]);
      }
    }
  }
  return out;
}

std::vector<std::size_t> pick_review_items(std::size_t n, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("review fraction must lie in (0, 1]");
  const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(seed, kPickStream));
  shuffle(idx.begin(), idx.end(), rng);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

nlohmann::json write_review_bundle(const fs::path& bundle_dir, const std::vector<ReviewSource>& items,
                                   const ExportOptions& opt) {
  if (opt.reviewers.empty()) throw std::invalid_argument("at least one reviewer id is required");
  std::set<std::string> seen;
  for (const auto& r : opt.reviewers) {
    if (r.empty() || !seen.insert(r).second) throw std::invalid_argument("reviewer ids must be unique and non-empty");
  }
  nlohmann::json pub_items = nlohmann::json::array();
  nlohmann::json key_items = nlohmann::json::object();
  for (const auto& it : items) {
    const std::string orig = "assets/" + it.id + "_original.bmp";
    io::save_bmp(bundle_dir / orig, it.image);
  }
  for (std::size_t r = 0; r < opt.reviewers.size(); ++r) {
    const std::string& reviewer = opt.reviewers[r];
    Rng rng(derive_seed(opt.seed, kBlindStream + r));
    for (const auto& it : items) {
      const std::string item_id = reviewer + "-" + it.id;
      const bool manual_is_a = rng.bernoulli(0.5);
      const Image manual = overlay(it.image, it.manual);
      const Image refined = overlay(it.image, it.refined);
      const std::string a = "assets/" + item_id + "_A.bmp";
      const std::string b = "assets/" + item_id + "_B.bmp";
      io::save_bmp(bundle_dir / a, manual_is_a ? manual : refined);
      io::save_bmp(bundle_dir / b, manual_is_a ? refined : manual);
      pub_items.push_back({{"item_id", item_id},
                           {"reviewer_id", reviewer},
                           {"sample_id", it.id},
                           {"original", "assets/" + it.id + "_original.bmp"},
                           {"overlay_a", a},
                           {"overlay_b", b},
                           {"width", it.image.width()},
                           {"height", it.image.height()}});
      key_items[item_id] = {{"reviewer_id", reviewer},
                            {"sample_id", it.id},
                            {"A", manual_is_a ? "manual" : "ensemble"},
                            {"B", manual_is_a ? "ensemble" : "manual"}};
    }
  }
  nlohmann::json manifest;
  manifest["format"] = "soilref-review-bundle";
  manifest["version"] = 1;
  manifest["choices"] = {"A", "B", "similar"};
  manifest["legend"] = {{"transparent", "green"}, {"semi_transparent", "blue"}, {"opaque", "red"}, {"clean", "none"}};
  manifest["reviewers"] = opt.reviewers;
  manifest["items"] = pub_items;
  io::write_text(bundle_dir / "manifest.json", manifest.dump(2) + "\n");

  nlohmann::json key;
  key["format"] = "soilref-review-key";
  key["version"] = 1;
  key["seed"] = opt.seed;
  key["reviewers"] = opt.reviewers;
  key["manifest_sha256"] = io::sha256_file(bundle_dir / "manifest.json");
  key["items"] = key_items;
  return key;
}

std::vector<Decision> read_decisions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open results file " + path.string());
  std::vector<Decision> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = fmt::format("{}:{}", path.string(), lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error(where + ": invalid JSON (" + e.what() + ")");
    }
    Decision d;
    for (const char* field : {"item_id", "reviewer_id", "choice", "timestamp"}) {
      if (!j.contains(field) || !j[field].is_string()) {
        throw std::runtime_error(fmt::format("{}: missing string field '{}'", where, field));
      }
    }
    d.item_id = j["item_id"];
    d.reviewer_id = j["reviewer_id"];
    d.choice = j["choice"];
    d.timestamp = j["timestamp"];
    if (d.choice != "A" && d.choice != "B" && d.choice != "similar") {
      throw std::runtime_error(fmt::format("{}: choice '{}' is not one of A, B, similar", where, d.choice));
    }
    out.push_back(std::move(d));
  }
  return out;
}

ReviewSummary summarize_review(const nlohmann::json& key, const std::vector<Decision>& decisions) {
  if (key.value("format", "") != "soilref-review-key") throw std::runtime_error("not a review key file");
  const auto& items = key.at("items");
  std::map<std::string, std::string> final_choice;  // item -> choice
  ReviewSummary s;
  for (const auto& d : decisions) {
    if (!items.contains(d.item_id)) throw std::runtime_error("unknown review item '" + d.item_id + "'");
    const std::string owner = items[d.item_id].at("reviewer_id");
    if (owner != d.reviewer_id) {
      throw std::runtime_error(fmt::format("item '{}' belongs to reviewer '{}', not '{}'", d.item_id, owner,
                                           d.reviewer_id));
    }
    if (final_choice.contains(d.item_id)) ++s.duplicates;
    final_choice[d.item_id] = d.choice;
  }
  std::map<std::string, std::array<std::size_t, 3>> counts;  // manual, ensemble, similar
  for (const auto& [item, choice] : final_choice) {
    const auto& k = items[item];
    auto& c = counts[k.at("reviewer_id").get<std::string>()];
    if (choice == "similar") {
      ++c[2];
    } else {
      const std::string source = k.at(choice);
      ++c[source == "manual" ? 0 : 1];
    }
  }
  s.undecided = items.size() - final_choice.size();
  for (const auto& r : key.at("reviewers")) {
    const std::string id = r;
    auto it = counts.find(id);
    if (it == counts.end()) continue;
    const auto& c = it->second;
    const double n = static_cast<double>(c[0] + c[1] + c[2]);
    s.rows.push_back({id, c[0] + c[1] + c[2], 100.0 * c[0] / n, 100.0 * c[1] / n, 100.0 * c[2] / n});
  }
  s.average.reviewer = "Average";
  if (!s.rows.empty()) {
    for (const auto& row : s.rows) {
      s.average.items += row.items;
      s.average.manual_better += row.manual_better;
      s.average.ensemble_better += row.ensemble_better;
      s.average.similar += row.similar;
    }
    const double k = static_cast<double>(s.rows.size());
    s.average.manual_better /= k;
    s.average.ensemble_better /= k;
    s.average.similar /= k;
  }
  return s;
}

nlohmann::json to_json(const ReviewSummary& s) {
  auto row = [](const ReviewRow& r) {
    return nlohmann::json{{"reviewer", r.reviewer},
                          {"items", r.items},
                          {"manual_better", r.manual_better},
                          {"ensemble_better", r.ensemble_better},
                          {"similar", r.similar}};
  };
  nlohmann::json j;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : s.rows) j["rows"].push_back(row(r));
  j["average"] = row(s.average);
  j["superseded_decisions"] = s.duplicates;
  j["undecided_items"] = s.undecided;
  return j;
}

std::string render_review_table(const ReviewSummary& s) {
  std::string out = fmt::format("{:<12} {:>6} {:>14} {:>16} {:>10}\n", "reviewer", "items", "manual better",
                                "ensemble better", "similar");
  auto line = [](const ReviewRow& r) {
    return fmt::format("{:<12} {:>6} {:>13.1f}% {:>15.1f}% {:>9.1f}%\n", r.reviewer, r.items, r.manual_better,
                       r.ensemble_better, r.similar);
  };
  for (const auto& r : s.rows) out += line(r);
  out += line(s.average);
  return out;
}

}  // namespace soilref::app
