#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "soilref/core/types.hpp"

namespace soilref::app {

namespace fs = std::filesystem;

/// Original colors where the map is clean; elsewhere a 50 % blend with
/// green (transparent), blue (semi-transparent) or red (opaque).
Image overlay(const Image& image, const LabelMap& map);

struct ReviewSource {
  std::string id;
  Image image;
  LabelMap manual;
  LabelMap refined;
};

struct ExportOptions {
  double fraction = 0.2;
  std::vector<std::string> reviewers{"r1"};
  std::uint64_t seed = 1;
};

/// Items picked from the candidate ids: round(fraction * n), seeded.
std::vector<std::size_t> pick_review_items(std::size_t n, double fraction, std::uint64_t seed);

/// Writes the public bundle (manifest.json + assets/*.bmp) into bundle_dir
/// and returns the secret key, which records per item whether A or B is the
/// manual annotation. Every reviewer sees the same samples, blinded
/// independently; item ids are "<reviewer>-<sample id>".
nlohmann::json write_review_bundle(const fs::path& bundle_dir, const std::vector<ReviewSource>& items,
                                   const ExportOptions& opt);

struct Decision {
  std::string item_id;
  std::string reviewer_id;
  std::string choice;  // A | B | similar
  std::string timestamp;
};

/// Parses one JSON-lines results file. Throws with file:line on malformed
/// records or a choice outside {A, B, similar}.
std::vector<Decision> read_decisions(const fs::path& path);

struct ReviewRow {
  std::string reviewer;
  std::size_t items = 0;
  double manual_better = 0.0;    // percent
  double ensemble_better = 0.0;  // percent
  double similar = 0.0;          // percent
};

struct ReviewSummary {
  std::vector<ReviewRow> rows;  // one per reviewer with decisions
  ReviewRow average;            // unweighted mean of the reviewer rows
  std::size_t duplicates = 0;   // superseded repeat decisions
  std::size_t undecided = 0;    // key items without a decision
};

/// Unblinds decisions with the key. Unknown items and items answered by a
/// different reviewer are errors; a repeated decision replaces the earlier.
ReviewSummary summarize_review(const nlohmann::json& key, const std::vector<Decision>& decisions);

nlohmann::json to_json(const ReviewSummary& s);
std::string render_review_table(const ReviewSummary& s);

}  // namespace soilref::app
