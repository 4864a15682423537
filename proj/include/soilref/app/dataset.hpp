#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "soilref/core/types.hpp"
#include "soilref/eval/split.hpp"
#include "soilref/synth/synth.hpp"

namespace soilref::app {

namespace fs = std::filesystem;

/// On-disk layout of a dataset directory:
///
///   manifest.json   samples, file paths, hashes, split, provenance
///   split.json      ids per split plus the split seed
///   images/<id>.ppm  truth/<id>.pgm  pl/<id>_pl<q>.pgm (q = 1..9)
struct Dataset {
  fs::path root;
  nlohmann::json manifest;
  std::vector<Sample> samples;
  std::vector<eval::Split> splits;

  std::vector<Sample> select(eval::Split s) const;
  std::vector<std::string> ids(eval::Split s) const;
};

/// Generates n samples and their stratified split into `dir` (which must
/// exist and be empty). The manifest carries no timestamps, so equal inputs
/// give byte-identical files.
void write_dataset(const fs::path& dir, const synth::SceneSpec& spec, int n,
                   const eval::SplitRatios& ratios = eval::kDefaultRatios);

/// Reads a dataset; when verify is set every file hash is checked.
Dataset load_dataset(const fs::path& dir, bool verify = true);

/// Reads <dir>/<id>.pgm for every id; throws listing all missing ids.
std::map<std::string, LabelMap> load_label_dir(const fs::path& dir, const std::vector<std::string>& ids);

}  // namespace soilref::app
