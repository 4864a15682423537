#include "soilref/app/dataset.hpp"

#include <fmt/format.h>

#include <stdexcept>

#include "soilref/app/config.hpp"
#include "soilref/core/io.hpp"

namespace soilref::app {

namespace {

std::string sample_id(int i) { return fmt::format("s{:04d}", i); }

nlohmann::json presence_names(const LabelMap& map) {
  const int key = eval::presence_key(map);
  nlohmann::json out = nlohmann::json::array();
  for (int c = 1; c <= 3; ++c) {
    if (key & (1 << (c - 1))) out.push_back(class_name(c));
  }
  return out;
}

}  // namespace

std::vector<Sample> Dataset::select(eval::Split s) const {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (splits[i] == s) out.push_back(samples[i]);
  }
  return out;
}

std::vector<std::string> Dataset::ids(eval::Split s) const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (splits[i] == s) out.push_back(samples[i].id);
  }
  return out;
}

void write_dataset(const fs::path& dir, const synth::SceneSpec& spec, int n, const eval::SplitRatios& ratios) {
  if (n < 1) throw std::invalid_argument("sample count must be positive");
  spec.validate();
  std::vector<Sample> samples;
  std::vector<int> keys;
  for (int i = 0; i < n; ++i) {
    samples.push_back(synth::generate_sample(spec, static_cast<std::uint64_t>(i), sample_id(i)));
    // Stratify on the annotation a real dataset would have: the manual one.
    keys.push_back(eval::presence_key(samples.back().pls[0]));
  }
  const auto splits = eval::stratified_split(keys, spec.seed, ratios);

  nlohmann::json items = nlohmann::json::array();
  nlohmann::json split_ids = {{"train", nlohmann::json::array()},
                              {"val", nlohmann::json::array()},
                              {"test", nlohmann::json::array()}};
  for (int i = 0; i < n; ++i) {
    const Sample& s = samples[i];
    nlohmann::json item;
    nlohmann::json hashes = nlohmann::json::object();
    auto put = [&](const std::string& rel, const std::vector<std::uint8_t>& bytes) {
      io::write_file(dir / rel, bytes);
      hashes[rel] = io::sha256_hex(bytes);
    };
    const std::string img = "images/" + s.id + ".ppm";
    const std::string truth = "truth/" + s.id + ".pgm";
    put(img, io::encode_ppm(s.image));
    put(truth, io::encode_pgm(*s.truth));
    nlohmann::json pls = nlohmann::json::array();
    for (int q = 0; q < kNumPseudoLabels; ++q) {
      const std::string rel = fmt::format("pl/{}_pl{}.pgm", s.id, q + 1);
      put(rel, io::encode_pgm(s.pls[q]));
      pls.push_back(rel);
    }
    item["id"] = s.id;
    item["index"] = i;
    item["split"] = eval::split_name(splits[i]);
    item["image"] = img;
    item["truth"] = truth;
    item["manual"] = pls[0];
    item["pls"] = pls;
    item["presence_manual"] = presence_names(s.pls[0]);
    item["presence_truth"] = presence_names(*s.truth);
    item["sha256"] = hashes;
    items.push_back(item);
    split_ids[eval::split_name(splits[i])].push_back(s.id);
  }
  nlohmann::json manifest;
  manifest["format"] = "soilref-dataset";
  manifest["version"] = 1;
  manifest["generator"] = to_json(spec);
  manifest["count"] = n;
  manifest["pl_provenance"] = synth::pl_provenance();
  manifest["split_ratios"] = ratios;
  manifest["samples"] = items;
  io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");

  nlohmann::json split;
  split["seed"] = spec.seed;
  split["ratios"] = ratios;
  split["stratified_on"] = "presence of soiling classes in the manual annotation";
  split["counts"] = {{"train", split_ids["train"].size()},
                     {"val", split_ids["val"].size()},
                     {"test", split_ids["test"].size()}};
  split["ids"] = split_ids;
  io::write_text(dir / "split.json", split.dump(2) + "\n");
}

Dataset load_dataset(const fs::path& dir, bool verify) {
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) throw std::runtime_error("dataset manifest not found: " + mpath.string());
  Dataset ds;
  ds.root = dir;
  ds.manifest = nlohmann::json::parse(io::read_text(mpath));
  if (ds.manifest.value("format", "") != "soilref-dataset") {
    throw std::runtime_error("not a dataset manifest: " + mpath.string());
  }
  PseudoLabelStack::Provenance prov = ds.manifest.at("pl_provenance").get<PseudoLabelStack::Provenance>();
  for (const auto& item : ds.manifest.at("samples")) {
    const std::string id = item.at("id").get<std::string>();
    if (!item.contains("split")) throw std::runtime_error("sample " + id + " has no split assignment");
    auto load = [&](const std::string& rel) {
      auto bytes = io::read_file(dir / rel);
      if (verify) {
        const auto& hashes = item.at("sha256");
        if (!hashes.contains(rel) || hashes[rel].get<std::string>() != io::sha256_hex(bytes)) {
          throw std::runtime_error("hash mismatch for " + (dir / rel).string());
        }
      }
      return bytes;
    };
    Sample s;
    s.id = id;
    s.image = io::decode_ppm(load(item.at("image")));
    if (item.contains("truth") && !item["truth"].is_null()) {
      s.truth = io::decode_pgm(load(item["truth"]));
    }
    PseudoLabelStack::Maps maps;
    const auto& pls = item.at("pls");
    if (pls.size() != kNumPseudoLabels) {
      throw std::runtime_error(fmt::format("sample {} lists {} pseudo-labels, expected {}", id, pls.size(),
                                           kNumPseudoLabels));
    }
    for (int q = 0; q < kNumPseudoLabels; ++q) maps[q] = io::decode_pgm(load(pls[q]));
    s.pls = PseudoLabelStack(std::move(maps), prov);
    s.validate();
    ds.samples.push_back(std::move(s));
    ds.splits.push_back(eval::split_from_name(item["split"].get<std::string>()));
  }
  return ds;
}

std::map<std::string, LabelMap> load_label_dir(const fs::path& dir, const std::vector<std::string>& ids) {
  std::map<std::string, LabelMap> out;
  std::vector<std::string> missing;
  for (const auto& id : ids) {
    const fs::path p = dir / (id + ".pgm");
    if (!fs::exists(p)) {
      missing.push_back(id);
      continue;
    }
    out[id] = io::load_pgm(p);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw std::runtime_error(fmt::format("missing refined maps in {} for: {}", dir.string(), list));
  }
  return out;
}

}  // namespace soilref::app
