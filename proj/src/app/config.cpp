#include "soilref/app/config.hpp"

#include <set>
#include <stdexcept>

#include "soilref/core/io.hpp"

namespace soilref::app {

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const char* what) {
  if (!j.is_object()) throw std::invalid_argument(std::string(what) + " must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (!known.contains(k)) throw std::invalid_argument(std::string("unknown ") + what + " key '" + k + "'");
  }
}

nlohmann::json blob_json(const synth::BlobSpec& b) {
  return {{"cls", b.cls},       {"cy", b.cy},         {"cx", b.cx},         {"radius", b.radius},
          {"amp2", b.amp2},     {"amp3", b.amp3},     {"phase2", b.phase2}, {"phase3", b.phase3}};
}

synth::BlobSpec blob_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"cls", "cy", "cx", "radius", "amp2", "amp3", "phase2", "phase3"}, "blob");
  synth::BlobSpec b;
  b.cls = j.value("cls", b.cls);
  b.cy = j.value("cy", b.cy);
  b.cx = j.value("cx", b.cx);
  b.radius = j.value("radius", b.radius);
  b.amp2 = j.value("amp2", b.amp2);
  b.amp3 = j.value("amp3", b.amp3);
  b.phase2 = j.value("phase2", b.phase2);
  b.phase3 = j.value("phase3", b.phase3);
  return b;
}

}  // namespace

nlohmann::json to_json(const synth::SceneSpec& s) {
  nlohmann::json j;
  j["seed"] = s.seed;
  j["height"] = s.height;
  j["width"] = s.width;
  nlohmann::json counts = nlohmann::json::array();
  for (const auto& r : s.blob_count) counts.push_back({r.min, r.max});
  j["blob_count"] = counts;
  j["radius_min"] = s.radius_min;
  j["radius_max"] = s.radius_max;
  j["shape_wobble"] = s.shape_wobble;
  nlohmann::json blobs = nlohmann::json::array();
  for (const auto& b : s.fixed_blobs) blobs.push_back(blob_json(b));
  j["fixed_blobs"] = blobs;
  j["polygon_vertices"] = s.polygon_vertices;
  j["vertex_jitter"] = s.vertex_jitter;
  j["p_conf"] = s.p_conf;
  nlohmann::json morph = nlohmann::json::array();
  for (const auto& m : s.morph) morph.push_back({{"radius", m.radius}, {"boundary_noise", m.boundary_noise}});
  j["morph"] = morph;
  nlohmann::json comp = nlohmann::json::array();
  for (const auto& c : s.component) {
    comp.push_back({{"swap_rate", c.swap_rate}, {"drop_rate", c.drop_rate}, {"boundary_noise", c.boundary_noise}});
  }
  j["component"] = comp;
  return j;
}

synth::SceneSpec scene_spec_from_json(const nlohmann::json& j, synth::SceneSpec s) {
  reject_unknown(j,
                 {"seed", "height", "width", "blob_count", "radius_min", "radius_max", "shape_wobble",
                  "fixed_blobs", "polygon_vertices", "vertex_jitter", "p_conf", "morph", "component", "n"},
                 "scene spec");
  s.seed = j.value("seed", s.seed);
  s.height = j.value("height", s.height);
  s.width = j.value("width", s.width);
  if (j.contains("blob_count")) {
    const auto& c = j["blob_count"];
    if (!c.is_array() || c.size() != 3) throw std::invalid_argument("blob_count needs three [min,max] pairs");
    for (int k = 0; k < 3; ++k) s.blob_count[k] = {c[k].at(0).get<int>(), c[k].at(1).get<int>()};
  }
  s.radius_min = j.value("radius_min", s.radius_min);
  s.radius_max = j.value("radius_max", s.radius_max);
  s.shape_wobble = j.value("shape_wobble", s.shape_wobble);
  if (j.contains("fixed_blobs")) {
    s.fixed_blobs.clear();
    for (const auto& b : j["fixed_blobs"]) s.fixed_blobs.push_back(blob_from_json(b));
  }
  s.polygon_vertices = j.value("polygon_vertices", s.polygon_vertices);
  s.vertex_jitter = j.value("vertex_jitter", s.vertex_jitter);
  s.p_conf = j.value("p_conf", s.p_conf);
  if (j.contains("morph")) {
    const auto& m = j["morph"];
    if (!m.is_array() || m.size() != 3) throw std::invalid_argument("morph needs three entries");
    for (int k = 0; k < 3; ++k) {
      reject_unknown(m[k], {"radius", "boundary_noise"}, "morph");
      s.morph[k].radius = m[k].value("radius", s.morph[k].radius);
      s.morph[k].boundary_noise = m[k].value("boundary_noise", s.morph[k].boundary_noise);
    }
  }
  if (j.contains("component")) {
    const auto& c = j["component"];
    if (!c.is_array() || c.size() != 3) throw std::invalid_argument("component needs three entries");
    for (int k = 0; k < 3; ++k) {
      reject_unknown(c[k], {"swap_rate", "drop_rate", "boundary_noise"}, "component");
      s.component[k].swap_rate = c[k].value("swap_rate", s.component[k].swap_rate);
      s.component[k].drop_rate = c[k].value("drop_rate", s.component[k].drop_rate);
      s.component[k].boundary_noise = c[k].value("boundary_noise", s.component[k].boundary_noise);
    }
  }
  s.validate();
  return s;
}

train::TrainConfig ensemble_defaults() {
  train::TrainConfig c;
  c.batch_size = 8;
  c.max_epochs = 12;
  c.steps_per_epoch = 40;
  c.lr = 0.03;
  c.momentum = 0.9;
  c.cosine_lr = true;
  c.crop_height = 32;
  c.crop_width = 32;
  c.patience = 4;
  return c;
}

train::TrainConfig downstream_defaults() {
  train::TrainConfig c = ensemble_defaults();
  c.steps_per_epoch = 60;
  c.arch.pl_channels = 0;
  c.arch.enc_hidden = 16;
  c.arch.enc_out = 32;
  return c;
}

ConfigFile load_config_file(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  reject_unknown(j, {"gen", "train", "eval"}, "config section");
  ConfigFile c;
  if (j.contains("gen")) c.gen = j["gen"];
  if (j.contains("train")) c.train = j["train"];
  if (j.contains("eval")) c.eval = j["eval"];
  return c;
}

}  // namespace soilref::app
