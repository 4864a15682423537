#pragma once

#include <nlohmann/json.hpp>

#include "soilref/synth/synth.hpp"
#include "soilref/train/trainer.hpp"

namespace soilref::app {

nlohmann::json to_json(const synth::SceneSpec& spec);
/// Missing keys keep the values of `base`; unknown keys are rejected.
synth::SceneSpec scene_spec_from_json(const nlohmann::json& j, synth::SceneSpec base = {});

/// Defaults for the two-stage ensemble network.
train::TrainConfig ensemble_defaults();
/// Defaults for the image-only downstream models compared by `eval`.
train::TrainConfig downstream_defaults();

/// Contents of a --config file: optional "gen", "train" and "eval" sections.
struct ConfigFile {
  nlohmann::json gen = nlohmann::json::object();
  nlohmann::json train = nlohmann::json::object();
  nlohmann::json eval = nlohmann::json::object();
};
ConfigFile load_config_file(const std::filesystem::path& path);

}  // namespace soilref::app
