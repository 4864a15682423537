#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "soilref/nn/network.hpp"

namespace soilref::nn {

/// Binary checkpoint container, little-endian:
///
///   "SOILNET\0" | u32 version | u32 json_len | json header | tensors
///
/// The JSON header holds the architecture descriptor, layer list, seed and
/// free-form metadata. Tensors follow in layer order (weight then bias) as
/// u32 rank, u32 dims[rank], f64 values[]. Serialization is byte-stable.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  NetParams params;
  nlohmann::json metadata = nlohmann::json::object();
};

std::vector<std::uint8_t> serialize(const NetParams& params,
                                    const nlohmann::json& metadata = nlohmann::json::object());
Checkpoint deserialize(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const NetParams& params,
                     const nlohmann::json& metadata = nlohmann::json::object());
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json arch_to_json(const ArchConfig& arch);
ArchConfig arch_from_json(const nlohmann::json& j);

}  // namespace soilref::nn
