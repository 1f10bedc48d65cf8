#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cdmp/layers.h"
#include "json.hpp"

namespace cdmp {

inline constexpr char kCheckpointMagic[4] = {'C', 'D', 'M', 'P'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

/// Layer stack, parameters and free-form metadata read back from disk.
/// Optimizer moments are not persisted; loaded layers start with zeroed
/// moments but keep their recorded step counts.
struct Checkpoint {
  std::vector<LayerDesc> layers;
  std::vector<LayerParams<float>> params;
  nlohmann::json metadata;
};

// File layout:
//   "CDMP" | u16 version | u32 header length | JSON header |
//   float32 blobs (weights then bias, per parametric layer in layer order)
// All integers and floats are little-endian.

void write_checkpoint(const std::filesystem::path& path, std::span<const LayerDesc> layers,
                      std::span<const LayerParams<float>> params,
                      const nlohmann::json& metadata = nlohmann::json::object());

Checkpoint read_checkpoint(const std::filesystem::path& path);

nlohmann::json layer_to_json(const LayerDesc& layer);
LayerDesc layer_from_json(const nlohmann::json& j);

}  // namespace cdmp
