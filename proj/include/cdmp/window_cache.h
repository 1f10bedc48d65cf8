#pragma once

#include <filesystem>

#include "cdmp/loaders.h"
#include "json.hpp"

namespace cdmp {

// A prepared-window cache is a directory holding
//   windows.bin    raw windows, little-endian float32, shape [M x L x 3]
//   manifest.json  dataset name, window parameters, normalization stats,
//                  per-window subject/label/source arrays, source file hashes

inline constexpr const char* kCacheManifest = "manifest.json";
inline constexpr const char* kCacheBlob = "windows.bin";

/// Writes the cache. `normalization` is recorded verbatim in the manifest.
/// Source hashes are computed from `root`.
void write_window_cache(const std::filesystem::path& dir, const PreparedDataset& data,
                        const std::filesystem::path& root,
                        const nlohmann::json& normalization = nlohmann::json::object());

struct LoadedCache {
  PreparedDataset data;
  nlohmann::json manifest;
};

LoadedCache read_window_cache(const std::filesystem::path& dir);

/// True when every recorded source file under `root` still has its recorded hash.
bool cache_is_fresh(const nlohmann::json& manifest, const std::filesystem::path& root);

}  // namespace cdmp
