#include "cdmp/window_cache.h"

#include <fstream>
#include <stdexcept>

#include "cdmp/binary_io.h"

namespace cdmp {

namespace fs = std::filesystem;

void write_window_cache(const fs::path& dir, const PreparedDataset& data, const fs::path& root,
                        const nlohmann::json& normalization) {
  data.windows.validate();
  fs::create_directories(dir);
  const DatasetInfo& info = data.info();

  nlohmann::json sources = nlohmann::json::array();
  for (const auto& rel : data.source_files) {
    sources.push_back({{"path", rel.generic_string()}, {"sha256", sha256_file(root / rel)}});
  }
  nlohmann::json manifest = {
      {"format", "cdmp-window-cache"},
      {"version", 1},
      {"dataset", info.name},
      {"num_classes", info.num_classes},
      {"window",
       {{"length", data.layout.length},
        {"horizon", data.layout.horizon},
        {"stride", data.layout.stride()},
        {"sample_rate_hz", kSampleRateHz}}},
      {"count", data.windows.size()},
      {"subject_roster", data.windows.subjects()},
      {"subject_ids", data.windows.subject_ids},
      {"labels", data.windows.labels},
      {"window_sources", data.windows.sources},
      {"normalization", normalization},
      {"source_files", sources},
      {"blob",
       {{"file", kCacheBlob},
        {"dtype", "float32"},
        {"endianness", "little"},
        {"shape", {data.windows.size(), data.layout.length, 3}}}},
  };

  {
    std::ofstream blob(dir / kCacheBlob, std::ios::binary | std::ios::trunc);
    if (!blob) throw std::runtime_error("cannot write " + (dir / kCacheBlob).string());
    write_f32_le(blob, data.windows.windows.values());
  }
  std::ofstream out(dir / kCacheManifest, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + (dir / kCacheManifest).string());
  out << manifest.dump(2) << "\n";
}

LoadedCache read_window_cache(const fs::path& dir) {
  const fs::path manifest_path = dir / kCacheManifest;
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("window cache manifest not found: " + manifest_path.string());
  LoadedCache loaded;
  loaded.manifest = nlohmann::json::parse(in);
  const auto& m = loaded.manifest;
  if (m.value("format", "") != "cdmp-window-cache") {
    throw std::runtime_error(manifest_path.string() + " is not a window cache manifest");
  }
  PreparedDataset& data = loaded.data;
  data.id = dataset_from_name(m.at("dataset").get<std::string>());
  data.layout.length = m.at("window").at("length").get<std::size_t>();
  data.layout.horizon = m.at("window").at("horizon").get<std::size_t>();
  data.layout.validate();
  const std::size_t count = m.at("count").get<std::size_t>();
  data.windows.subject_ids = m.at("subject_ids").get<std::vector<int>>();
  data.windows.labels = m.at("labels").get<std::vector<int>>();
  data.windows.sources = m.at("window_sources").get<std::vector<std::string>>();
  for (const auto& entry : m.at("source_files")) {
    data.source_files.emplace_back(entry.at("path").get<std::string>());
  }

  const fs::path blob_path = dir / m.at("blob").at("file").get<std::string>();
  std::ifstream blob(blob_path, std::ios::binary);
  if (!blob) throw std::runtime_error("window cache blob not found: " + blob_path.string());
  const std::size_t expected = count * data.layout.length * 3;
  if (fs::file_size(blob_path) != expected * sizeof(float)) {
    throw std::runtime_error(blob_path.string() + ": size " + std::to_string(fs::file_size(blob_path)) +
                             " bytes does not match manifest (" + std::to_string(expected) +
                             " floats)");
  }
  if (count > 0) {
    data.windows.windows = Tensor({count, data.layout.length, 3}, read_f32_le(blob, expected));
  }
  data.windows.validate();
  return loaded;
}

bool cache_is_fresh(const nlohmann::json& manifest, const fs::path& root) {
  for (const auto& entry : manifest.at("source_files")) {
    const fs::path file = root / entry.at("path").get<std::string>();
    if (!fs::exists(file) || sha256_file(file) != entry.at("sha256").get<std::string>()) return false;
  }
  return true;
}

}  // namespace cdmp
