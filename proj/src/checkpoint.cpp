#include "cdmp/checkpoint.h"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "cdmp/binary_io.h"

namespace cdmp {

nlohmann::json layer_to_json(const LayerDesc& layer) {
  return {{"kind", to_string(layer.kind)},     {"kernel", layer.kernel},
          {"units", layer.units},              {"activation", to_string(layer.activation)},
          {"dropout", layer.dropout},          {"frozen", layer.frozen}};
}

LayerDesc layer_from_json(const nlohmann::json& j) {
  LayerDesc layer;
  layer.kind = layer_kind_from_string(j.at("kind").get<std::string>());
  layer.kernel = j.at("kernel").get<std::size_t>();
  layer.units = j.at("units").get<std::size_t>();
  layer.activation = activation_from_string(j.at("activation").get<std::string>());
  layer.dropout = j.at("dropout").get<double>();
  layer.frozen = j.at("frozen").get<bool>();
  return layer;
}

void write_checkpoint(const std::filesystem::path& path, std::span<const LayerDesc> layers,
                      std::span<const LayerParams<float>> params, const nlohmann::json& metadata) {
  if (layers.size() != params.size()) {
    throw std::invalid_argument("checkpoint: layer and parameter counts differ");
  }
  nlohmann::json header;
  header["metadata"] = metadata;
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    nlohmann::json entry = layer_to_json(layers[i]);
    if (layers[i].has_params()) {
      entry["weights_shape"] = params[i].weights.shape();
      entry["bias_shape"] = params[i].bias.shape();
      entry["step_count"] = params[i].step_count;
      entry["params_frozen"] = params[i].frozen;
    }
    entries.push_back(std::move(entry));
  }
  header["layers"] = std::move(entries);
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, 4);
  write_u16_le(out, kCheckpointVersion);
  write_u32_le(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (!layers[i].has_params()) continue;
    write_f32_le(out, params[i].weights.values());
    write_f32_le(out, params[i].bias.values());
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint not found: " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw std::runtime_error(path.string() + " is not a checkpoint (bad magic)");
  }
  const std::uint16_t version = read_u16_le(in);
  if (version != kCheckpointVersion) {
    throw std::runtime_error(path.string() + ": unsupported checkpoint version " +
                             std::to_string(version));
  }
  const std::uint32_t length = read_u32_le(in);
  std::string text(length, '\0');
  if (!in.read(text.data(), length)) throw std::runtime_error(path.string() + ": truncated header");
  const nlohmann::json header = nlohmann::json::parse(text);

  Checkpoint ckpt;
  ckpt.metadata = header.value("metadata", nlohmann::json::object());
  for (const auto& entry : header.at("layers")) {
    LayerDesc layer = layer_from_json(entry);
    LayerParams<float> params;
    if (layer.has_params()) {
      const Shape ws = entry.at("weights_shape").get<Shape>();
      const Shape bs = entry.at("bias_shape").get<Shape>();
      params = LayerParams<float>::zeros(ws, bs);
      params.step_count = entry.at("step_count").get<std::uint64_t>();
      params.frozen = entry.at("params_frozen").get<bool>();
    }
    ckpt.layers.push_back(layer);
    ckpt.params.push_back(std::move(params));
  }
  for (std::size_t i = 0; i < ckpt.layers.size(); ++i) {
    if (!ckpt.layers[i].has_params()) continue;
    auto& p = ckpt.params[i];
    p.weights = Tensor(p.weights.shape(), read_f32_le(in, p.weights.size()));
    p.bias = Tensor(p.bias.shape(), read_f32_le(in, p.bias.size()));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw std::runtime_error(path.string() + ": trailing bytes after parameter blobs");
  }
  return ckpt;
}

}  // namespace cdmp
