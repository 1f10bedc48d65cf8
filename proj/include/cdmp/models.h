#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cdmp/datasets.h"
#include "cdmp/layers.h"
#include "json.hpp"

namespace cdmp {

/// Widths of the two networks. Defaults give the full-size model; tests and
/// quick runs shrink them.
struct ArchitectureOptions {
  WindowLayout layout;
  std::size_t kernel = 3;
  std::array<std::size_t, 3> conv_filters{128, 256, 384};
  std::vector<std::size_t> pretext_hidden{384, 120};
  std::vector<std::size_t> har_hidden{512, 250, 100};
  double har_dropout = 0.2;
  Activation har_output = Activation::Sigmoid;

  bool operator==(const ArchitectureOptions&) const = default;
};

struct ArchitectureSpec {
  std::string name;
  Shape input_shape;  // per sample, {L, 3}
  std::size_t horizon = 24;  // masked z tail length of the window layout
  std::vector<LayerDesc> layers;

  /// Per-sample output shape of every layer.
  std::vector<Shape> trace() const;
  Shape output_shape() const;
  /// Layers up to and including the flatten, i.e. the convolution blocks.
  std::size_t conv_prefix_length() const;
  /// SHA-256 over input shape and layer geometry. Freeze flags are excluded.
  std::string fingerprint() const;
  std::string conv_fingerprint() const;
};

/// Input [L x 3] -> three blocks of (conv+ReLU, conv+ReLU, maxpool) -> flatten
/// -> hidden dense+ReLU layers -> linear dense of width `horizon`.
ArchitectureSpec build_pretext_spec(const ArchitectureOptions& options = {});

/// Same convolution blocks (frozen) -> flatten -> dense+ReLU layers, the first
/// with dropout -> dense of width num_classes with the configured output
/// activation.
ArchitectureSpec build_har_spec(std::size_t num_classes, const ArchitectureOptions& options = {});

struct ModelParams {
  std::vector<LayerParams<float>> layers;  // one entry per spec layer
  std::string fingerprint;
};

/// Glorot-uniform weights, bounds +-sqrt(6 / (fan_in + fan_out)) with the
/// receptive field folded into the conv fans; zero biases. Freeze flags
/// follow the spec.
ModelParams init_params(const ArchitectureSpec& spec, std::uint64_t seed);

/// Copies the convolution blocks of `source` bit-exactly into a freshly
/// initialised `target` model and freezes them.
ModelParams transfer_and_freeze(const ArchitectureSpec& source_spec, const ModelParams& source,
                                const ArchitectureSpec& target_spec, std::uint64_t seed);

/// Sets the freeze flag of every convolution-block layer.
void set_conv_frozen(const ArchitectureSpec& spec, ModelParams& params, bool frozen);

/// SHA-256 over the convolution-block parameter bytes.
std::string conv_checksum(const ArchitectureSpec& spec, const ModelParams& params);

/// Eval-mode forward of one sample [L x 3] -> [out] or a batch [B x L x 3]
/// -> [B x out]; batches are processed in chunks of `chunk` samples.
Tensor model_forward(const ArchitectureSpec& spec, const ModelParams& params, const Tensor& input,
                     std::size_t chunk = 256);

/// Forward through a contiguous range of layers in eval mode, in chunks.
Tensor forward_layers(const ArchitectureSpec& spec, const ModelParams& params, std::size_t begin,
                      std::size_t end, const Tensor& batch, std::size_t chunk = 256);

void save_model(const std::filesystem::path& path, const ArchitectureSpec& spec,
                const ModelParams& params, nlohmann::json metadata = nlohmann::json::object());

/// Loads a checkpoint and checks it against `spec`; a fingerprint mismatch is
/// an error naming both fingerprints.
ModelParams load_model(const std::filesystem::path& path, const ArchitectureSpec& spec);

nlohmann::json options_to_json(const ArchitectureOptions& options);
ArchitectureOptions options_from_json(const nlohmann::json& j);

}  // namespace cdmp
