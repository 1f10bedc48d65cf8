#include "cdmp/models.h"

#include <cmath>
#include <random>
#include <stdexcept>

#include "cdmp/binary_io.h"
#include "cdmp/checkpoint.h"
#include "cdmp/network.h"
#include "cdmp/random.h"

namespace cdmp {

namespace {

nlohmann::json geometry_json(const Shape& input, std::span<const LayerDesc> layers) {
  nlohmann::json j;
  j["input"] = input;
  nlohmann::json list = nlohmann::json::array();
  for (const auto& layer : layers) {
    nlohmann::json entry = layer_to_json(layer);
    entry.erase("frozen");
    list.push_back(std::move(entry));
  }
  j["layers"] = std::move(list);
  return j;
}

std::vector<LayerDesc> conv_blocks(const ArchitectureOptions& o) {
  std::vector<LayerDesc> layers;
  for (std::size_t filters : o.conv_filters) {
    layers.push_back(conv_layer(o.kernel, filters));
    layers.push_back(conv_layer(o.kernel, filters));
    layers.push_back(pool_layer(2));
  }
  layers.push_back(flatten_layer());
  return layers;
}

}  // namespace

std::vector<Shape> ArchitectureSpec::trace() const { return shape_trace(input_shape, layers); }

Shape ArchitectureSpec::output_shape() const {
  const auto t = trace();
  return t.empty() ? input_shape : t.back();
}

std::size_t ArchitectureSpec::conv_prefix_length() const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].kind == LayerKind::Flatten) return i + 1;
  }
  return 0;
}

std::string ArchitectureSpec::fingerprint() const {
  return sha256_hex(geometry_json(input_shape, layers).dump());
}

std::string ArchitectureSpec::conv_fingerprint() const {
  return sha256_hex(
      geometry_json(input_shape, std::span(layers).first(conv_prefix_length())).dump());
}

ArchitectureSpec build_pretext_spec(const ArchitectureOptions& options) {
  options.layout.validate();
  ArchitectureSpec spec;
  spec.name = "pretext";
  spec.input_shape = {options.layout.length, 3};
  spec.horizon = options.layout.horizon;
  spec.layers = conv_blocks(options);
  for (std::size_t width : options.pretext_hidden) spec.layers.push_back(dense_layer(width));
  spec.layers.push_back(dense_layer(options.layout.horizon, Activation::Linear));
  spec.trace();
  return spec;
}

ArchitectureSpec build_har_spec(std::size_t num_classes, const ArchitectureOptions& options) {
  if (num_classes < 2) {
    throw std::invalid_argument("activity classifier needs at least 2 classes, got " +
                                std::to_string(num_classes));
  }
  if (options.har_output != Activation::Sigmoid && options.har_output != Activation::Softmax) {
    throw std::invalid_argument("classifier output must be sigmoid or softmax");
  }
  options.layout.validate();
  ArchitectureSpec spec;
  spec.name = "har";
  spec.input_shape = {options.layout.length, 3};
  spec.horizon = options.layout.horizon;
  spec.layers = conv_blocks(options);
  for (auto& layer : spec.layers) layer.frozen = layer.has_params();
  for (std::size_t i = 0; i < options.har_hidden.size(); ++i) {
    spec.layers.push_back(
        dense_layer(options.har_hidden[i], Activation::Relu, i == 0 ? options.har_dropout : 0.0));
  }
  spec.layers.push_back(dense_layer(num_classes, options.har_output));
  spec.trace();
  return spec;
}

ModelParams init_params(const ArchitectureSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModelParams params;
  params.fingerprint = spec.fingerprint();
  params.layers.resize(spec.layers.size());
  const auto trace = spec.trace();
  Shape current = spec.input_shape;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerDesc& layer = spec.layers[i];
    if (layer.has_params()) {
      auto [ws, bs] = param_shapes(layer, current);
      auto& p = params.layers[i];
      p = LayerParams<float>::zeros(ws, bs);
      double fan_in, fan_out;
      if (layer.kind == LayerKind::Conv1d) {
        fan_in = static_cast<double>(ws[0] * ws[1]);
        fan_out = static_cast<double>(ws[0] * ws[2]);
      } else {
        fan_in = static_cast<double>(ws[0]);
        fan_out = static_cast<double>(ws[1]);
      }
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      for (auto& v : p.weights.values()) {
        v = static_cast<float>((2.0 * uniform_unit(rng) - 1.0) * bound);
      }
      p.frozen = layer.frozen;
    }
    current = trace[i];
  }
  return params;
}

ModelParams transfer_and_freeze(const ArchitectureSpec& source_spec, const ModelParams& source,
                                const ArchitectureSpec& target_spec, std::uint64_t seed) {
  const std::size_t prefix = target_spec.conv_prefix_length();
  if (source_spec.conv_prefix_length() != prefix || source_spec.input_shape != target_spec.input_shape) {
    throw std::invalid_argument("transfer: convolution blocks of '" + source_spec.name + "' and '" +
                                target_spec.name + "' differ in structure");
  }
  if (source.layers.size() != source_spec.layers.size()) {
    throw std::invalid_argument("transfer: source parameters do not match spec '" +
                                source_spec.name + "'");
  }
  ModelParams out = init_params(target_spec, seed);
  for (std::size_t i = 0; i < prefix; ++i) {
    const LayerDesc& a = source_spec.layers[i];
    const LayerDesc& b = target_spec.layers[i];
    if (a.kind != b.kind || a.kernel != b.kernel || a.units != b.units ||
        a.activation != b.activation) {
      throw std::invalid_argument("transfer: layer " + std::to_string(i) + " differs (" +
                                  to_string(a.kind) + " vs " + to_string(b.kind) + ")");
    }
    if (!b.has_params()) continue;
    const auto& src = source.layers[i];
    auto& dst = out.layers[i];
    if (src.weights.shape() != dst.weights.shape() || src.bias.shape() != dst.bias.shape()) {
      throw std::invalid_argument("transfer: layer " + std::to_string(i) + " weight shape " +
                                  shape_to_string(src.weights.shape()) + " vs " +
                                  shape_to_string(dst.weights.shape()));
    }
    dst = LayerParams<float>::of(src.weights, src.bias);
    dst.frozen = true;
  }
  return out;
}

void set_conv_frozen(const ArchitectureSpec& spec, ModelParams& params, bool frozen) {
  for (std::size_t i = 0; i < spec.conv_prefix_length(); ++i) {
    if (spec.layers[i].has_params()) params.layers.at(i).frozen = frozen;
  }
}

std::string conv_checksum(const ArchitectureSpec& spec, const ModelParams& params) {
  std::string bytes;
  for (std::size_t i = 0; i < spec.conv_prefix_length(); ++i) {
    const auto& p = params.layers.at(i);
    for (const Tensor* t : {&p.weights, &p.bias}) {
      bytes.append(reinterpret_cast<const char*>(t->data()), t->size() * sizeof(float));
    }
  }
  return sha256_hex(bytes);
}

Tensor forward_layers(const ArchitectureSpec& spec, const ModelParams& params, std::size_t begin,
                      std::size_t end, const Tensor& batch, std::size_t chunk) {
  if (params.layers.size() != spec.layers.size()) {
    throw std::invalid_argument("forward: parameters hold " + std::to_string(params.layers.size()) +
                                " layers, spec '" + spec.name + "' has " +
                                std::to_string(spec.layers.size()));
  }
  const auto layers = std::span<const LayerDesc>(spec.layers).subspan(begin, end - begin);
  const auto lp = std::span<const LayerParams<float>>(params.layers).subspan(begin, end - begin);
  const std::size_t n = batch.dim(0);
  chunk = std::max<std::size_t>(chunk, 1);
  std::vector<float> out;
  Shape out_shape;
  for (std::size_t start = 0; start < n; start += chunk) {
    const Tensor part = batch.slice_rows(start, std::min(n, start + chunk));
    const Tensor y = network_forward<float>(layers, lp, part, Mode::Eval, nullptr, nullptr);
    if (out_shape.empty()) {
      out_shape = y.shape();
      out.reserve(n * (y.size() / y.dim(0)));
    }
    out.insert(out.end(), y.values().begin(), y.values().end());
  }
  out_shape[0] = n;
  return Tensor(std::move(out_shape), std::move(out));
}

Tensor model_forward(const ArchitectureSpec& spec, const ModelParams& params, const Tensor& input,
                     std::size_t chunk) {
  const bool single = input.shape() == spec.input_shape;
  Shape batched = input.shape();
  if (single) batched.insert(batched.begin(), 1);
  if (Shape(batched.begin() + 1, batched.end()) != spec.input_shape) {
    throw std::invalid_argument("forward: input " + shape_to_string(input.shape()) +
                                " does not match model input " + shape_to_string(spec.input_shape));
  }
  Tensor out = forward_layers(spec, params, 0, spec.layers.size(), input.reshaped(batched), chunk);
  if (single) {
    Shape s(out.shape().begin() + 1, out.shape().end());
    return std::move(out).reshaped(std::move(s));
  }
  return out;
}

void save_model(const std::filesystem::path& path, const ArchitectureSpec& spec,
                const ModelParams& params, nlohmann::json metadata) {
  metadata["architecture"] = spec.name;
  metadata["fingerprint"] = spec.fingerprint();
  metadata["conv_fingerprint"] = spec.conv_fingerprint();
  metadata["input_shape"] = spec.input_shape;
  write_checkpoint(path, spec.layers, params.layers, metadata);
}

ModelParams load_model(const std::filesystem::path& path, const ArchitectureSpec& spec) {
  Checkpoint ckpt = read_checkpoint(path);
  const std::string stored = ckpt.metadata.value("fingerprint", "");
  const std::string expected = spec.fingerprint();
  if (stored != expected) {
    throw std::runtime_error(path.string() + ": architecture fingerprint " + stored +
                             " does not match '" + spec.name + "' (" + expected + ")");
  }
  ModelParams params;
  params.fingerprint = stored;
  params.layers = std::move(ckpt.params);
  return params;
}

nlohmann::json options_to_json(const ArchitectureOptions& o) {
  return {{"window_length", o.layout.length}, {"horizon", o.layout.horizon},
          {"kernel", o.kernel},               {"conv_filters", o.conv_filters},
          {"pretext_hidden", o.pretext_hidden}, {"har_hidden", o.har_hidden},
          {"har_dropout", o.har_dropout},     {"har_output", to_string(o.har_output)}};
}

ArchitectureOptions options_from_json(const nlohmann::json& j) {
  ArchitectureOptions o;
  o.layout.length = j.value("window_length", o.layout.length);
  o.layout.horizon = j.value("horizon", o.layout.horizon);
  o.kernel = j.value("kernel", o.kernel);
  o.conv_filters = j.value("conv_filters", o.conv_filters);
  o.pretext_hidden = j.value("pretext_hidden", o.pretext_hidden);
  o.har_hidden = j.value("har_hidden", o.har_hidden);
  o.har_dropout = j.value("har_dropout", o.har_dropout);
  o.har_output = activation_from_string(j.value("har_output", to_string(o.har_output)));
  return o;
}

}  // namespace cdmp
