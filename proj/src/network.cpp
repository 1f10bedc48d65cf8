#include "cdmp/network.h"

#include <stdexcept>
#include <string>

namespace cdmp {

std::vector<Shape> shape_trace(const Shape& input, std::span<const LayerDesc> layers) {
  std::vector<Shape> trace;
  trace.reserve(layers.size());
  Shape current = input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerDesc& layer = layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + to_string(layer.kind) + ")";
    switch (layer.kind) {
      case LayerKind::Conv1d:
        if (current.size() != 2 || layer.kernel == 0 || current[0] < layer.kernel) {
          throw std::invalid_argument(where + ": cannot apply kernel " +
                                      std::to_string(layer.kernel) + " to " +
                                      shape_to_string(current));
        }
        current = {current[0] - layer.kernel + 1, layer.units};
        break;
      case LayerKind::MaxPool1d:
        if (current.size() != 2 || layer.kernel == 0 || current[0] < layer.kernel) {
          throw std::invalid_argument(where + ": cannot pool " + shape_to_string(current));
        }
        current = {current[0] / layer.kernel, current[1]};
        break;
      case LayerKind::Flatten:
        current = {shape_numel(current)};
        break;
      case LayerKind::Dense:
        if (current.size() != 1) {
          throw std::invalid_argument(where + ": dense layer needs a flat input, got " +
                                      shape_to_string(current));
        }
        current = {layer.units};
        break;
    }
    if (layer.has_params() && layer.units == 0) {
      throw std::invalid_argument(where + ": zero output units");
    }
    trace.push_back(current);
  }
  return trace;
}

std::pair<Shape, Shape> param_shapes(const LayerDesc& layer, const Shape& input) {
  switch (layer.kind) {
    case LayerKind::Conv1d:
      return {{layer.kernel, input.at(1), layer.units}, {layer.units}};
    case LayerKind::Dense:
      return {{input.at(0), layer.units}, {layer.units}};
    default:
      return {{}, {}};
  }
}

template <typename T>
BasicTensor<T> network_forward(std::span<const LayerDesc> layers,
                               std::span<const LayerParams<T>> params, const BasicTensor<T>& input,
                               Mode mode, std::mt19937_64* rng, ForwardCache<T>* cache) {
  if (params.size() != layers.size()) {
    throw std::invalid_argument("network: " + std::to_string(layers.size()) + " layers but " +
                                std::to_string(params.size()) + " parameter entries");
  }
  if (cache) cache->layers.assign(layers.size(), {});
  BasicTensor<T> x = input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerDesc& layer = layers[i];
    LayerCache<T>* entry = cache ? &cache->layers[i] : nullptr;
    if (entry) entry->input = x;
    switch (layer.kind) {
      case LayerKind::Conv1d:
      case LayerKind::Dense: {
        BasicTensor<T> z = layer.kind == LayerKind::Conv1d ? conv1d_forward(x, params[i])
                                                           : dense_forward(x, params[i]);
        x = activation_forward(z, layer.activation);
        if (entry) entry->activated = x;
        if (layer.dropout > 0.0 && mode == Mode::Train) {
          if (!rng) throw std::invalid_argument("network: dropout in train mode needs an rng");
          auto dropped = dropout_forward(x, layer.dropout, *rng, mode);
          x = std::move(dropped.output);
          if (entry) entry->dropout_mask = std::move(dropped.mask);
        }
        break;
      }
      case LayerKind::MaxPool1d: {
        auto pooled = maxpool1d_forward(x, layer.kernel);
        x = pooled.output;
        if (entry) entry->pool = std::move(pooled);
        break;
      }
      case LayerKind::Flatten: {
        const std::size_t batch = x.dim(0);
        x = std::move(x).reshaped({batch, x.size() / batch});
        break;
      }
    }
  }
  return x;
}

template <typename T>
std::vector<LayerGrads<T>> network_backward(std::span<const LayerDesc> layers,
                                            std::span<const LayerParams<T>> params,
                                            const ForwardCache<T>& cache,
                                            const BasicTensor<T>& grad_output,
                                            bool want_input_grad) {
  if (cache.layers.size() != layers.size() || params.size() != layers.size()) {
    throw std::logic_error("network backward: cache does not match the layer stack");
  }
  std::vector<LayerGrads<T>> grads(layers.size());
  std::size_t lowest = 0;
  if (!want_input_grad) {
    lowest = layers.size();
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (layers[i].has_params() && !params[i].frozen) {
        lowest = i;
        break;
      }
    }
    if (lowest == layers.size()) return grads;
  }

  BasicTensor<T> g = grad_output;
  for (std::size_t i = layers.size(); i-- > lowest;) {
    const LayerDesc& layer = layers[i];
    const LayerCache<T>& entry = cache.layers[i];
    const bool need_input = want_input_grad || i > lowest;
    switch (layer.kind) {
      case LayerKind::Conv1d:
      case LayerKind::Dense: {
        g = dropout_backward(entry.dropout_mask, g);
        g = activation_backward(entry.activated, g, layer.activation);
        const bool need_params = !params[i].frozen;
        LayerGrads<T> lg = layer.kind == LayerKind::Conv1d
                               ? conv1d_backward(entry.input, params[i], g, need_input, need_params)
                               : dense_backward(entry.input, params[i], g, need_input, need_params);
        g = std::move(lg.input);
        grads[i].weights = std::move(lg.weights);
        grads[i].bias = std::move(lg.bias);
        break;
      }
      case LayerKind::MaxPool1d:
        g = need_input ? maxpool1d_backward(entry.pool, g) : BasicTensor<T>();
        break;
      case LayerKind::Flatten:
        g = std::move(g).reshaped(entry.input.shape());
        break;
    }
  }
  if (want_input_grad) grads[0].input = std::move(g);
  return grads;
}

template BasicTensor<float> network_forward(std::span<const LayerDesc>,
                                            std::span<const LayerParams<float>>,
                                            const BasicTensor<float>&, Mode, std::mt19937_64*,
                                            ForwardCache<float>*);
template BasicTensor<double> network_forward(std::span<const LayerDesc>,
                                             std::span<const LayerParams<double>>,
                                             const BasicTensor<double>&, Mode, std::mt19937_64*,
                                             ForwardCache<double>*);
template std::vector<LayerGrads<float>> network_backward(std::span<const LayerDesc>,
                                                         std::span<const LayerParams<float>>,
                                                         const ForwardCache<float>&,
                                                         const BasicTensor<float>&, bool);
template std::vector<LayerGrads<double>> network_backward(std::span<const LayerDesc>,
                                                          std::span<const LayerParams<double>>,
                                                          const ForwardCache<double>&,
                                                          const BasicTensor<double>&, bool);

}  // namespace cdmp
