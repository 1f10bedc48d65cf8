#pragma once

#include <random>
#include <span>
#include <utility>
#include <vector>

#include "cdmp/layers.h"

namespace cdmp {

/// Per-sample output shape after every layer, starting from a per-sample
/// input shape such as {120, 3}. Throws if two layers do not compose.
std::vector<Shape> shape_trace(const Shape& input, std::span<const LayerDesc> layers);

/// Weight and bias shapes of a parametric layer fed with `input`.
std::pair<Shape, Shape> param_shapes(const LayerDesc& layer, const Shape& input);

template <typename T>
struct LayerCache {
  BasicTensor<T> input;
  BasicTensor<T> activated;
  BasicTensor<T> dropout_mask;
  PoolResult<T> pool;
};

/// Activations recorded by a forward pass, one entry per executed layer.
template <typename T>
struct ForwardCache {
  std::vector<LayerCache<T>> layers;
};

/// Runs a layer stack over a batched input [B x ...]. `params` holds one entry
/// per layer (empty for non-parametric layers). Dropout draws from `rng` in
/// train mode; `cache` is filled when a backward pass will follow.
template <typename T>
BasicTensor<T> network_forward(std::span<const LayerDesc> layers,
                               std::span<const LayerParams<T>> params, const BasicTensor<T>& input,
                               Mode mode, std::mt19937_64* rng, ForwardCache<T>* cache);

/// Backpropagates `grad_output` through the cached stack. Gradients are
/// produced for every non-frozen parametric layer; propagation stops below the
/// lowest such layer unless `want_input_grad` is set, in which case the
/// returned entry 0 also carries the gradient with respect to the input.
template <typename T>
std::vector<LayerGrads<T>> network_backward(std::span<const LayerDesc> layers,
                                            std::span<const LayerParams<T>> params,
                                            const ForwardCache<T>& cache,
                                            const BasicTensor<T>& grad_output,
                                            bool want_input_grad = false);

}  // namespace cdmp
