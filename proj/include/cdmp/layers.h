#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cdmp/tensor.h"

namespace cdmp {

enum class LayerKind { Conv1d, MaxPool1d, Flatten, Dense };
enum class Activation { Linear, Relu, Sigmoid, Softmax };
enum class Mode { Train, Eval };

std::string to_string(LayerKind kind);
std::string to_string(Activation act);
LayerKind layer_kind_from_string(const std::string& name);
Activation activation_from_string(const std::string& name);

/// One entry of a layer stack. Conv and dense layers carry a fused activation
/// and an optional dropout applied after the activation.
struct LayerDesc {
  LayerKind kind = LayerKind::Dense;
  std::size_t kernel = 0;  // conv kernel width, or pool window (stride == window)
  std::size_t units = 0;   // conv filters or dense width
  Activation activation = Activation::Linear;
  double dropout = 0.0;
  bool frozen = false;

  bool has_params() const { return kind == LayerKind::Conv1d || kind == LayerKind::Dense; }
  bool operator==(const LayerDesc&) const = default;
};

LayerDesc conv_layer(std::size_t kernel, std::size_t filters, Activation act = Activation::Relu);
LayerDesc pool_layer(std::size_t size = 2);
LayerDesc flatten_layer();
LayerDesc dense_layer(std::size_t units, Activation act = Activation::Relu, double dropout = 0.0);

/// Trainable state of one parametric layer including its Adam moments.
/// Non-parametric layers hold empty tensors.
template <typename T>
struct LayerParams {
  BasicTensor<T> weights;
  BasicTensor<T> bias;
  bool frozen = false;
  BasicTensor<T> m_weights;
  BasicTensor<T> v_weights;
  BasicTensor<T> m_bias;
  BasicTensor<T> v_bias;
  std::uint64_t step_count = 0;

  static LayerParams zeros(Shape weight_shape, Shape bias_shape);
  /// Wraps given weights and bias with zeroed optimizer state.
  static LayerParams of(BasicTensor<T> weights, BasicTensor<T> bias);

  bool empty() const { return weights.empty(); }
  /// Clears the Adam moments and step count.
  void reset_optimizer();
};

template <typename T>
struct LayerGrads {
  BasicTensor<T> input;
  BasicTensor<T> weights;
  BasicTensor<T> bias;
};

/// Output of max-pooling together with the argmax positions needed by the
/// backward pass. Indices are flat offsets into the pooled input.
template <typename T>
struct PoolResult {
  BasicTensor<T> output;
  Shape input_shape;
  std::vector<std::size_t> argmax;
};

// Inputs to conv1d and maxpool1d are [L x C] or batched [B x L x C]. Dense
// inputs are [N] or batched [B x N].

template <typename T>
BasicTensor<T> conv1d_forward(const BasicTensor<T>& input, const LayerParams<T>& params);

/// Gradients of a valid, stride-1 convolution. Skipped parts are left empty.
template <typename T>
LayerGrads<T> conv1d_backward(const BasicTensor<T>& input, const LayerParams<T>& params,
                              const BasicTensor<T>& grad_output, bool want_input = true,
                              bool want_params = true);

template <typename T>
PoolResult<T> maxpool1d_forward(const BasicTensor<T>& input, std::size_t size = 2);

template <typename T>
BasicTensor<T> maxpool1d_backward(const PoolResult<T>& cache, const BasicTensor<T>& grad_output);

template <typename T>
BasicTensor<T> dense_forward(const BasicTensor<T>& input, const LayerParams<T>& params);

template <typename T>
LayerGrads<T> dense_backward(const BasicTensor<T>& input, const LayerParams<T>& params,
                             const BasicTensor<T>& grad_output, bool want_input = true,
                             bool want_params = true);

/// Softmax normalizes over the last axis.
template <typename T>
BasicTensor<T> activation_forward(const BasicTensor<T>& input, Activation kind);

/// Backward pass expressed through the activation's own output.
template <typename T>
BasicTensor<T> activation_backward(const BasicTensor<T>& output, const BasicTensor<T>& grad_output,
                                   Activation kind);

/// Inverted dropout. In eval mode, or at rate 0, the input passes through and
/// the mask is left empty. Otherwise each kept unit is scaled by 1/(1-rate).
template <typename T>
struct DropoutResult {
  BasicTensor<T> output;
  BasicTensor<T> mask;
};

template <typename T>
DropoutResult<T> dropout_forward(const BasicTensor<T>& input, double rate, std::mt19937_64& rng,
                                 Mode mode);

template <typename T>
BasicTensor<T> dropout_backward(const BasicTensor<T>& mask, const BasicTensor<T>& grad_output);

}  // namespace cdmp
