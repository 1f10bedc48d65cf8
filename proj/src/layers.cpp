#include "cdmp/layers.h"

#include "cdmp/random.h"

#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace cdmp {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

struct SeqDims {
  std::size_t batch;
  std::size_t length;
  std::size_t channels;
  bool batched;
};

SeqDims sequence_dims(const Shape& shape, const char* op) {
  if (shape.size() == 2) return {1, shape[0], shape[1], false};
  if (shape.size() == 3) return {shape[0], shape[1], shape[2], true};
  throw std::invalid_argument(std::string(op) + ": expected [L x C] or [B x L x C] input, got " +
                              shape_to_string(shape));
}

Shape sequence_shape(const SeqDims& d, std::size_t length, std::size_t channels) {
  if (d.batched) return {d.batch, length, channels};
  return {length, channels};
}

struct VecDims {
  std::size_t batch;
  std::size_t features;
  bool batched;
};

VecDims vector_dims(const Shape& shape, const char* op) {
  if (shape.size() == 1) return {1, shape[0], false};
  if (shape.size() == 2) return {shape[0], shape[1], true};
  throw std::invalid_argument(std::string(op) + ": expected [N] or [B x N] input, got " +
                              shape_to_string(shape));
}

template <typename T>
void check_conv_params(const Shape& input, const LayerParams<T>& params, const SeqDims& d) {
  const Shape& w = params.weights.shape();
  if (w.size() != 3 || w[1] != d.channels) {
    throw std::invalid_argument("conv1d: input " + shape_to_string(input) +
                                " incompatible with kernel " + shape_to_string(w) +
                                " (kernel must be [K x C_in x C_out] with C_in = " +
                                std::to_string(d.channels) + ")");
  }
  if (params.bias.shape() != Shape{w[2]}) {
    throw std::invalid_argument("conv1d: bias " + shape_to_string(params.bias.shape()) +
                                " does not match kernel " + shape_to_string(w));
  }
  if (d.length < w[0]) {
    throw std::invalid_argument("conv1d: input length " + std::to_string(d.length) +
                                " shorter than kernel width " + std::to_string(w[0]));
  }
}

template <typename T>
void check_dense_params(const Shape& input, const LayerParams<T>& params, const VecDims& d) {
  const Shape& w = params.weights.shape();
  if (w.size() != 2 || w[0] != d.features) {
    throw std::invalid_argument("dense: input " + shape_to_string(input) +
                                " incompatible with weights " + shape_to_string(w));
  }
  if (params.bias.shape() != Shape{w[1]}) {
    throw std::invalid_argument("dense: bias " + shape_to_string(params.bias.shape()) +
                                " does not match weights " + shape_to_string(w));
  }
}

}  // namespace

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv1d: return "conv1d";
    case LayerKind::MaxPool1d: return "maxpool1d";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Dense: return "dense";
  }
  return "unknown";
}

std::string to_string(Activation act) {
  switch (act) {
    case Activation::Linear: return "linear";
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Softmax: return "softmax";
  }
  return "unknown";
}

LayerKind layer_kind_from_string(const std::string& name) {
  for (auto k : {LayerKind::Conv1d, LayerKind::MaxPool1d, LayerKind::Flatten, LayerKind::Dense}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown layer kind '" + name + "'");
}

Activation activation_from_string(const std::string& name) {
  for (auto a : {Activation::Linear, Activation::Relu, Activation::Sigmoid, Activation::Softmax}) {
    if (to_string(a) == name) return a;
  }
  throw std::invalid_argument("unknown activation '" + name + "'");
}

LayerDesc conv_layer(std::size_t kernel, std::size_t filters, Activation act) {
  return {LayerKind::Conv1d, kernel, filters, act, 0.0, false};
}

LayerDesc pool_layer(std::size_t size) { return {LayerKind::MaxPool1d, size, 0, Activation::Linear, 0.0, false}; }

LayerDesc flatten_layer() { return {LayerKind::Flatten, 0, 0, Activation::Linear, 0.0, false}; }

LayerDesc dense_layer(std::size_t units, Activation act, double dropout) {
  return {LayerKind::Dense, 0, units, act, dropout, false};
}

template <typename T>
LayerParams<T> LayerParams<T>::zeros(Shape weight_shape, Shape bias_shape) {
  return of(BasicTensor<T>(std::move(weight_shape)), BasicTensor<T>(std::move(bias_shape)));
}

template <typename T>
LayerParams<T> LayerParams<T>::of(BasicTensor<T> weights, BasicTensor<T> bias) {
  LayerParams p;
  p.weights = std::move(weights);
  p.bias = std::move(bias);
  p.reset_optimizer();
  return p;
}

template <typename T>
void LayerParams<T>::reset_optimizer() {
  m_weights = BasicTensor<T>(weights.shape());
  v_weights = BasicTensor<T>(weights.shape());
  m_bias = BasicTensor<T>(bias.shape());
  v_bias = BasicTensor<T>(bias.shape());
  step_count = 0;
}

template <typename T>
BasicTensor<T> conv1d_forward(const BasicTensor<T>& input, const LayerParams<T>& params) {
  const SeqDims d = sequence_dims(input.shape(), "conv1d");
  check_conv_params(input.shape(), params, d);
  const std::size_t k = params.weights.dim(0);
  const std::size_t c_out = params.weights.dim(2);
  const std::size_t l_out = d.length - k + 1;

  BasicTensor<T> output(sequence_shape(d, l_out, c_out));
  Eigen::Map<const RowMat<T>> w(params.weights.data(), k * d.channels, c_out);
  Eigen::Map<const RowVec<T>> b(params.bias.data(), c_out);
  for (std::size_t n = 0; n < d.batch; ++n) {
    // Row t of the lowered input is the contiguous slab x[t .. t+K) of K*C_in values.
    Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>> cols(
        input.data() + n * d.length * d.channels, l_out, k * d.channels,
        Eigen::OuterStride<>(d.channels));
    Eigen::Map<RowMat<T>> y(output.data() + n * l_out * c_out, l_out, c_out);
    y.noalias() = cols * w;
    y.rowwise() += b;
  }
  return output;
}

template <typename T>
LayerGrads<T> conv1d_backward(const BasicTensor<T>& input, const LayerParams<T>& params,
                              const BasicTensor<T>& grad_output, bool want_input,
                              bool want_params) {
  const SeqDims d = sequence_dims(input.shape(), "conv1d");
  check_conv_params(input.shape(), params, d);
  const std::size_t k = params.weights.dim(0);
  const std::size_t c_in = d.channels;
  const std::size_t c_out = params.weights.dim(2);
  const std::size_t l_out = d.length - k + 1;
  if (grad_output.shape() != sequence_shape(d, l_out, c_out)) {
    throw std::invalid_argument("conv1d backward: grad_output " +
                                shape_to_string(grad_output.shape()) + " does not match output " +
                                shape_to_string(sequence_shape(d, l_out, c_out)));
  }

  LayerGrads<T> grads;
  Eigen::Map<const RowMat<T>> w(params.weights.data(), k * c_in, c_out);
  if (want_input) grads.input = BasicTensor<T>(input.shape());
  if (want_params) {
    grads.weights = BasicTensor<T>(params.weights.shape());
    grads.bias = BasicTensor<T>(params.bias.shape());
  }
  for (std::size_t n = 0; n < d.batch; ++n) {
    Eigen::Map<const RowMat<T>> dy(grad_output.data() + n * l_out * c_out, l_out, c_out);
    if (want_params) {
      Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>> cols(
          input.data() + n * d.length * c_in, l_out, k * c_in, Eigen::OuterStride<>(c_in));
      Eigen::Map<RowMat<T>> dw(grads.weights.data(), k * c_in, c_out);
      Eigen::Map<RowVec<T>> db(grads.bias.data(), c_out);
      dw.noalias() += cols.transpose() * dy;
      db += dy.colwise().sum();
    }
    if (want_input) {
      Eigen::Map<RowMat<T>> dx(grads.input.data() + n * d.length * c_in, d.length, c_in);
      for (std::size_t tap = 0; tap < k; ++tap) {
        dx.middleRows(tap, l_out).noalias() += dy * w.middleRows(tap * c_in, c_in).transpose();
      }
    }
  }
  return grads;
}

template <typename T>
PoolResult<T> maxpool1d_forward(const BasicTensor<T>& input, std::size_t size) {
  const SeqDims d = sequence_dims(input.shape(), "maxpool1d");
  if (size < 1 || d.length < size) {
    throw std::invalid_argument("maxpool1d: input length " + std::to_string(d.length) +
                                " shorter than pool size " + std::to_string(size));
  }
  const std::size_t l_out = d.length / size;
  PoolResult<T> result;
  result.input_shape = input.shape();
  result.output = BasicTensor<T>(sequence_shape(d, l_out, d.channels));
  result.argmax.resize(result.output.size());
  std::size_t o = 0;
  for (std::size_t n = 0; n < d.batch; ++n) {
    const std::size_t base = n * d.length * d.channels;
    for (std::size_t t = 0; t < l_out; ++t) {
      for (std::size_t c = 0; c < d.channels; ++c, ++o) {
        std::size_t best = base + (t * size) * d.channels + c;
        for (std::size_t j = 1; j < size; ++j) {
          const std::size_t idx = base + (t * size + j) * d.channels + c;
          if (input[idx] > input[best]) best = idx;
        }
        result.argmax[o] = best;
        result.output[o] = input[best];
      }
    }
  }
  return result;
}

template <typename T>
BasicTensor<T> maxpool1d_backward(const PoolResult<T>& cache, const BasicTensor<T>& grad_output) {
  if (cache.argmax.empty() || cache.input_shape.empty()) {
    throw std::logic_error("maxpool1d backward: no forward cache recorded");
  }
  if (grad_output.shape() != cache.output.shape() || cache.argmax.size() != grad_output.size()) {
    throw std::invalid_argument("maxpool1d backward: grad_output " +
                                shape_to_string(grad_output.shape()) +
                                " does not match cached output " +
                                shape_to_string(cache.output.shape()));
  }
  BasicTensor<T> grad_input(cache.input_shape);
  for (std::size_t i = 0; i < grad_output.size(); ++i) grad_input[cache.argmax[i]] += grad_output[i];
  return grad_input;
}

template <typename T>
BasicTensor<T> dense_forward(const BasicTensor<T>& input, const LayerParams<T>& params) {
  const VecDims d = vector_dims(input.shape(), "dense");
  check_dense_params(input.shape(), params, d);
  const std::size_t m = params.weights.dim(1);
  BasicTensor<T> output(d.batched ? Shape{d.batch, m} : Shape{m});
  Eigen::Map<const RowMat<T>> x(input.data(), d.batch, d.features);
  Eigen::Map<const RowMat<T>> w(params.weights.data(), d.features, m);
  Eigen::Map<const RowVec<T>> b(params.bias.data(), m);
  Eigen::Map<RowMat<T>> y(output.data(), d.batch, m);
  y.noalias() = x * w;
  y.rowwise() += b;
  return output;
}

template <typename T>
LayerGrads<T> dense_backward(const BasicTensor<T>& input, const LayerParams<T>& params,
                             const BasicTensor<T>& grad_output, bool want_input,
                             bool want_params) {
  const VecDims d = vector_dims(input.shape(), "dense");
  check_dense_params(input.shape(), params, d);
  const std::size_t m = params.weights.dim(1);
  if (grad_output.size() != d.batch * m) {
    throw std::invalid_argument("dense backward: grad_output " +
                                shape_to_string(grad_output.shape()) + " does not match output width " +
                                std::to_string(m));
  }
  Eigen::Map<const RowMat<T>> x(input.data(), d.batch, d.features);
  Eigen::Map<const RowMat<T>> w(params.weights.data(), d.features, m);
  Eigen::Map<const RowMat<T>> dy(grad_output.data(), d.batch, m);
  LayerGrads<T> grads;
  if (want_params) {
    grads.weights = BasicTensor<T>(params.weights.shape());
    grads.bias = BasicTensor<T>(params.bias.shape());
    Eigen::Map<RowMat<T>>(grads.weights.data(), d.features, m).noalias() = x.transpose() * dy;
    Eigen::Map<RowVec<T>>(grads.bias.data(), m) = dy.colwise().sum();
  }
  if (want_input) {
    grads.input = BasicTensor<T>(input.shape());
    Eigen::Map<RowMat<T>>(grads.input.data(), d.batch, d.features).noalias() = dy * w.transpose();
  }
  return grads;
}

template <typename T>
BasicTensor<T> activation_forward(const BasicTensor<T>& input, Activation kind) {
  BasicTensor<T> out = input;
  switch (kind) {
    case Activation::Linear:
      break;
    case Activation::Relu:
      for (auto& v : out.values()) v = v > T(0) ? v : T(0);
      break;
    case Activation::Sigmoid:
      for (auto& v : out.values()) {
        // Branch on sign so exp never overflows.
        if (v >= T(0)) {
          v = T(1) / (T(1) + std::exp(-v));
        } else {
          const T e = std::exp(v);
          v = e / (T(1) + e);
        }
      }
      break;
    case Activation::Softmax: {
      if (out.empty()) break;
      const std::size_t width = out.shape().back();
      for (std::size_t row = 0; row < out.size(); row += width) {
        T* v = out.data() + row;
        T peak = v[0];
        for (std::size_t j = 1; j < width; ++j) peak = std::max(peak, v[j]);
        T total = 0;
        for (std::size_t j = 0; j < width; ++j) {
          v[j] = std::exp(v[j] - peak);
          total += v[j];
        }
        for (std::size_t j = 0; j < width; ++j) v[j] /= total;
      }
      break;
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> activation_backward(const BasicTensor<T>& output, const BasicTensor<T>& grad_output,
                                   Activation kind) {
  if (output.shape() != grad_output.shape()) {
    throw std::invalid_argument("activation backward: shape " + shape_to_string(output.shape()) +
                                " vs grad " + shape_to_string(grad_output.shape()));
  }
  BasicTensor<T> grad = grad_output;
  switch (kind) {
    case Activation::Linear:
      break;
    case Activation::Relu:
      for (std::size_t i = 0; i < grad.size(); ++i) {
        if (!(output[i] > T(0))) grad[i] = T(0);
      }
      break;
    case Activation::Sigmoid:
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= output[i] * (T(1) - output[i]);
      break;
    case Activation::Softmax: {
      const std::size_t width = output.shape().back();
      for (std::size_t row = 0; row < output.size(); row += width) {
        T dot = 0;
        for (std::size_t j = 0; j < width; ++j) dot += grad_output[row + j] * output[row + j];
        for (std::size_t j = 0; j < width; ++j) {
          grad[row + j] = output[row + j] * (grad_output[row + j] - dot);
        }
      }
      break;
    }
  }
  return grad;
}

template <typename T>
DropoutResult<T> dropout_forward(const BasicTensor<T>& input, double rate, std::mt19937_64& rng,
                                 Mode mode) {
  if (!(rate >= 0.0) || rate >= 1.0) {
    throw std::invalid_argument("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  DropoutResult<T> result;
  if (mode == Mode::Eval || rate == 0.0) {
    result.output = input;
    return result;
  }
  const T scale = T(1.0 / (1.0 - rate));
  result.mask = BasicTensor<T>(input.shape());
  result.output = BasicTensor<T>(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    const T keep = uniform_unit(rng) >= rate ? scale : T(0);
    result.mask[i] = keep;
    result.output[i] = input[i] * keep;
  }
  return result;
}

template <typename T>
BasicTensor<T> dropout_backward(const BasicTensor<T>& mask, const BasicTensor<T>& grad_output) {
  if (mask.empty()) return grad_output;
  if (mask.shape() != grad_output.shape()) {
    throw std::invalid_argument("dropout backward: mask/grad shape mismatch");
  }
  BasicTensor<T> grad = grad_output;
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= mask[i];
  return grad;
}

#define CDMP_INSTANTIATE_LAYERS(T)                                                              \
  template struct LayerParams<T>;                                                               \
  template BasicTensor<T> conv1d_forward(const BasicTensor<T>&, const LayerParams<T>&);         \
  template LayerGrads<T> conv1d_backward(const BasicTensor<T>&, const LayerParams<T>&,          \
                                         const BasicTensor<T>&, bool, bool);                    \
  template PoolResult<T> maxpool1d_forward(const BasicTensor<T>&, std::size_t);                 \
  template BasicTensor<T> maxpool1d_backward(const PoolResult<T>&, const BasicTensor<T>&);      \
  template BasicTensor<T> dense_forward(const BasicTensor<T>&, const LayerParams<T>&);          \
  template LayerGrads<T> dense_backward(const BasicTensor<T>&, const LayerParams<T>&,           \
                                        const BasicTensor<T>&, bool, bool);                     \
  template BasicTensor<T> activation_forward(const BasicTensor<T>&, Activation);                \
  template BasicTensor<T> activation_backward(const BasicTensor<T>&, const BasicTensor<T>&,     \
                                              Activation);                                      \
  template DropoutResult<T> dropout_forward(const BasicTensor<T>&, double, std::mt19937_64&,    \
                                            Mode);                                              \
  template BasicTensor<T> dropout_backward(const BasicTensor<T>&, const BasicTensor<T>&);

CDMP_INSTANTIATE_LAYERS(float)
CDMP_INSTANTIATE_LAYERS(double)

#undef CDMP_INSTANTIATE_LAYERS

}  // namespace cdmp
