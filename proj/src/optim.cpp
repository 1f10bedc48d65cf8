#include "cdmp/optim.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cdmp {

template <typename T>
LossResult<T> mse_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
  if (pred.shape() != target.shape() || pred.empty()) {
    throw std::invalid_argument("mse: prediction " + shape_to_string(pred.shape()) +
                                " vs target " + shape_to_string(target.shape()));
  }
  LossResult<T> r;
  r.grad = BasicTensor<T>(pred.shape());
  const T n = static_cast<T>(pred.size());
  T total = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T diff = pred[i] - target[i];
    total += diff * diff;
    r.grad[i] = T(2) * diff / n;
  }
  r.value = total / n;
  return r;
}

template <typename T>
LossResult<T> cross_entropy_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
  if (pred.shape() != target.shape() || pred.empty()) {
    throw std::invalid_argument("cross_entropy: prediction " + shape_to_string(pred.shape()) +
                                " vs target " + shape_to_string(target.shape()));
  }
  const std::size_t width = pred.shape().back();
  const std::size_t rows = pred.size() / width;
  for (std::size_t r = 0; r < rows; ++r) {
    int ones = 0;
    for (std::size_t j = 0; j < width; ++j) {
      const T t = target[r * width + j];
      if (t == T(1)) {
        ++ones;
      } else if (t != T(0)) {
        throw std::invalid_argument("cross_entropy: target row " + std::to_string(r) +
                                    " is not one-hot");
      }
    }
    if (ones != 1) {
      throw std::invalid_argument("cross_entropy: target row " + std::to_string(r) +
                                  " is not one-hot");
    }
  }

  const T lo = T(kProbabilityClamp);
  const T hi = T(1) - T(kProbabilityClamp);
  LossResult<T> result;
  result.grad = BasicTensor<T>(pred.shape());
  T total = 0;
  std::vector<T> dq(width);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* p = pred.data() + r * width;
    const T* t = target.data() + r * width;
    T sum = 0;
    for (std::size_t j = 0; j < width; ++j) sum += p[j];
    sum = std::max(sum, std::numeric_limits<T>::min());
    T weighted = 0;
    for (std::size_t j = 0; j < width; ++j) {
      const T q = p[j] / sum;
      const T c = std::clamp(q, lo, hi);
      if (t[j] != T(0)) total -= t[j] * std::log(c);
      dq[j] = (t[j] != T(0) && q > lo && q < hi) ? -t[j] / c : T(0);
      weighted += dq[j] * q;
    }
    T* g = result.grad.data() + r * width;
    for (std::size_t j = 0; j < width; ++j) g[j] = (dq[j] - weighted) / sum / T(rows);
  }
  result.value = total / T(rows);
  return result;
}

template <typename T>
void adam_step(LayerParams<T>& params, const LayerGrads<T>& grads, const AdamConfig& config) {
  if (!(config.learning_rate > 0.0)) {
    throw std::invalid_argument("adam: learning rate must be positive, got " +
                                std::to_string(config.learning_rate));
  }
  if (params.frozen || params.empty()) return;
  if (grads.weights.shape() != params.weights.shape() || grads.bias.shape() != params.bias.shape()) {
    throw std::invalid_argument("adam: gradient shapes " + shape_to_string(grads.weights.shape()) +
                                "/" + shape_to_string(grads.bias.shape()) +
                                " do not match parameters " + shape_to_string(params.weights.shape()) +
                                "/" + shape_to_string(params.bias.shape()));
  }
  params.step_count += 1;
  const double t = static_cast<double>(params.step_count);
  const T step = static_cast<T>(config.learning_rate * std::sqrt(1.0 - std::pow(config.beta2, t)) /
                                (1.0 - std::pow(config.beta1, t)));
  const T b1 = static_cast<T>(config.beta1);
  const T b2 = static_cast<T>(config.beta2);
  const T eps = static_cast<T>(config.epsilon);

  auto update = [&](BasicTensor<T>& p, BasicTensor<T>& m, BasicTensor<T>& v, const BasicTensor<T>& g) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (T(1) - b1) * g[i];
      v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
      p[i] -= step * m[i] / (std::sqrt(v[i]) + eps);
    }
  };
  update(params.weights, params.m_weights, params.v_weights, grads.weights);
  update(params.bias, params.m_bias, params.v_bias, grads.bias);
}

template LossResult<float> mse_loss(const BasicTensor<float>&, const BasicTensor<float>&);
template LossResult<double> mse_loss(const BasicTensor<double>&, const BasicTensor<double>&);
template LossResult<float> cross_entropy_loss(const BasicTensor<float>&, const BasicTensor<float>&);
template LossResult<double> cross_entropy_loss(const BasicTensor<double>&, const BasicTensor<double>&);
template void adam_step(LayerParams<float>&, const LayerGrads<float>&, const AdamConfig&);
template void adam_step(LayerParams<double>&, const LayerGrads<double>&, const AdamConfig&);

}  // namespace cdmp
