#pragma once

#include "cdmp/layers.h"
#include "cdmp/tensor.h"

namespace cdmp {

enum class LossKind { Mse, CrossEntropy };

template <typename T>
struct LossResult {
  T value = 0;
  BasicTensor<T> grad;
};

/// Mean of squared differences over every element.
template <typename T>
LossResult<T> mse_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target);

/// Categorical cross-entropy on one-hot targets, averaged over rows.
///
/// Each prediction row is divided by its sum before the log, so that a row of
/// independent sigmoid scores is treated as a distribution; softmax rows pass
/// through unchanged. Probabilities are clamped to [1e-7, 1 - 1e-7].
template <typename T>
LossResult<T> cross_entropy_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target);

template <typename T>
LossResult<T> compute_loss(LossKind kind, const BasicTensor<T>& pred, const BasicTensor<T>& target) {
  return kind == LossKind::Mse ? mse_loss(pred, target) : cross_entropy_loss(pred, target);
}

inline constexpr double kProbabilityClamp = 1e-7;

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One Adam update on a layer. The bias correction is folded into the step
/// size, lr * sqrt(1 - beta2^t) / (1 - beta1^t), with epsilon added to the
/// uncorrected sqrt(v). Frozen layers are left untouched, including their
/// moments and step count.
template <typename T>
void adam_step(LayerParams<T>& params, const LayerGrads<T>& grads, const AdamConfig& config);

}  // namespace cdmp
