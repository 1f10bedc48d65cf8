#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "cdmp/layers.h"
#include "cdmp/optim.h"

namespace cdmp {

struct GradCheckOptions {
  double step = 1e-5;
  std::uint64_t seed = 7;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst;  // which value produced the maximum
  std::size_t checked = 0;
};

/// Compares backpropagated gradients of a layer stack against central
/// differences, in double precision. Parameters are drawn uniformly from
/// [-1, 1] and the scalar objective is a fixed random projection of the
/// output. Covers every input element and every parameter.
///
/// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
GradCheckReport grad_check(std::span<const LayerDesc> layers, const TensorD& input,
                           const GradCheckOptions& options = {});

GradCheckReport grad_check(const LayerDesc& layer, const TensorD& input,
                           const GradCheckOptions& options = {});

/// Check of an activation alone. ReLU inputs should avoid the kink at 0.
GradCheckReport grad_check_activation(Activation kind, const TensorD& input,
                                      const GradCheckOptions& options = {});

/// Same check for a loss, with respect to the prediction.
GradCheckReport grad_check_loss(LossKind kind, const TensorD& pred, const TensorD& target,
                                const GradCheckOptions& options = {});

}  // namespace cdmp
