#include "cdmp/grad_check.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "cdmp/network.h"

namespace cdmp {

namespace {

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / scale;
}

void record(GradCheckReport& report, double analytic, double numeric, const std::string& what) {
  const double err = relative_error(analytic, numeric);
  ++report.checked;
  if (report.worst.empty() || err > report.max_relative_error) {
    report.max_relative_error = err;
    report.worst = what + " (analytic " + std::to_string(analytic) + ", numeric " +
                   std::to_string(numeric) + ")";
  }
}

}  // namespace

GradCheckReport grad_check(std::span<const LayerDesc> layers, const TensorD& input,
                           const GradCheckOptions& options) {
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  const std::size_t sample_rank = layers.front().kind == LayerKind::Dense ? 1 : 2;
  TensorD x0 = input;
  if (input.rank() == sample_rank) {
    Shape s{1};
    s.insert(s.end(), input.shape().begin(), input.shape().end());
    x0 = input.reshaped(std::move(s));
  }
  const Shape sample(x0.shape().begin() + 1, x0.shape().end());

  std::vector<LayerParams<double>> params(layers.size());
  Shape current = sample;
  const auto trace = shape_trace(sample, layers);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].has_params()) {
      auto [ws, bs] = param_shapes(layers[i], current);
      params[i] = LayerParams<double>::zeros(ws, bs);
      for (auto& v : params[i].weights.values()) v = unit(rng);
      for (auto& v : params[i].bias.values()) v = unit(rng);
    }
    current = trace[i];
  }

  auto objective_out = [&](const TensorD& x) {
    return network_forward<double>(layers, params, x, Mode::Eval, nullptr, nullptr);
  };
  TensorD projection(objective_out(x0).shape());
  for (auto& v : projection.values()) v = unit(rng);
  auto objective = [&](const TensorD& x) {
    const TensorD y = objective_out(x);
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) total += y[i] * projection[i];
    return total;
  };

  ForwardCache<double> cache;
  network_forward<double>(layers, params, x0, Mode::Eval, nullptr, &cache);
  const auto grads = network_backward<double>(layers, params, cache, projection, true);

  GradCheckReport report;
  const double h = options.step;
  TensorD x = x0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = objective(x);
    x[i] = saved - h;
    const double down = objective(x);
    x[i] = saved;
    record(report, grads[0].input[i], (up - down) / (2 * h), "input[" + std::to_string(i) + "]");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (!layers[l].has_params()) continue;
    auto check_tensor = [&](TensorD& p, const TensorD& g, const std::string& name) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double saved = p[i];
        p[i] = saved + h;
        const double up = objective(x0);
        p[i] = saved - h;
        const double down = objective(x0);
        p[i] = saved;
        record(report, g[i], (up - down) / (2 * h),
               "layer " + std::to_string(l) + " " + name + "[" + std::to_string(i) + "]");
      }
    };
    check_tensor(params[l].weights, grads[l].weights, "weights");
    check_tensor(params[l].bias, grads[l].bias, "bias");
  }
  return report;
}

GradCheckReport grad_check(const LayerDesc& layer, const TensorD& input,
                           const GradCheckOptions& options) {
  return grad_check(std::span<const LayerDesc>(&layer, 1), input, options);
}

GradCheckReport grad_check_loss(LossKind kind, const TensorD& pred, const TensorD& target,
                                const GradCheckOptions& options) {
  const auto analytic = compute_loss(kind, pred, target);
  GradCheckReport report;
  const double h = options.step;
  TensorD p = pred;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double saved = p[i];
    p[i] = saved + h;
    const double up = compute_loss(kind, p, target).value;
    p[i] = saved - h;
    const double down = compute_loss(kind, p, target).value;
    p[i] = saved;
    record(report, analytic.grad[i], (up - down) / (2 * h), "pred[" + std::to_string(i) + "]");
  }
  return report;
}

GradCheckReport grad_check_activation(Activation kind, const TensorD& input,
                                      const GradCheckOptions& options) {
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  TensorD projection(input.shape());
  for (auto& v : projection.values()) v = unit(rng);
  auto objective = [&](const TensorD& x) {
    const TensorD y = activation_forward(x, kind);
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) total += y[i] * projection[i];
    return total;
  };
  const TensorD analytic = activation_backward(activation_forward(input, kind), projection, kind);
  GradCheckReport report;
  const double h = options.step;
  TensorD x = input;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = objective(x);
    x[i] = saved - h;
    const double down = objective(x);
    x[i] = saved;
    record(report, analytic[i], (up - down) / (2 * h), "input[" + std::to_string(i) + "]");
  }
  return report;
}

}  // namespace cdmp
