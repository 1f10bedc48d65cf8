#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cdmp/tensor.h"

namespace cdmp {

/// Coefficient of determination pooled over every element:
/// 1 - sum (p - t)^2 / sum (t - mean t)^2, accumulated in double.
double r2(std::span<const float> pred, std::span<const float> target);
double r2(std::span<const double> pred, std::span<const double> target);
double r2(const Tensor& pred, const Tensor& target);

using ConfusionMatrix = std::vector<std::vector<std::size_t>>;  // [true][predicted]

struct ClassificationReport {
  double accuracy = 0;
  double f1_macro = 0;
  double f1_weighted = 0;
  std::vector<double> f1_per_class;
  std::vector<std::size_t> support;
  ConfusionMatrix confusion;
};

/// Macro F1 averages over the classes that occur among labels or
/// predictions; weighted F1 weights each class by its label support.
ClassificationReport classification_metrics(std::span<const int> predictions,
                                            std::span<const int> labels, std::size_t num_classes);

/// Recomputes every scalar from a stored confusion matrix.
ClassificationReport metrics_from_confusion(const ConfusionMatrix& confusion);

/// Index of the largest score in each row of [B x C]; ties go to the lowest index.
std::vector<int> argmax_rows(const Tensor& scores);

}  // namespace cdmp
