#include "cdmp/metrics.h"

#include <stdexcept>
#include <string>

namespace cdmp {

namespace {

template <typename T>
double r2_impl(std::span<const T> pred, std::span<const T> target) {
  if (pred.size() != target.size()) {
    throw std::invalid_argument("r2: " + std::to_string(pred.size()) + " predictions for " +
                                std::to_string(target.size()) + " targets");
  }
  if (target.empty()) throw std::invalid_argument("r2: empty input");
  double mean = 0;
  for (T t : target) mean += static_cast<double>(t);
  mean /= static_cast<double>(target.size());
  double ss_res = 0, ss_tot = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double t = static_cast<double>(target[i]);
    const double e = static_cast<double>(pred[i]) - t;
    ss_res += e * e;
    ss_tot += (t - mean) * (t - mean);
  }
  if (ss_tot == 0) throw std::invalid_argument("r2: target is constant");
  return 1.0 - ss_res / ss_tot;
}

}  // namespace

double r2(std::span<const float> pred, std::span<const float> target) { return r2_impl(pred, target); }

double r2(std::span<const double> pred, std::span<const double> target) {
  return r2_impl(pred, target);
}

double r2(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw std::invalid_argument("r2: prediction " + shape_to_string(pred.shape()) + " vs target " +
                                shape_to_string(target.shape()));
  }
  return r2(pred.values(), target.values());
}

ClassificationReport classification_metrics(std::span<const int> predictions,
                                            std::span<const int> labels, std::size_t num_classes) {
  if (labels.empty()) throw std::invalid_argument("classification metrics: empty input");
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("classification metrics: " + std::to_string(predictions.size()) +
                                " predictions for " + std::to_string(labels.size()) + " labels");
  }
  ConfusionMatrix confusion(num_classes, std::vector<std::size_t>(num_classes, 0));
  const int k = static_cast<int>(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= k || predictions[i] < 0 || predictions[i] >= k) {
      throw std::invalid_argument("classification metrics: entry " + std::to_string(i) +
                                  " (label " + std::to_string(labels[i]) + ", prediction " +
                                  std::to_string(predictions[i]) + ") outside 0.." +
                                  std::to_string(k - 1));
    }
    ++confusion[labels[i]][predictions[i]];
  }
  return metrics_from_confusion(confusion);
}

ClassificationReport metrics_from_confusion(const ConfusionMatrix& confusion) {
  const std::size_t k = confusion.size();
  ClassificationReport r;
  r.confusion = confusion;
  r.support.assign(k, 0);
  r.f1_per_class.assign(k, 0.0);
  std::vector<std::size_t> predicted(k, 0);
  std::size_t total = 0, correct = 0;
  for (std::size_t t = 0; t < k; ++t) {
    if (confusion[t].size() != k) throw std::invalid_argument("confusion matrix is not square");
    for (std::size_t p = 0; p < k; ++p) {
      r.support[t] += confusion[t][p];
      predicted[p] += confusion[t][p];
      total += confusion[t][p];
    }
    correct += confusion[t][t];
  }
  if (total == 0) throw std::invalid_argument("classification metrics: empty confusion matrix");

  std::size_t present = 0;
  double macro = 0, weighted = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const double tp = static_cast<double>(confusion[c][c]);
    const double precision = predicted[c] ? tp / static_cast<double>(predicted[c]) : 0.0;
    const double recall = r.support[c] ? tp / static_cast<double>(r.support[c]) : 0.0;
    const double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    r.f1_per_class[c] = f1;
    if (r.support[c] || predicted[c]) {
      ++present;
      macro += f1;
    }
    weighted += f1 * static_cast<double>(r.support[c]);
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  r.f1_macro = macro / static_cast<double>(present);
  r.f1_weighted = weighted / static_cast<double>(total);
  return r;
}

std::vector<int> argmax_rows(const Tensor& scores) {
  if (scores.rank() != 2) {
    throw std::invalid_argument("argmax_rows: expected [B x C], got " + shape_to_string(scores.shape()));
  }
  const std::size_t rows = scores.dim(0), cols = scores.dim(1);
  std::vector<int> out(rows);
  for (std::size_t b = 0; b < rows; ++b) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < cols; ++c) {
      if (scores.at(b, c) > scores.at(b, best)) best = c;
    }
    out[b] = static_cast<int>(best);
  }
  return out;
}

}  // namespace cdmp
