#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdmp/metrics.h"
#include "json.hpp"

namespace cdmp {

inline constexpr const char* kMetricR2 = "r2";
inline constexpr const char* kMetricAccuracy = "accuracy";
inline constexpr const char* kMetricF1Macro = "f1_macro";
inline constexpr const char* kMetricF1Weighted = "f1_weighted";

struct FoldResult {
  std::size_t fold = 0;
  std::vector<int> test_subjects;
  std::map<std::string, double> metrics;
  std::optional<ConfusionMatrix> confusion;
  std::size_t best_epoch = 0;
  std::size_t train_windows = 0;

  bool operator==(const FoldResult&) const = default;
};

struct MetricSummary {
  double mean = 0;
  double std = 0;  // population standard deviation across folds
  bool operator==(const MetricSummary&) const = default;
};

/// Per-fold metrics of one method on one dataset plus their mean and spread.
struct ResultTable {
  std::string dataset;
  std::string experiment;  // pretext, ss_frozen, ss_finetune, supervised, ablation
  std::string method;      // Pretext, SS, SS-FT, FS
  double label_fraction = 1.0;
  std::vector<FoldResult> folds;
  std::map<std::string, MetricSummary> summary;

  /// Rebuilds `summary` from `folds`.
  void recompute_summary();
  nlohmann::json to_json() const;
  static ResultTable from_json(const nlohmann::json& j);
  bool operator==(const ResultTable&) const = default;
};

/// "mean ± std" with three decimals.
std::string format_mean_std(const MetricSummary& s);

/// Accuracy mean ± std, then macro and weighted F1 means:
/// "0.899 ± 0.034 / 0.796 / 0.898".
std::string compact_summary(const ResultTable& table);

/// Markdown table with one row per result: Method | Accuracy | F1(m) | F1(w),
/// each cell mean ± std. Pretext results get a Method | R² table instead.
std::string markdown_table(std::span<const ResultTable> tables);

/// Serialises several tables as one JSON array, in order.
std::string tables_to_json(std::span<const ResultTable> tables);
std::vector<ResultTable> tables_from_json(const nlohmann::json& j);

}  // namespace cdmp
