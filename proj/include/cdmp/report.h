#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cdmp/results.h"

namespace cdmp {

/// One bar of the label-fraction chart.
struct AblationPoint {
  std::string dataset;
  std::string regime;  // "SS" or "FS"
  double label_fraction = 1.0;
  double accuracy = 0;
  bool operator==(const AblationPoint&) const = default;
};

/// Bars from ablation tables. Full-label SS (frozen) and FS (supervised)
/// results also count as the fraction 1.0 bars unless an ablation run at 1.0
/// exists. Ordered by dataset, regime (SS first), then fraction.
std::vector<AblationPoint> ablation_points(std::span<const ResultTable> tables);

/// "dataset,regime,label_fraction,accuracy" plus one row per point.
std::string ablation_csv(std::span<const AblationPoint> points);
std::vector<AblationPoint> parse_ablation_csv(const std::string& csv);

/// Grouped bar chart rendered from the CSV text: one group per dataset, one
/// bar per (regime, fraction).
std::string ablation_svg(const std::string& csv);

struct ReportFiles {
  std::filesystem::path markdown, csv, svg;
};

/// Reads ResultTable JSON files and writes tables.md, ablation.csv and
/// ablation.svg into `out_dir`. Missing or unreadable inputs are all listed
/// in one error.
ReportFiles emit_report(std::span<const std::filesystem::path> inputs, const std::filesystem::path& out_dir);

}  // namespace cdmp
