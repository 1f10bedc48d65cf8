#include "cdmp/report.h"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "cdmp/binary_io.h"

namespace fs = std::filesystem;

namespace cdmp {

namespace {

int dataset_rank(const std::string& name) {
  static const std::vector<std::string> order{"ucihar", "motionsense", "hapt"};
  const auto it = std::find(order.begin(), order.end(), name);
  return static_cast<int>(it - order.begin());
}

auto point_key(const AblationPoint& p) {
  return std::make_tuple(dataset_rank(p.dataset), p.dataset, p.regime != "SS", p.label_fraction);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::vector<AblationPoint> ablation_points(std::span<const ResultTable> tables) {
  // Ablation runs take precedence over full-label runs at the same key.
  std::map<std::tuple<std::string, std::string, double>, std::pair<bool, double>> found;
  for (const auto& t : tables) {
    const bool ablation = t.experiment == "ablation";
    const bool full_ss = t.experiment == "ss_frozen" && t.method == "SS";
    const bool full_fs = t.experiment == "supervised" && t.method == "FS";
    if (!ablation && !full_ss && !full_fs) continue;
    if (t.method != "SS" && t.method != "FS") continue;
    const auto it = t.summary.find(kMetricAccuracy);
    if (it == t.summary.end()) continue;
    const auto key = std::make_tuple(t.dataset, t.method, t.label_fraction);
    auto existing = found.find(key);
    if (existing == found.end() || (ablation && !existing->second.first)) {
      found[key] = {ablation, it->second.mean};
    }
  }
  std::vector<AblationPoint> points;
  for (const auto& [key, value] : found) {
    points.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), value.second});
  }
  std::sort(points.begin(), points.end(),
            [](const auto& a, const auto& b) { return point_key(a) < point_key(b); });
  return points;
}

std::string ablation_csv(std::span<const AblationPoint> points) {
  std::string out = "dataset,regime,label_fraction,accuracy\n";
  for (const auto& p : points) {
    out += p.dataset + "," + p.regime + "," + fmt("%g", p.label_fraction) + "," + fmt("%.6f", p.accuracy) + "\n";
  }
  return out;
}

std::vector<AblationPoint> parse_ablation_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != "dataset,regime,label_fraction,accuracy") {
    throw std::invalid_argument("ablation CSV lacks the dataset,regime,label_fraction,accuracy header");
  }
  std::vector<AblationPoint> points;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    if (cells.size() != 4) {
      throw std::invalid_argument("ablation CSV row " + std::to_string(row) + " has " +
                                  std::to_string(cells.size()) + " cells");
    }
    try {
      points.push_back({cells[0], cells[1], std::stod(cells[2]), std::stod(cells[3])});
    } catch (const std::exception&) {
      throw std::invalid_argument("ablation CSV row " + std::to_string(row) + " is not numeric");
    }
  }
  return points;
}

std::string ablation_svg(const std::string& csv) {
  const auto points = parse_ablation_csv(csv);

  std::vector<std::string> datasets;
  std::vector<std::pair<std::string, double>> series;  // (regime, fraction)
  for (const auto& p : points) {
    if (std::find(datasets.begin(), datasets.end(), p.dataset) == datasets.end()) datasets.push_back(p.dataset);
    const std::pair<std::string, double> s{p.regime, p.label_fraction};
    if (std::find(series.begin(), series.end(), s) == series.end()) series.push_back(s);
  }
  std::sort(series.begin(), series.end(), [](const auto& a, const auto& b) {
    return std::make_tuple(a.second, a.first != "SS") < std::make_tuple(b.second, b.first != "SS");
  });

  const double bar_w = 28, gap = 36, left = 60, top = 30, plot_h = 240;
  const double group_w = std::max<double>(1, static_cast<double>(series.size())) * bar_w + gap;
  const double width = left + group_w * std::max<double>(1, static_cast<double>(datasets.size())) + 20;
  const double height = top + plot_h + 60 + 20 * static_cast<double>(series.size());
  static const char* palette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"};

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h
      << "\" stroke=\"#000\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double y = top + plot_h - plot_h * tick / 4.0;
    svg << "<text x=\"" << left - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << fmt("%.2f", tick / 4.0)
        << "</text>\n";
  }
  svg << "<text x=\"14\" y=\"" << top + plot_h / 2 << "\" transform=\"rotate(-90 14 " << top + plot_h / 2
      << ")\" text-anchor=\"middle\">accuracy</text>\n";

  for (std::size_t d = 0; d < datasets.size(); ++d) {
    const double x0 = left + gap / 2 + group_w * static_cast<double>(d);
    svg << "<g class=\"dataset\" id=\"group-" << xml_escape(datasets[d]) << "\">\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
      const auto it = std::find_if(points.begin(), points.end(), [&](const auto& p) {
        return p.dataset == datasets[d] && p.regime == series[s].first && p.label_fraction == series[s].second;
      });
      if (it == points.end()) continue;
      const double acc = std::clamp(it->accuracy, 0.0, 1.0);
      const double h = plot_h * acc;
      const double x = x0 + bar_w * static_cast<double>(s);
      svg << "  <rect x=\"" << x << "\" y=\"" << top + plot_h - h << "\" width=\"" << bar_w - 4 << "\" height=\""
          << h << "\" fill=\"" << palette[s % 6] << "\"><title>" << xml_escape(it->regime) << " "
          << fmt("%g", 100 * it->label_fraction) << "% labels: " << fmt("%.3f", it->accuracy)
          << "</title></rect>\n";
    }
    svg << "  <text x=\"" << x0 + bar_w * static_cast<double>(series.size()) / 2 << "\" y=\"" << top + plot_h + 16
        << "\" text-anchor=\"middle\">" << xml_escape(datasets[d]) << "</text>\n</g>\n";
  }

  for (std::size_t s = 0; s < series.size(); ++s) {
    const double y = top + plot_h + 36 + 20 * static_cast<double>(s);
    svg << "<rect x=\"" << left << "\" y=\"" << y - 10 << "\" width=\"12\" height=\"12\" fill=\"" << palette[s % 6]
        << "\"/><text x=\"" << left + 18 << "\" y=\"" << y << "\">" << xml_escape(series[s].first) << ", "
        << fmt("%g", 100 * series[s].second) << "% labels</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

ReportFiles emit_report(std::span<const fs::path> inputs, const fs::path& out_dir) {
  if (inputs.empty()) throw std::invalid_argument("report needs at least one results file");
  std::vector<std::string> problems;
  std::vector<ResultTable> tables;
  for (const auto& p : inputs) {
    if (!fs::is_regular_file(p)) {
      problems.push_back(p.string() + " (missing)");
      continue;
    }
    try {
      for (auto& t : tables_from_json(nlohmann::json::parse(read_text_file(p)))) tables.push_back(std::move(t));
    } catch (const std::exception& e) {
      problems.push_back(p.string() + " (" + e.what() + ")");
    }
  }
  if (!problems.empty()) {
    std::string msg = "unusable report inputs:";
    for (const auto& p : problems) msg += " " + p;
    throw std::runtime_error(msg);
  }

  ReportFiles files{out_dir / "tables.md", out_dir / "ablation.csv", out_dir / "ablation.svg"};
  const auto points = ablation_points(tables);
  const auto csv = ablation_csv(points);
  write_text_file(files.markdown, markdown_table(tables));
  write_text_file(files.csv, csv);
  write_text_file(files.svg, ablation_svg(csv));
  return files;
}

}  // namespace cdmp
