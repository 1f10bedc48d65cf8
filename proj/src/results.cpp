#include "cdmp/results.h"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

namespace cdmp {

void ResultTable::recompute_summary() {
  summary.clear();
  std::set<std::string> names;
  for (const auto& f : folds) {
    for (const auto& [name, value] : f.metrics) names.insert(name);
  }
  for (const auto& name : names) {
    std::vector<double> values;
    for (const auto& f : folds) {
      const auto it = f.metrics.find(name);
      if (it == f.metrics.end()) {
        throw std::logic_error("fold " + std::to_string(f.fold) + " lacks metric " + name);
      }
      values.push_back(it->second);
    }
    double mean = 0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    summary[name] = {mean, std::sqrt(var)};
  }
}

nlohmann::json ResultTable::to_json() const {
  nlohmann::json folds_json = nlohmann::json::array();
  for (const auto& f : folds) {
    nlohmann::json j = {{"fold", f.fold},
                        {"test_subjects", f.test_subjects},
                        {"metrics", f.metrics},
                        {"best_epoch", f.best_epoch},
                        {"train_windows", f.train_windows}};
    if (f.confusion) j["confusion"] = *f.confusion;
    folds_json.push_back(std::move(j));
  }
  nlohmann::json summary_json = nlohmann::json::object();
  for (const auto& [name, s] : summary) summary_json[name] = {{"mean", s.mean}, {"std", s.std}};
  return {{"dataset", dataset},       {"experiment", experiment},   {"method", method},
          {"label_fraction", label_fraction}, {"folds", std::move(folds_json)},
          {"summary", std::move(summary_json)}};
}

ResultTable ResultTable::from_json(const nlohmann::json& j) {
  ResultTable t;
  t.dataset = j.at("dataset").get<std::string>();
  t.experiment = j.at("experiment").get<std::string>();
  t.method = j.at("method").get<std::string>();
  t.label_fraction = j.value("label_fraction", 1.0);
  for (const auto& f : j.at("folds")) {
    FoldResult r;
    r.fold = f.at("fold").get<std::size_t>();
    r.test_subjects = f.at("test_subjects").get<std::vector<int>>();
    r.metrics = f.at("metrics").get<std::map<std::string, double>>();
    r.best_epoch = f.value("best_epoch", std::size_t{0});
    r.train_windows = f.value("train_windows", std::size_t{0});
    if (f.contains("confusion")) r.confusion = f.at("confusion").get<ConfusionMatrix>();
    t.folds.push_back(std::move(r));
  }
  for (const auto& [name, s] : j.at("summary").items()) {
    t.summary[name] = {s.at("mean").get<double>(), s.at("std").get<double>()};
  }
  return t;
}

std::string format_mean_std(const MetricSummary& s) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f ± %.3f", s.mean, s.std);
  return buf;
}

namespace {

const MetricSummary& metric(const ResultTable& t, const char* name) {
  const auto it = t.summary.find(name);
  if (it == t.summary.end()) {
    throw std::invalid_argument(t.dataset + " " + t.method + " result has no " + name + " summary");
  }
  return it->second;
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string row_label(const ResultTable& t) {
  std::string label = t.method;
  if (t.experiment == "ablation") {
    char buf[32];
    std::snprintf(buf, sizeof buf, " (%g%% labels)", 100 * t.label_fraction);
    label += buf;
  }
  return label;
}

}  // namespace

std::string compact_summary(const ResultTable& t) {
  return format_mean_std(metric(t, kMetricAccuracy)) + " / " + fixed3(metric(t, kMetricF1Macro).mean) +
         " / " + fixed3(metric(t, kMetricF1Weighted).mean);
}

std::string markdown_table(std::span<const ResultTable> tables) {
  std::ostringstream out;
  bool pretext_header = false, classifier_header = false;
  for (const auto& t : tables) {
    if (t.summary.contains(kMetricR2)) {
      if (!pretext_header) {
        if (classifier_header) out << "\n";
        out << "| Dataset | Method | R² |\n|---|---|---|\n";
        pretext_header = true;
        classifier_header = false;
      }
      out << "| " << t.dataset << " | " << row_label(t) << " | " << format_mean_std(metric(t, kMetricR2))
          << " |\n";
    } else {
      if (!classifier_header) {
        if (pretext_header) out << "\n";
        out << "| Dataset | Method | Accuracy | F1(m) | F1(w) |\n|---|---|---|---|---|\n";
        classifier_header = true;
        pretext_header = false;
      }
      out << "| " << t.dataset << " | " << row_label(t) << " | "
          << format_mean_std(metric(t, kMetricAccuracy)) << " | "
          << format_mean_std(metric(t, kMetricF1Macro)) << " | "
          << format_mean_std(metric(t, kMetricF1Weighted)) << " |\n";
    }
  }
  return out.str();
}

std::string tables_to_json(std::span<const ResultTable> tables) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : tables) arr.push_back(t.to_json());
  return arr.dump(2) + "\n";
}

std::vector<ResultTable> tables_from_json(const nlohmann::json& j) {
  std::vector<ResultTable> out;
  if (j.is_array()) {
    for (const auto& t : j) out.push_back(ResultTable::from_json(t));
  } else {
    out.push_back(ResultTable::from_json(j));
  }
  return out;
}

}  // namespace cdmp
