#include <gtest/gtest.h>

#include <cmath>

#include "cdmp/results.h"

using namespace cdmp;

namespace {

ResultTable classifier_table(const std::string& method, std::vector<double> acc) {
  ResultTable t;
  t.dataset = "hapt";
  t.experiment = "ss_frozen";
  t.method = method;
  for (std::size_t k = 0; k < acc.size(); ++k) {
    FoldResult f;
    f.fold = k;
    f.test_subjects = {static_cast<int>(k) + 1};
    f.metrics = {{kMetricAccuracy, acc[k]}, {kMetricF1Macro, acc[k] - 0.1}, {kMetricF1Weighted, acc[k]}};
    f.confusion = ConfusionMatrix{{3, 1}, {0, 4}};
    f.best_epoch = 7;
    f.train_windows = 100;
    t.folds.push_back(f);
  }
  t.recompute_summary();
  return t;
}

}  // namespace

TEST(ResultTableTest, SummaryUsesPopulationStd) {
  const auto t = classifier_table("SS", {0.8, 0.9, 1.0, 0.7, 0.6});
  const auto& s = t.summary.at(kMetricAccuracy);
  EXPECT_NEAR(s.mean, 0.8, 1e-12);
  EXPECT_NEAR(s.std, std::sqrt(0.02), 1e-12);  // sum of squares 0.1 over 5
  EXPECT_NEAR(t.summary.at(kMetricF1Macro).mean, 0.7, 1e-12);
}

TEST(ResultTableTest, MissingMetricInOneFoldIsAnError) {
  auto t = classifier_table("SS", {0.8, 0.9});
  t.folds[1].metrics.erase(kMetricF1Macro);
  EXPECT_THROW(t.recompute_summary(), std::logic_error);
}

TEST(ResultTableTest, JsonRoundTrip) {
  std::vector<ResultTable> tables{classifier_table("SS", {0.8, 0.9, 0.85}),
                                  classifier_table("FS", {0.7, 0.75, 0.72})};
  tables[1].experiment = "ablation";
  tables[1].label_fraction = 0.01;
  tables[1].folds[2].confusion.reset();
  const auto text = tables_to_json(tables);
  const auto back = tables_from_json(nlohmann::json::parse(text));
  EXPECT_EQ(back, tables);
  EXPECT_EQ(tables_to_json(back), text);
  EXPECT_EQ(tables_from_json(tables[0].to_json()).size(), 1u);
}

TEST(ResultTableTest, CompactSummaryOfPublishedHaptRow) {
  ResultTable t;
  t.summary[kMetricAccuracy] = {0.899, 0.034};
  t.summary[kMetricF1Macro] = {0.796, 0.0};
  t.summary[kMetricF1Weighted] = {0.898, 0.0};
  EXPECT_EQ(compact_summary(t), "0.899 ± 0.034 / 0.796 / 0.898");
}

TEST(ResultTableTest, MarkdownLayout) {
  auto ss = classifier_table("SS", {0.9, 0.9});
  auto fs = classifier_table("FS", {0.8, 0.6});
  fs.experiment = "ablation";
  fs.label_fraction = 0.01;
  ResultTable pre;
  pre.dataset = "ucihar";
  pre.method = "Pretext";
  pre.experiment = "pretext";
  FoldResult f;
  f.metrics[kMetricR2] = 0.682;
  pre.folds = {f};
  pre.recompute_summary();

  const std::vector<ResultTable> tables{ss, fs, pre};
  const auto md = markdown_table(tables);
  EXPECT_NE(md.find("| Dataset | Method | Accuracy | F1(m) | F1(w) |"), std::string::npos);
  EXPECT_NE(md.find("| hapt | SS | 0.900 ± 0.000 | 0.800 ± 0.000 | 0.900 ± 0.000 |"), std::string::npos);
  EXPECT_NE(md.find("| hapt | FS (1% labels) | 0.700 ± 0.100 |"), std::string::npos);
  EXPECT_NE(md.find("| Dataset | Method | R² |"), std::string::npos);
  EXPECT_NE(md.find("| ucihar | Pretext | 0.682 ± 0.000 |"), std::string::npos);

  const std::vector<ResultTable> bad{ResultTable{}};
  EXPECT_THROW(markdown_table(bad), std::invalid_argument);
}
