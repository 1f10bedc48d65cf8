// Acceptance gate. Prints one PASS/FAIL/SKIP line per criterion.
//
//   acceptance --group core   criteria 1, 2, 3, 8 (seconds, synthetic data)
//   acceptance --group data   criteria 4-7 (hours, real datasets)
//
// Exit status: 1 if any criterion fails, 77 if every selected criterion was
// skipped, else 0.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include "CLI11.hpp"
#include "cdmp/binary_io.h"
#include "cdmp/grad_check.h"
#include "cdmp/protocol.h"
#include "cdmp/random.h"
#include "../support/fixtures.h"
#include "../support/oracles.h"

namespace fs = std::filesystem;
using namespace cdmp;

namespace {

enum class Status { Pass, Fail, Skip };

struct Verdict {
  Status status;
  std::string detail;
};

Verdict pass(std::string d) { return {Status::Pass, std::move(d)}; }
Verdict fail(std::string d) { return {Status::Fail, std::move(d)}; }
Verdict skip(std::string d) { return {Status::Skip, std::move(d)}; }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string shape_str(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out;
}

void progress(const std::string& msg) { std::cerr << "  .. " << msg << "\n" << std::flush; }

// ---- 1. gradient oracle ------------------------------------------------------

TensorD random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  TensorD t(std::move(shape));
  for (auto& v : t.values()) v = lo + (hi - lo) * uniform_unit(rng);
  return t;
}

Verdict criterion_gradients() {
  constexpr double kTolerance = 1e-6;
  TensorD relu_in = random_tensor({40}, 6, 0.1, 1.0);
  for (std::size_t i = 0; i < relu_in.size(); i += 2) relu_in.values()[i] = -relu_in.values()[i];
  TensorD onehot({3, 6});
  onehot.at(0, 1) = onehot.at(1, 4) = onehot.at(2, 0) = 1;

  const std::vector<std::pair<std::string, GradCheckReport>> checks = {
      {"dense", grad_check(dense_layer(4, Activation::Linear), random_tensor({8}, 1))},
      {"dense+sigmoid", grad_check(dense_layer(4, Activation::Sigmoid), random_tensor({3, 8}, 2))},
      {"conv1d", grad_check(conv_layer(3, 3, Activation::Linear), random_tensor({16, 2}, 3))},
      {"conv1d batched", grad_check(conv_layer(3, 5, Activation::Linear), random_tensor({2, 12, 3}, 4))},
      {"maxpool", grad_check(pool_layer(), random_tensor({2, 11, 3}, 5))},
      {"relu", grad_check_activation(Activation::Relu, relu_in)},
      {"sigmoid", grad_check_activation(Activation::Sigmoid, random_tensor({30}, 7, -4, 4))},
      {"softmax", grad_check_activation(Activation::Softmax, random_tensor({3, 6}, 8, -3, 3))},
      {"mse", grad_check_loss(LossKind::Mse, random_tensor({4, 24}, 9), random_tensor({4, 24}, 10))},
      {"cross-entropy", grad_check_loss(LossKind::CrossEntropy, random_tensor({3, 6}, 11, 0.05, 0.95), onehot)},
  };
  double worst = 0;
  std::string worst_name;
  for (const auto& [name, r] : checks) {
    if (r.max_relative_error >= worst) {
      worst = r.max_relative_error;
      worst_name = name;
    }
  }
  const auto detail = std::to_string(checks.size()) + " checks, max rel err " + fmt("%.2e", worst) + " (" +
                      worst_name + "), tolerance 1e-6";
  return worst < kTolerance ? pass(detail) : fail(detail);
}

// ---- 2. shape conformance ---------------------------------------------------------

Verdict criterion_shapes() {
  const auto trace = build_pretext_spec().trace();
  const std::vector<Shape> expected = {{118, 128}, {116, 128}, {58, 128}, {56, 256}, {54, 256},
                                       {27, 256},  {25, 384},  {23, 384}, {11, 384}, {4224},
                                       {384},      {120},      {24}};
  std::vector<std::string> bad;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const std::string got = i < trace.size() ? shape_str(trace[i]) : "missing";
    if (got != shape_str(expected[i])) bad.push_back("row " + std::to_string(i + 1) + " " + got + " != " +
                                                     shape_str(expected[i]));
  }
  if (trace.size() != expected.size()) bad.push_back("trace has " + std::to_string(trace.size()) + " rows");
  if (bad.empty()) return pass("13/13 rows match, 120x3 -> ... -> 11x384 -> 4224 -> 24");
  std::string d;
  for (const auto& b : bad) d += b + "; ";
  return fail(d);
}

// ---- 3. protocol integrity ------------------------------------------------------------

std::string partition_problem(const FoldPlan& plan) {
  if (plan.folds.size() != 5) return "expected 5 folds";
  std::map<int, int> test_count, train_count;
  for (const auto& f : plan.folds) {
    for (int s : f.test_subjects) ++test_count[s];
    for (int s : f.train_subjects) ++train_count[s];
  }
  for (int s : plan.roster) {
    if (test_count[s] != 1 || train_count[s] != 4) return "subject " + std::to_string(s) + " misplaced";
  }
  if (test_count.size() != plan.roster.size()) return "test sets name subjects outside the roster";
  return {};
}

std::string normalisation_problem(const PreparedDataset& data, const FoldData& fd) {
  const std::set<int> test(fd.fold.test_subjects.begin(), fd.fold.test_subjects.end());
  for (const WindowSet* s : {&fd.train, &fd.val}) {
    for (int id : s->subject_ids) {
      if (test.contains(id)) return "test subject " + std::to_string(id) + " outside the test split";
    }
  }
  const std::unordered_set<std::string> names(fd.train.sources.begin(), fd.train.sources.end());
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < data.windows.size(); ++i) {
    if (names.contains(data.windows.sources[i])) idx.push_back(i);
  }
  if (idx.size() != fd.train.size()) return "training windows cannot be traced to the raw set";
  if (!(fit_minmax(data.windows.subset(idx)) == fd.stats)) return "normalisation not fitted on training windows";
  return {};
}

std::vector<ResultTable> desk_run(const PreparedDataset& data, const ProtocolConfig& cfg, ModelStore& store) {
  std::vector<ResultTable> all;
  for (auto e : {Experiment::Pretext, Experiment::SsFrozen, Experiment::SsFinetune, Experiment::Supervised,
                 Experiment::Ablation}) {
    for (auto& t : run_protocol(data, e, cfg, store)) all.push_back(std::move(t));
  }
  return all;
}

Verdict criterion_protocol() {
  const auto cfg = cdmp::testing::desk_protocol();
  std::vector<std::string> problems;
  std::size_t folds_checked = 0;
  for (auto id : {DatasetId::UciHar, DatasetId::MotionSense, DatasetId::Hapt}) {
    const auto& data = cdmp::testing::synthetic_prepared(id);
    const std::string name = data.info().name;
    progress("protocol integrity on synthetic " + name);

    const auto plan = make_user_folds(data.windows.subject_ids, cfg.seed);
    if (auto p = partition_problem(plan); !p.empty()) problems.push_back(name + ": " + p);
    for (const auto& fold : plan.folds) {
      if (auto p = normalisation_problem(data, prepare_fold(data, fold, cfg)); !p.empty()) {
        problems.push_back(name + " fold " + std::to_string(fold.index) + ": " + p);
      }
    }

    ModelStore first, second;
    const auto a = desk_run(data, cfg, first);
    const auto b = desk_run(data, cfg, second);
    if (tables_to_json(a) != tables_to_json(b)) problems.push_back(name + ": repeated run differs");
    for (const auto& t : a) {
      if (t.folds.size() != 5) problems.push_back(name + " " + t.method + ": " + std::to_string(t.folds.size()) + " folds");
    }

    const auto pre = build_pretext_spec(cfg.architecture);
    const auto har = build_har_spec(data.info().num_classes, cfg.architecture);
    for (std::size_t k = 0; k < 5; ++k) {
      const auto ref = conv_checksum(pre, first.load(k, kPretextModel, pre));
      if (conv_checksum(har, first.load(k, kFrozenModel, har)) != ref) {
        problems.push_back(name + " fold " + std::to_string(k) + ": frozen blocks changed");
      }
      if (conv_checksum(har, first.load(k, ablation_model_name("ss", cfg.label_fraction), har)) != ref) {
        problems.push_back(name + " fold " + std::to_string(k) + ": ablation blocks changed");
      }
      ++folds_checked;
    }
  }
  if (!problems.empty()) {
    std::string d;
    for (const auto& p : problems) d += p + "; ";
    return fail(d);
  }
  return pass("3 datasets, " + std::to_string(folds_checked) +
              " folds: partition, train-only normalisation, frozen blocks bit-identical, repeated runs byte-identical");
}

// ---- 8. metric oracles --------------------------------------------------------------

Verdict criterion_metrics() {
  std::mt19937_64 rng(8);
  double worst_cls = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t classes = 2 + uniform_below(11, rng);
    const std::size_t n = 1 + uniform_below(500, rng);
    const double skill = uniform_unit(rng);
    std::vector<int> pred(n), label(n);
    for (std::size_t i = 0; i < n; ++i) {
      label[i] = static_cast<int>(uniform_below(classes, rng));
      pred[i] = uniform_unit(rng) < skill ? label[i] : static_cast<int>(uniform_below(classes, rng));
    }
    const auto m = classification_metrics(pred, label, classes);
    const auto o = cdmp::testing::brute_force_metrics(pred, label);
    worst_cls = std::max({worst_cls, std::abs(m.accuracy - o.accuracy), std::abs(m.f1_macro - o.f1_macro),
                          std::abs(m.f1_weighted - o.f1_weighted)});
  }
  double worst_r2 = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + uniform_below(500, rng);
    std::vector<double> p(n), t(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = uniform_unit(rng) * 2 - 1;
      p[i] = t[i] + 0.5 * (uniform_unit(rng) - 0.5);
    }
    worst_r2 = std::max(worst_r2, std::abs(r2(std::span<const double>(p), std::span<const double>(t)) -
                                           cdmp::testing::direct_r2<double>(p, t)));
  }
  const auto d = "classification max dev " + fmt("%.1e", worst_cls) + " (tol 1e-9) over 1000 sets, r2 max dev " +
                 fmt("%.1e", worst_r2) + " (tol 1e-12) over 1000 vectors";
  return worst_cls < 1e-9 && worst_r2 < 1e-12 ? pass(d) : fail(d);
}

// ---- 4-7. real-data criteria ----------------------------------------------------------------

// Reference values these criteria are measured against.
constexpr double kRefR2 = 0.682;
constexpr double kRefUciAccuracy = 0.908;
constexpr double kRefMotionSenseF1w = 0.921;
constexpr double kRefHaptF1w = 0.898;
// The macro score counts as "substantially lower" when it trails the
// weighted score by at least this much (reference gap 0.102).
constexpr double kHaptMacroGap = 0.05;

class RealData {
 public:
  explicit RealData(fs::path work) : work_(std::move(work)) {}

  std::optional<fs::path> root(DatasetId id) const {
    const auto& name = dataset_info(id).name;
    std::string var = "CDMP_" + name + "_ROOT";
    std::transform(var.begin(), var.end(), var.begin(), [](unsigned char c) { return std::toupper(c); });
    if (const char* v = std::getenv(var.c_str()); v && *v) return fs::path(v);
    if (const char* base = std::getenv("CDMP_DATA_ROOT"); base && *base) {
      if (fs::is_directory(fs::path(base) / name)) return fs::path(base) / name;
    }
    return std::nullopt;
  }

  std::string missing(std::initializer_list<DatasetId> ids) const {
    std::string out;
    for (auto id : ids) {
      if (!root(id)) out += (out.empty() ? "" : ", ") + dataset_info(id).name;
    }
    return out.empty() ? out : "no data for " + out + " (set CDMP_DATA_ROOT or CDMP_<NAME>_ROOT)";
  }

  const PreparedDataset& data(DatasetId id) {
    auto it = data_.find(id);
    if (it == data_.end()) {
      progress("loading " + dataset_info(id).name + " from " + root(id)->string());
      it = data_.emplace(id, prepare_dataset(id, *root(id))).first;
    }
    return it->second;
  }

  // Results are cached on disk under a hash of the dataset and full config, so
  // criteria sharing a run (and reruns of the binary) do not retrain.
  const ResultTable& table(DatasetId id, Experiment e, const ProtocolConfig& cfg, const std::string& method,
                           const std::string& variant) {
    const auto& name = dataset_info(id).name;
    const auto key = sha256_hex(name + to_string(e) + protocol_to_json(cfg).dump()).substr(0, 16);
    auto& tables = results_[key];
    if (tables.empty()) {
      const auto file = work_ / "results" / (name + "_" + to_string(e) + "_" + key + ".json");
      if (fs::is_regular_file(file)) {
        tables = tables_from_json(nlohmann::json::parse(read_text_file(file)));
      } else {
        ModelStore store(work_ / "models" / name / variant);
        ProtocolHooks hooks;
        hooks.log = [](const std::string& m) { progress(m); };
        tables = run_protocol(data(id), e, cfg, store, {}, hooks);
        write_text_file(file, tables_to_json(tables));
      }
    }
    for (const auto& t : tables) {
      if (t.method == method) return t;
    }
    throw std::logic_error("no " + method + " table for " + name);
  }

 private:
  fs::path work_;
  std::map<DatasetId, PreparedDataset> data_;
  std::map<std::string, std::vector<ResultTable>> results_;
};

double mean_of(const ResultTable& t, const char* metric) { return t.summary.at(metric).mean; }

Verdict criterion_pretext(RealData& rd) {
  if (auto m = rd.missing({DatasetId::UciHar}); !m.empty()) return skip(m);
  ProtocolConfig reduced;
  reduced.pretext.epochs = 20;
  const double r20 = mean_of(rd.table(DatasetId::UciHar, Experiment::Pretext, reduced, "Pretext", "pretext20"), kMetricR2);
  const double r80 = mean_of(rd.table(DatasetId::UciHar, Experiment::Pretext, ProtocolConfig{}, "Pretext", "full"), kMetricR2);
  const bool ok = r20 >= 0.45 && std::abs(r80 - kRefR2) <= 0.10;
  return {ok ? Status::Pass : Status::Fail, "ucihar R2 20 epochs " + fmt("%.3f", r20) + " (>= 0.45), 80 epochs " +
                                                fmt("%.3f", r80) + " (0.682 +/- 0.10)"};
}

Verdict criterion_downstream(RealData& rd) {
  if (auto m = rd.missing({DatasetId::UciHar, DatasetId::MotionSense, DatasetId::Hapt}); !m.empty()) return skip(m);
  const ProtocolConfig cfg;
  const auto& uci = rd.table(DatasetId::UciHar, Experiment::SsFrozen, cfg, "SS", "full");
  const auto& ms = rd.table(DatasetId::MotionSense, Experiment::SsFrozen, cfg, "SS", "full");
  const auto& hapt = rd.table(DatasetId::Hapt, Experiment::SsFrozen, cfg, "SS", "full");
  const double acc = mean_of(uci, kMetricAccuracy);
  const double ms_f1w = mean_of(ms, kMetricF1Weighted);
  const double h_f1w = mean_of(hapt, kMetricF1Weighted), h_f1m = mean_of(hapt, kMetricF1Macro);
  const bool ok = std::abs(acc - kRefUciAccuracy) <= 0.05 && std::abs(ms_f1w - kRefMotionSenseF1w) <= 0.05 &&
                  std::abs(h_f1w - kRefHaptF1w) <= 0.06 && h_f1w - h_f1m >= kHaptMacroGap;
  return {ok ? Status::Pass : Status::Fail,
          "ucihar acc " + fmt("%.3f", acc) + " (0.908 +/- 0.05), motionsense F1w " + fmt("%.3f", ms_f1w) +
              " (0.921 +/- 0.05), hapt F1w " + fmt("%.3f", h_f1w) + " (0.898 +/- 0.06) F1m " + fmt("%.3f", h_f1m) +
              " (gap >= 0.05)"};
}

Verdict criterion_finetune(RealData& rd) {
  if (auto m = rd.missing({DatasetId::UciHar, DatasetId::MotionSense}); !m.empty()) return skip(m);
  const ProtocolConfig cfg;
  const auto& ms_ss = rd.table(DatasetId::MotionSense, Experiment::SsFinetune, cfg, "SS", "full");
  const auto& ms_ft = rd.table(DatasetId::MotionSense, Experiment::SsFinetune, cfg, "SS-FT", "full");
  const auto& uci_ss = rd.table(DatasetId::UciHar, Experiment::SsFinetune, cfg, "SS", "full");
  const auto& uci_ft = rd.table(DatasetId::UciHar, Experiment::SsFinetune, cfg, "SS-FT", "full");
  const double ms_a = mean_of(ms_ss, kMetricF1Weighted), ms_b = mean_of(ms_ft, kMetricF1Weighted);
  const double uci_delta = mean_of(uci_ft, kMetricAccuracy) - mean_of(uci_ss, kMetricAccuracy);
  const bool ok = ms_b >= ms_a && std::abs(uci_delta) <= 0.02;
  return {ok ? Status::Pass : Status::Fail, "motionsense F1w frozen " + fmt("%.3f", ms_a) + " -> finetuned " +
                                                fmt("%.3f", ms_b) + ", ucihar acc change " + fmt("%+.3f", uci_delta) +
                                                " (|.| <= 0.02)"};
}

Verdict criterion_label_fraction(RealData& rd) {
  if (auto m = rd.missing({DatasetId::UciHar, DatasetId::MotionSense, DatasetId::Hapt}); !m.empty()) return skip(m);
  ProtocolConfig cfg;
  cfg.label_fraction = 0.01;
  std::string detail;
  bool ok = true;
  for (auto id : {DatasetId::UciHar, DatasetId::MotionSense, DatasetId::Hapt}) {
    const auto& ss1 = rd.table(id, Experiment::Ablation, cfg, "SS", "full");
    const auto& fs1 = rd.table(id, Experiment::Ablation, cfg, "FS", "full");
    const auto& ss100 = rd.table(id, Experiment::SsFrozen, ProtocolConfig{}, "SS", "full");
    const auto& fs100 = rd.table(id, Experiment::Supervised, ProtocolConfig{}, "FS", "full");
    int wins = 0, close = 0;
    for (std::size_t k = 0; k < 5; ++k) {
      wins += ss1.folds[k].metrics.at(kMetricAccuracy) > fs1.folds[k].metrics.at(kMetricAccuracy);
      close += std::abs(ss100.folds[k].metrics.at(kMetricAccuracy) - fs100.folds[k].metrics.at(kMetricAccuracy)) <= 0.03;
    }
    ok &= wins >= 4 && close >= 4;
    detail += dataset_info(id).name + " SS>FS at 1% in " + std::to_string(wins) + "/5, |SS-FS|<=0.03 at 100% in " +
              std::to_string(close) + "/5; ";
  }
  return {ok ? Status::Pass : Status::Fail, detail + "need 4/5 each"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria", "acceptance"};
  std::string group = "core";
  std::string work = (fs::temp_directory_path() / "cdmp_acceptance").string();
  app.add_option("--group", group, "core or data")->check(CLI::IsMember({"core", "data"}));
  app.add_option("--work", work, "Directory for data-criteria checkpoints and cached results");
  CLI11_PARSE(app, argc, argv);
  if (const char* w = std::getenv("CDMP_ACCEPTANCE_WORK"); w && *w) work = w;

  RealData real(work);
  std::vector<std::pair<std::string, std::function<Verdict()>>> criteria;
  if (group == "core") {
    criteria = {{"1 gradient oracle", criterion_gradients},
                {"2 shape conformance", criterion_shapes},
                {"3 protocol integrity", criterion_protocol},
                {"8 metric oracles", criterion_metrics}};
  } else {
    criteria = {{"4 pretext quality", [&] { return criterion_pretext(real); }},
                {"5 downstream quality", [&] { return criterion_downstream(real); }},
                {"6 fine-tuning direction", [&] { return criterion_finetune(real); }},
                {"7 label-fraction ordering", [&] { return criterion_label_fraction(real); }}};
  }

  int failed = 0, skipped = 0;
  for (const auto& [name, check] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = fail(std::string("error: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const char* tag = v.status == Status::Pass ? "PASS" : v.status == Status::Fail ? "FAIL" : "SKIP";
    std::cout << "[" << tag << "] criterion " << name << ": " << v.detail << " [" << fmt("%.1f", secs) << "s]\n"
              << std::flush;
    failed += v.status == Status::Fail;
    skipped += v.status == Status::Skip;
  }
  if (failed) return 1;
  if (skipped == static_cast<int>(criteria.size())) return 77;
  return 0;
}
