#include "cdmp/protocol.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>
#include <unordered_set>

#include "cdmp/binary_io.h"
#include "cdmp/random.h"

namespace fs = std::filesystem;

namespace cdmp {

namespace {

constexpr std::uint64_t kFoldStream = 100;
constexpr std::uint64_t kValidationStream = 101;

// Stage streams under derive_seed(seed, {fold, stage}).
enum Stage : std::uint64_t {
  kStagePretext = 1,
  kStageFrozen = 2,
  kStageFinetune = 3,
  kStageBaseline = 4,
  kStageAblation = 5,
  kStageHeadInit = 6,
};

std::string join(const std::vector<int>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) s += (i ? "," : "") + std::to_string(ids[i]);
  return s;
}

}  // namespace

// ---- folds ------------------------------------------------------------------------

void FoldPlan::validate() const {
  std::set<int> seen;
  for (const auto& f : folds) {
    for (int s : f.test_subjects) {
      if (!seen.insert(s).second) {
        throw std::logic_error("subject " + std::to_string(s) + " is in more than one test set");
      }
    }
    std::vector<int> complement;
    std::set_difference(roster.begin(), roster.end(), f.test_subjects.begin(), f.test_subjects.end(),
                        std::back_inserter(complement));
    if (complement != f.train_subjects) {
      throw std::logic_error("fold " + std::to_string(f.index) +
                             " training subjects are not the complement of its test subjects");
    }
  }
  if (!std::equal(seen.begin(), seen.end(), roster.begin(), roster.end())) {
    throw std::logic_error("test sets do not cover the subject roster");
  }
}

FoldPlan make_user_folds(std::span<const int> subject_ids, std::uint64_t seed, std::size_t k) {
  if (k < 2) throw std::invalid_argument("need at least 2 folds, got " + std::to_string(k));
  FoldPlan plan;
  plan.seed = seed;
  plan.roster.assign(subject_ids.begin(), subject_ids.end());
  std::sort(plan.roster.begin(), plan.roster.end());
  plan.roster.erase(std::unique(plan.roster.begin(), plan.roster.end()), plan.roster.end());
  const std::size_t n = plan.roster.size();
  if (n < k) {
    throw std::invalid_argument("user-split folds need at least " + std::to_string(k) +
                                " subjects, got " + std::to_string(n));
  }

  std::mt19937_64 rng(derive_seed(seed, {kFoldStream}));
  const auto order = random_permutation(n, rng);
  std::size_t next = 0;
  for (std::size_t f = 0; f < k; ++f) {
    Fold fold;
    fold.index = f;
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) fold.test_subjects.push_back(plan.roster[order[next++]]);
    std::sort(fold.test_subjects.begin(), fold.test_subjects.end());
    std::set_difference(plan.roster.begin(), plan.roster.end(), fold.test_subjects.begin(),
                        fold.test_subjects.end(), std::back_inserter(fold.train_subjects));
    fold.validation_seed = derive_seed(seed, {f, kValidationStream});
    plan.folds.push_back(std::move(fold));
  }
  plan.validate();
  return plan;
}

// ---- configuration -------------------------------------------------------------------

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::Pretext: return "pretext";
    case Experiment::SsFrozen: return "ss_frozen";
    case Experiment::SsFinetune: return "ss_finetune";
    case Experiment::Supervised: return "supervised";
    case Experiment::Ablation: return "ablation";
  }
  throw std::logic_error("bad experiment");
}

Experiment experiment_from_string(const std::string& name) {
  for (auto e : {Experiment::Pretext, Experiment::SsFrozen, Experiment::SsFinetune,
                 Experiment::Supervised, Experiment::Ablation}) {
    if (to_string(e) == name) return e;
  }
  if (name == "ablation_1pct") return Experiment::Ablation;
  throw std::invalid_argument("unknown experiment '" + name + "'");
}

void ProtocolConfig::validate() const {
  const auto expect = [](const TrainConfig& c, Regime r, const char* slot) {
    c.validate();
    if (c.regime != r) {
      throw std::invalid_argument(std::string(slot) + " config must use regime " + to_string(r) +
                                  ", got " + to_string(c.regime));
    }
  };
  expect(pretext, Regime::Pretext, "pretext");
  expect(downstream, Regime::DownstreamFrozen, "downstream");
  expect(finetune, Regime::Finetune, "finetune");
  expect(baseline, Regime::SupervisedBaseline, "baseline");
  if (!(validation_fraction >= 0 && validation_fraction < 1)) {
    throw std::invalid_argument("validation_fraction must be in [0, 1), got " +
                                std::to_string(validation_fraction));
  }
  if (!(label_fraction > 0 && label_fraction <= 1)) {
    throw std::invalid_argument("label_fraction must be in (0, 1], got " + std::to_string(label_fraction));
  }
  if (folds < 2) throw std::invalid_argument("folds must be at least 2");
  for (auto f : only_folds) {
    if (f >= folds) {
      throw std::invalid_argument("only_folds entry " + std::to_string(f) + " is out of range for " +
                                  std::to_string(folds) + " folds");
    }
  }
}

std::vector<std::size_t> ProtocolConfig::selected_folds() const {
  if (!only_folds.empty()) {
    std::vector<std::size_t> out(only_folds);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
  std::vector<std::size_t> out(folds);
  for (std::size_t i = 0; i < folds; ++i) out[i] = i;
  return out;
}

namespace {

// Stage seeds come from the protocol seed, so per-stage seeds are not part of
// the protocol schema.
nlohmann::json stage_json(const TrainConfig& c) {
  auto j = config_to_json(c);
  j.erase("seed");
  return j;
}

TrainConfig stage_from_json(const nlohmann::json& j, const TrainConfig& base, const char* slot) {
  if (j.is_object() && j.contains("seed")) {
    throw std::invalid_argument(std::string(slot) +
                                ": per-stage seeds are derived from the protocol seed; remove 'seed'");
  }
  try {
    return config_from_json(j, base);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string(slot) + ": " + e.what());
  }
}

}  // namespace

nlohmann::json protocol_to_json(const ProtocolConfig& c) {
  return {{"architecture", options_to_json(c.architecture)},
          {"pretext", stage_json(c.pretext)},
          {"downstream", stage_json(c.downstream)},
          {"finetune", stage_json(c.finetune)},
          {"baseline", stage_json(c.baseline)},
          {"validation_fraction", c.validation_fraction},
          {"validation_by_subject", c.validation_by_subject},
          {"label_fraction", c.label_fraction},
          {"seed", c.seed},
          {"folds", c.folds},
          {"only_folds", c.only_folds}};
}

ProtocolConfig protocol_from_json(const nlohmann::json& j, ProtocolConfig c) {
  if (!j.is_object()) throw std::invalid_argument("protocol config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "architecture") {
        auto merged = options_to_json(c.architecture);
        if (!value.is_object()) throw std::invalid_argument("must be an object");
        for (const auto& [k, v] : value.items()) {
          if (!merged.contains(k)) throw std::invalid_argument("unknown architecture key '" + k + "'");
          merged[k] = v;
        }
        c.architecture = options_from_json(merged);
      } else if (key == "pretext") {
        c.pretext = stage_from_json(value, c.pretext, "pretext");
      } else if (key == "downstream") {
        c.downstream = stage_from_json(value, c.downstream, "downstream");
      } else if (key == "finetune") {
        c.finetune = stage_from_json(value, c.finetune, "finetune");
      } else if (key == "baseline") {
        c.baseline = stage_from_json(value, c.baseline, "baseline");
      } else if (key == "validation_fraction") {
        c.validation_fraction = value.get<double>();
      } else if (key == "validation_by_subject") {
        c.validation_by_subject = value.get<bool>();
      } else if (key == "label_fraction") {
        c.label_fraction = value.get<double>();
      } else if (key == "seed") {
        c.seed = value.get<std::uint64_t>();
      } else if (key == "folds") {
        c.folds = value.get<std::size_t>();
      } else if (key == "only_folds") {
        c.only_folds = value.get<std::vector<std::size_t>>();
      } else {
        throw std::invalid_argument("unknown key");
      }
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument("config key '" + key + "': " + e.what());
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config key '" + key + "': " + e.what());
    }
  }
  c.validate();
  return c;
}

// ---- per-fold data ---------------------------------------------------------------------

WindowSet labeled_only(const WindowSet& set) {
  const auto idx = set.labeled_indices();
  return set.subset(idx);
}

FoldData prepare_fold(const PreparedDataset& data, const Fold& fold, const ProtocolConfig& config) {
  const WindowSet& all = data.windows;
  const std::unordered_set<int> test_users(fold.test_subjects.begin(), fold.test_subjects.end());
  const std::unordered_set<int> train_users(fold.train_subjects.begin(), fold.train_subjects.end());

  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const int s = all.subject_ids[i];
    if (test_users.contains(s)) {
      test_idx.push_back(i);
    } else if (train_users.contains(s)) {
      train_idx.push_back(i);
    } else {
      throw std::invalid_argument("window " + all.sources[i] + " belongs to subject " +
                                  std::to_string(s) + ", who is in neither split of fold " +
                                  std::to_string(fold.index));
    }
  }
  if (train_idx.empty()) throw std::invalid_argument("fold " + std::to_string(fold.index) + " has no training windows");
  if (test_idx.empty()) throw std::invalid_argument("fold " + std::to_string(fold.index) + " has no test windows");

  // Validation windows come out of the training users only.
  std::mt19937_64 rng(fold.validation_seed);
  std::vector<std::size_t> fit_idx, val_idx;
  if (config.validation_by_subject) {
    const std::size_t n = fold.train_subjects.size();
    std::size_t take = static_cast<std::size_t>(std::llround(config.validation_fraction * n));
    if (config.validation_fraction > 0) take = std::clamp<std::size_t>(take, 1, n - 1);
    const auto order = random_permutation(n, rng);
    std::unordered_set<int> val_users;
    for (std::size_t i = 0; i < take; ++i) val_users.insert(fold.train_subjects[order[i]]);
    for (auto i : train_idx) (val_users.contains(all.subject_ids[i]) ? val_idx : fit_idx).push_back(i);
  } else {
    const std::size_t n = train_idx.size();
    const auto take = static_cast<std::size_t>(std::llround(config.validation_fraction * n));
    const auto order = random_permutation(n, rng);
    std::vector<char> is_val(n, 0);
    for (std::size_t i = 0; i < std::min(take, n - 1); ++i) is_val[order[i]] = 1;
    for (std::size_t i = 0; i < n; ++i) (is_val[i] ? val_idx : fit_idx).push_back(train_idx[i]);
  }

  const WindowSet raw_train = all.subset(fit_idx);
  for (int s : raw_train.subject_ids) {
    if (test_users.contains(s)) throw std::logic_error("test subject " + std::to_string(s) + " leaked into training");
  }
  for (auto i : val_idx) {
    if (test_users.contains(all.subject_ids[i])) {
      throw std::logic_error("test subject " + std::to_string(all.subject_ids[i]) + " leaked into validation");
    }
  }

  FoldData out;
  out.fold = fold;
  out.stats = fit_minmax(raw_train);
  out.train = apply_minmax(raw_train, out.stats);
  out.val = apply_minmax(all.subset(val_idx), out.stats);
  out.test = apply_minmax(all.subset(test_idx), out.stats);
  return out;
}

// ---- model storage ---------------------------------------------------------------------

ModelStore::ModelStore(fs::path dir) : dir_(std::move(dir)) {}

fs::path ModelStore::path(std::size_t fold, const std::string& name) const {
  return dir_ / ("fold" + std::to_string(fold)) / (name + ".ckpt");
}

namespace {
std::string memory_key(std::size_t fold, const std::string& name) {
  return std::to_string(fold) + "/" + name;
}
fs::path sidecar(fs::path ckpt, const char* suffix) { return ckpt.replace_extension(suffix); }
}  // namespace

bool ModelStore::has(std::size_t fold, const std::string& name) const {
  if (dir_.empty()) return memory_.contains(memory_key(fold, name));
  return fs::is_regular_file(path(fold, name));
}

ModelParams ModelStore::load(std::size_t fold, const std::string& name, const ArchitectureSpec& spec) const {
  if (dir_.empty()) {
    const auto it = memory_.find(memory_key(fold, name));
    if (it == memory_.end()) {
      throw std::runtime_error("no checkpoint '" + name + "' for fold " + std::to_string(fold));
    }
    if (it->second.fingerprint != spec.fingerprint()) {
      throw std::runtime_error("checkpoint '" + name + "' does not match architecture " + spec.name);
    }
    return it->second;
  }
  const auto p = path(fold, name);
  if (!fs::is_regular_file(p)) throw std::runtime_error("missing checkpoint: " + p.string());
  return load_model(p, spec);
}

void ModelStore::save(std::size_t fold, const std::string& name, const ArchitectureSpec& spec,
                      const ModelParams& params, const TrainHistory& history,
                      const nlohmann::json& metadata) {
  if (dir_.empty()) {
    memory_[memory_key(fold, name)] = params;
    best_epochs_[memory_key(fold, name)] = history.best_epoch;
    return;
  }
  const auto p = path(fold, name);
  fs::create_directories(p.parent_path());
  auto meta = metadata;
  meta["best_epoch"] = history.best_epoch;
  meta["fold"] = fold;
  save_model(p, spec, params, meta);
  write_text_file(sidecar(p, ".history.jsonl"), history.to_jsonl());
  write_text_file(sidecar(p, ".json"), meta.dump(2) + "\n");
}

std::optional<std::size_t> ModelStore::best_epoch(std::size_t fold, const std::string& name) const {
  if (dir_.empty()) {
    const auto it = best_epochs_.find(memory_key(fold, name));
    if (it == best_epochs_.end()) return std::nullopt;
    return it->second;
  }
  const auto p = sidecar(path(fold, name), ".json");
  if (!fs::is_regular_file(p)) return std::nullopt;
  const auto j = nlohmann::json::parse(read_text_file(p));
  return j.value("best_epoch", std::size_t{0});
}

std::string ablation_model_name(const std::string& arm, double fraction) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "ablation_%s_f%g", arm.c_str(), fraction);
  return buf;
}

// ---- evaluation --------------------------------------------------------------------------

double pretext_r2(const ArchitectureSpec& spec, const ModelParams& params, const WindowSet& set) {
  const auto batch = make_pretext_batch(set, spec.horizon);
  const Tensor pred = model_forward(spec, params, batch.inputs);
  return r2(pred, batch.targets);
}

ClassificationReport evaluate_classifier(const ArchitectureSpec& spec, const ModelParams& params,
                                         const WindowSet& set, bool masked_input) {
  const WindowSet labeled = labeled_only(set);
  if (labeled.empty()) throw std::invalid_argument("no labelled windows to evaluate");
  const Tensor inputs = masked_input ? mask_z_tail(labeled.windows, spec.horizon) : labeled.windows;
  const Tensor scores = model_forward(spec, params, inputs);
  const auto preds = argmax_rows(scores);
  return classification_metrics(preds, labeled.labels, spec.output_shape().back());
}

namespace {

FoldResult classifier_result(const Fold& fold, const ClassificationReport& rep, std::size_t best_epoch,
                             std::size_t train_windows) {
  FoldResult r;
  r.fold = fold.index;
  r.test_subjects = fold.test_subjects;
  r.metrics = {{kMetricAccuracy, rep.accuracy},
               {kMetricF1Macro, rep.f1_macro},
               {kMetricF1Weighted, rep.f1_weighted}};
  r.confusion = rep.confusion;
  r.best_epoch = best_epoch;
  r.train_windows = train_windows;
  return r;
}

ResultTable make_table(const PreparedDataset& data, const std::string& experiment,
                       const std::string& method, double fraction) {
  ResultTable t;
  t.dataset = data.info().name;
  t.experiment = experiment;
  t.method = method;
  t.label_fraction = fraction;
  return t;
}

class Runner {
 public:
  Runner(const PreparedDataset& data, const ProtocolConfig& config, ModelStore& store,
         const ProtocolOptions& options, const ProtocolHooks& hooks)
      : data_(data),
        config_(config),
        store_(store),
        options_(options),
        hooks_(hooks),
        pretext_spec_(build_pretext_spec(config.architecture)),
        har_spec_(build_har_spec(data.info().num_classes, config.architecture)) {}

  const ArchitectureSpec& pretext_spec() const { return pretext_spec_; }
  const ArchitectureSpec& har_spec() const { return har_spec_; }

  void log(const std::string& msg) const {
    if (hooks_.log) hooks_.log(msg);
  }

  TrainConfig stage_config(TrainConfig c, std::size_t fold, Stage stage) const {
    c.seed = derive_seed(config_.seed, {fold, stage});
    return c;
  }

  EpochCallback epoch_hook(std::size_t fold, const std::string& stage) const {
    if (!hooks_.on_epoch) return {};
    return [this, fold, stage](const EpochRecord& r) { hooks_.on_epoch(fold, stage, r); };
  }

  void require(std::size_t fold, const std::string& name) const {
    if (!options_.train_missing_prerequisites && !store_.has(fold, name)) {
      throw std::runtime_error("missing prerequisite checkpoint: " +
                               (store_.path(fold, name).empty() ? name : store_.path(fold, name).string()));
    }
  }

  ModelParams pretext_model(const FoldData& fd, bool force) {
    const auto k = fd.fold.index;
    if (!force) {
      require(k, kPretextModel);
      if (store_.has(k, kPretextModel)) return store_.load(k, kPretextModel, pretext_spec_);
    }
    log("fold " + std::to_string(k) + ": pretext training on " + std::to_string(fd.train.size()) +
        " windows");
    const auto cfg = stage_config(config_.pretext, k, kStagePretext);
    auto res = train_pretext(pretext_spec_, make_pretext_batch(fd.train, pretext_spec_.horizon),
                             make_pretext_batch(fd.val, pretext_spec_.horizon), cfg, nullptr,
                             epoch_hook(k, kPretextModel));
    store_.save(k, kPretextModel, pretext_spec_, res.params, res.history,
                {{"stage", kPretextModel}, {"train", config_to_json(cfg)}});
    return std::move(res.params);
  }

  ModelParams transferred(const FoldData& fd) {
    const auto pre = pretext_model(fd, false);
    return transfer_and_freeze(pretext_spec_, pre, har_spec_,
                               derive_seed(config_.seed, {fd.fold.index, kStageHeadInit}));
  }

  struct Trained {
    ModelParams params;
    std::size_t best_epoch = 0;
    std::size_t train_windows = 0;
  };

  Trained train_classifier(const FoldData& fd, const std::string& name, TrainConfig cfg,
                           const ModelParams* initial) {
    const auto k = fd.fold.index;
    const WindowSet train = labeled_only(fd.train);
    const WindowSet val = labeled_only(fd.val);
    const auto used = downstream_training_set(train, cfg).size();
    log("fold " + std::to_string(k) + ": " + name + " on " + std::to_string(used) + " labelled windows");
    auto res = train_downstream(har_spec_, train, val, cfg, initial, epoch_hook(k, name));
    store_.save(k, name, har_spec_, res.params, res.history,
                {{"stage", name}, {"train", config_to_json(cfg)}});
    return {std::move(res.params), res.history.best_epoch, used};
  }

  Trained frozen_model(const FoldData& fd, bool force) {
    const auto k = fd.fold.index;
    if (!force) {
      require(k, kFrozenModel);
      if (store_.has(k, kFrozenModel)) {
        return {store_.load(k, kFrozenModel, har_spec_), store_.best_epoch(k, kFrozenModel).value_or(0),
                labeled_only(fd.train).size()};
      }
    }
    const auto init = transferred(fd);
    return train_classifier(fd, kFrozenModel, stage_config(config_.downstream, k, kStageFrozen), &init);
  }

  FoldResult evaluate(const FoldData& fd, const Trained& t, bool masked) const {
    return classifier_result(fd.fold, evaluate_classifier(har_spec_, t.params, fd.test, masked), t.best_epoch,
                             t.train_windows);
  }

 private:
  const PreparedDataset& data_;
  const ProtocolConfig& config_;
  ModelStore& store_;
  const ProtocolOptions& options_;
  const ProtocolHooks& hooks_;
  ArchitectureSpec pretext_spec_;
  ArchitectureSpec har_spec_;
};

}  // namespace

std::vector<ResultTable> run_protocol(const PreparedDataset& data, Experiment experiment,
                                      const ProtocolConfig& config, ModelStore& store,
                                      const ProtocolOptions& options, const ProtocolHooks& hooks) {
  config.validate();
  if (data.layout.length != config.architecture.layout.length ||
      data.layout.horizon != config.architecture.layout.horizon) {
    throw std::invalid_argument("dataset windows do not match the architecture's window layout");
  }
  const auto plan = make_user_folds(data.windows.subject_ids, config.seed, config.folds);
  Runner run(data, config, store, options, hooks);
  const std::string exp = to_string(experiment);

  std::vector<ResultTable> tables;
  switch (experiment) {
    case Experiment::Pretext:
      tables.push_back(make_table(data, exp, "Pretext", 1.0));
      break;
    case Experiment::SsFrozen:
      tables.push_back(make_table(data, exp, "SS", 1.0));
      break;
    case Experiment::SsFinetune:
      tables.push_back(make_table(data, exp, "SS", 1.0));
      tables.push_back(make_table(data, exp, "SS-FT", 1.0));
      break;
    case Experiment::Supervised:
      tables.push_back(make_table(data, exp, "FS", 1.0));
      break;
    case Experiment::Ablation:
      tables.push_back(make_table(data, exp, "SS", config.label_fraction));
      tables.push_back(make_table(data, exp, "FS", config.label_fraction));
      break;
  }

  for (auto k : config.selected_folds()) {
    const Fold& fold = plan.folds.at(k);
    run.log("fold " + std::to_string(k) + ": test subjects " + join(fold.test_subjects));
    const FoldData fd = prepare_fold(data, fold, config);

    switch (experiment) {
      case Experiment::Pretext: {
        const auto params = run.pretext_model(fd, true);
        FoldResult r;
        r.fold = k;
        r.test_subjects = fold.test_subjects;
        r.metrics[kMetricR2] = pretext_r2(run.pretext_spec(), params, fd.test);
        r.best_epoch = store.best_epoch(k, kPretextModel).value_or(0);
        r.train_windows = fd.train.size();
        tables[0].folds.push_back(std::move(r));
        break;
      }
      case Experiment::SsFrozen: {
        const auto t = run.frozen_model(fd, true);
        tables[0].folds.push_back(run.evaluate(fd, t, config.downstream.masked_input));
        break;
      }
      case Experiment::SsFinetune: {
        const auto frozen = run.frozen_model(fd, false);
        tables[0].folds.push_back(run.evaluate(fd, frozen, config.downstream.masked_input));
        const auto ft = run.train_classifier(fd, kFinetuneModel,
                                             run.stage_config(config.finetune, k, kStageFinetune),
                                             &frozen.params);
        tables[1].folds.push_back(run.evaluate(fd, ft, config.finetune.masked_input));
        break;
      }
      case Experiment::Supervised: {
        const auto t = run.train_classifier(fd, kBaselineModel,
                                            run.stage_config(config.baseline, k, kStageBaseline), nullptr);
        tables[0].folds.push_back(run.evaluate(fd, t, config.baseline.masked_input));
        break;
      }
      case Experiment::Ablation: {
        // Both arms share one seed, hence one stratified label subset.
        const auto seed = derive_seed(config.seed, {k, kStageAblation});
        TrainConfig ss = config.downstream;
        TrainConfig fs = config.baseline;
        ss.seed = fs.seed = seed;
        ss.label_fraction = fs.label_fraction = config.label_fraction;
        const auto init = run.transferred(fd);
        const auto a = run.train_classifier(fd, ablation_model_name("ss", config.label_fraction), ss, &init);
        const auto b = run.train_classifier(fd, ablation_model_name("fs", config.label_fraction), fs, nullptr);
        tables[0].folds.push_back(run.evaluate(fd, a, ss.masked_input));
        tables[1].folds.push_back(run.evaluate(fd, b, fs.masked_input));
        break;
      }
    }
  }
  for (auto& t : tables) t.recompute_summary();
  return tables;
}

std::vector<ResultTable> evaluate_saved(const PreparedDataset& data, const ProtocolConfig& config,
                                        const ModelStore& store, const ProtocolHooks& hooks) {
  config.validate();
  const auto plan = make_user_folds(data.windows.subject_ids, config.seed, config.folds);
  const auto folds = config.selected_folds();
  const auto pretext_spec = build_pretext_spec(config.architecture);
  const auto har_spec = build_har_spec(data.info().num_classes, config.architecture);

  struct Kind {
    std::string name, experiment, method;
    double fraction;
    bool pretext;
    bool masked;
  };
  const std::vector<Kind> kinds = {
      {kPretextModel, "pretext", "Pretext", 1.0, true, false},
      {kFrozenModel, "ss_frozen", "SS", 1.0, false, config.downstream.masked_input},
      {kFinetuneModel, "ss_finetune", "SS-FT", 1.0, false, config.finetune.masked_input},
      {kBaselineModel, "supervised", "FS", 1.0, false, config.baseline.masked_input},
      {ablation_model_name("ss", config.label_fraction), "ablation", "SS", config.label_fraction, false,
       config.downstream.masked_input},
      {ablation_model_name("fs", config.label_fraction), "ablation", "FS", config.label_fraction, false,
       config.baseline.masked_input},
  };

  std::vector<const Kind*> present;
  for (const auto& kind : kinds) {
    if (std::all_of(folds.begin(), folds.end(), [&](auto k) { return store.has(k, kind.name); })) {
      present.push_back(&kind);
    }
  }
  if (present.empty()) {
    throw std::runtime_error("no checkpoint to evaluate; expected " +
                             store.path(folds.front(), kFrozenModel).string());
  }

  std::vector<ResultTable> tables;
  for (const auto* kind : present) tables.push_back(make_table(data, kind->experiment, kind->method, kind->fraction));
  for (auto k : folds) {
    const FoldData fd = prepare_fold(data, plan.folds.at(k), config);
    if (hooks.log) hooks.log("fold " + std::to_string(k) + ": evaluating " + std::to_string(present.size()) + " models");
    for (std::size_t i = 0; i < present.size(); ++i) {
      const Kind& kind = *present[i];
      const auto best = store.best_epoch(k, kind.name).value_or(0);
      if (kind.pretext) {
        FoldResult r;
        r.fold = k;
        r.test_subjects = fd.fold.test_subjects;
        r.metrics[kMetricR2] = pretext_r2(pretext_spec, store.load(k, kind.name, pretext_spec), fd.test);
        r.best_epoch = best;
        r.train_windows = fd.train.size();
        tables[i].folds.push_back(std::move(r));
      } else {
        const auto params = store.load(k, kind.name, har_spec);
        const auto rep = evaluate_classifier(har_spec, params, fd.test, kind.masked);
        TrainConfig used;
        used.label_fraction = kind.fraction;
        used.seed = derive_seed(config.seed, {k, kStageAblation});
        const auto train_windows = downstream_training_set(labeled_only(fd.train), used).size();
        tables[i].folds.push_back(classifier_result(fd.fold, rep, best, train_windows));
      }
    }
  }
  for (auto& t : tables) t.recompute_summary();
  return tables;
}

}  // namespace cdmp
