#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdmp/loaders.h"
#include "cdmp/metrics.h"
#include "cdmp/models.h"
#include "cdmp/results.h"
#include "cdmp/training.h"

namespace cdmp {

// ---- user-split folds -------------------------------------------------------

struct Fold {
  std::size_t index = 0;
  std::vector<int> test_subjects;   // sorted
  std::vector<int> train_subjects;  // sorted
  std::uint64_t validation_seed = 0;
};

struct FoldPlan {
  std::uint64_t seed = 0;
  std::vector<int> roster;  // sorted distinct subjects
  std::vector<Fold> folds;

  /// Throws unless the test sets partition the roster and each training set
  /// is its complement.
  void validate() const;
};

/// Shuffles the distinct subjects with a seeded RNG and deals them into `k`
/// test groups whose sizes differ by at most one.
FoldPlan make_user_folds(std::span<const int> subject_ids, std::uint64_t seed, std::size_t k = 5);

// ---- configuration -----------------------------------------------------------

enum class Experiment { Pretext, SsFrozen, SsFinetune, Supervised, Ablation };

std::string to_string(Experiment e);
Experiment experiment_from_string(const std::string& name);

struct ProtocolConfig {
  ArchitectureOptions architecture;
  TrainConfig pretext = TrainConfig::pretext();
  TrainConfig downstream = TrainConfig::downstream(Regime::DownstreamFrozen);
  TrainConfig finetune = TrainConfig::downstream(Regime::Finetune);
  TrainConfig baseline = TrainConfig::downstream(Regime::SupervisedBaseline);
  double validation_fraction = 0.1;
  bool validation_by_subject = false;
  double label_fraction = 0.01;  // ablation arms
  std::uint64_t seed = 0;
  std::size_t folds = 5;
  std::vector<std::size_t> only_folds;  // empty runs every fold

  void validate() const;
  std::vector<std::size_t> selected_folds() const;
  bool operator==(const ProtocolConfig&) const = default;
};

nlohmann::json protocol_to_json(const ProtocolConfig& config);
/// Missing keys keep the defaults; unknown keys are rejected.
ProtocolConfig protocol_from_json(const nlohmann::json& j, ProtocolConfig base = {});

// ---- per-fold data -----------------------------------------------------------

struct FoldData {
  Fold fold;
  NormalizationStats stats;  // fitted on `train` only
  WindowSet train;           // training users minus validation, normalised
  WindowSet val;
  WindowSet test;            // held-out users, normalised with the training stats
};

/// Splits by user, carves the validation set out of the training users,
/// fits min-max on the remaining training windows and applies it everywhere.
/// Asserts that no test-user window reaches training, validation or the fit.
FoldData prepare_fold(const PreparedDataset& data, const Fold& fold, const ProtocolConfig& config);

WindowSet labeled_only(const WindowSet& set);

// ---- model storage -------------------------------------------------------------

/// Per-fold checkpoints, either under `dir/fold{k}/<name>.ckpt` (with the
/// history next to it) or in memory when no directory is given.
class ModelStore {
 public:
  explicit ModelStore(std::filesystem::path dir = {});

  bool has(std::size_t fold, const std::string& name) const;
  /// Throws naming the missing checkpoint file.
  ModelParams load(std::size_t fold, const std::string& name, const ArchitectureSpec& spec) const;
  void save(std::size_t fold, const std::string& name, const ArchitectureSpec& spec,
            const ModelParams& params, const TrainHistory& history,
            const nlohmann::json& metadata = nlohmann::json::object());
  std::filesystem::path path(std::size_t fold, const std::string& name) const;
  std::optional<std::size_t> best_epoch(std::size_t fold, const std::string& name) const;

 private:
  std::filesystem::path dir_;
  std::map<std::string, ModelParams> memory_;
  std::map<std::string, std::size_t> best_epochs_;
};

// Checkpoint names.
inline constexpr const char* kPretextModel = "pretext";
inline constexpr const char* kFrozenModel = "har_frozen";
inline constexpr const char* kFinetuneModel = "har_finetune";
inline constexpr const char* kBaselineModel = "baseline";
std::string ablation_model_name(const std::string& arm, double fraction);

// ---- experiments ---------------------------------------------------------------

struct ProtocolHooks {
  std::function<void(const std::string&)> log;
  std::function<void(std::size_t fold, const std::string& stage, const EpochRecord&)> on_epoch;
};

struct ProtocolOptions {
  /// When false, a missing upstream checkpoint (for example the pretext
  /// model of a downstream run) is an error instead of being trained.
  bool train_missing_prerequisites = true;
};

/// Runs one experiment over the selected folds. Pretext yields one R² table;
/// ss_frozen, supervised yield one classifier table; ss_finetune yields the
/// frozen and fine-tuned tables; ablation yields the SS and FS arms trained
/// on the same stratified label subset.
std::vector<ResultTable> run_protocol(const PreparedDataset& data, Experiment experiment,
                                      const ProtocolConfig& config, ModelStore& store,
                                      const ProtocolOptions& options = {},
                                      const ProtocolHooks& hooks = {});

/// Evaluates checkpoints already in `store` without training. Every model
/// kind present for all selected folds is evaluated; no model at all is an
/// error naming the first expected checkpoint.
std::vector<ResultTable> evaluate_saved(const PreparedDataset& data, const ProtocolConfig& config,
                                        const ModelStore& store, const ProtocolHooks& hooks = {});

/// Pooled R² of the pretext model on the pretext examples of `set`.
double pretext_r2(const ArchitectureSpec& spec, const ModelParams& params, const WindowSet& set);

/// Classification report of a HAR model on the labelled windows of `set`.
ClassificationReport evaluate_classifier(const ArchitectureSpec& spec, const ModelParams& params,
                                         const WindowSet& set, bool masked_input);

}  // namespace cdmp
