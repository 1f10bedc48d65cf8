#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cdmp/datasets.h"
#include "cdmp/models.h"
#include "json.hpp"

namespace cdmp {

enum class Regime { Pretext, DownstreamFrozen, Finetune, SupervisedBaseline };

std::string to_string(Regime regime);
Regime regime_from_string(const std::string& name);

struct TrainConfig {
  std::size_t epochs = 80;
  std::size_t batch_size = 512;
  double learning_rate = 3e-4;
  std::uint64_t seed = 0;
  Regime regime = Regime::Pretext;
  double label_fraction = 1.0;
  /// Downstream only: hide the z tail as in the pretext input.
  bool masked_input = false;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;

  static TrainConfig pretext();             // 80 epochs, lr 3e-4
  static TrainConfig downstream(Regime r);  // 80 epochs at 1e-4; finetune 20 epochs
};

nlohmann::json config_to_json(const TrainConfig& config);
/// Missing keys keep the values of `base`; unknown keys are rejected.
TrainConfig config_from_json(const nlohmann::json& j, TrainConfig base);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0;
  double val_loss = 0;
  double val_metric = 0;  // R^2 for the pretext, accuracy downstream
  double seconds = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based, 0 when nothing ran

  /// One JSON object per epoch. Wall-clock is left out unless asked for, so
  /// the default output is a pure function of data, config and seed.
  std::string to_jsonl(bool with_timing = false) const;
};

struct TrainResult {
  ModelParams params;  // parameters of the selected epoch
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Minimises MSE between predicted and hidden z tails. Starts from `initial`
/// when given, else from a seeded initialisation. Keeps the epoch with the
/// lowest validation MSE (training loss when `val` is empty).
TrainResult train_pretext(const ArchitectureSpec& spec, const PretextBatch& train,
                          const PretextBatch& val, const TrainConfig& config,
                          const ModelParams* initial = nullptr, const EpochCallback& on_epoch = {});

/// Cross-entropy training of the activity classifier. `initial` must hold
/// transferred parameters for the frozen and finetune regimes and is ignored
/// by the supervised baseline. Keeps the epoch with the highest validation
/// accuracy, ties going to the lower validation loss.
TrainResult train_downstream(const ArchitectureSpec& spec, const WindowSet& train,
                             const WindowSet& val, const TrainConfig& config,
                             const ModelParams* initial = nullptr, const EpochCallback& on_epoch = {});

/// Stratified subset: k_c = max(1, round(fraction * n_c)) windows of every
/// class present. Returns sorted indices into `windows`.
std::vector<std::size_t> label_fraction_indices(const WindowSet& windows, double fraction,
                                                std::uint64_t seed);
WindowSet label_fraction_subset(const WindowSet& windows, double fraction, std::uint64_t seed);

/// The windows train_downstream fits on: the label-fraction subset drawn
/// from the config's seed, or all of `train`.
WindowSet downstream_training_set(const WindowSet& train, const TrainConfig& config);

/// One-hot rows [M x num_classes]; every label must be in range.
Tensor one_hot(std::span<const int> labels, std::size_t num_classes);

}  // namespace cdmp
