#include "cdmp/training.h"

#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "cdmp/metrics.h"
#include "cdmp/network.h"
#include "cdmp/optim.h"
#include "cdmp/random.h"

namespace cdmp {

namespace {

constexpr std::uint64_t kShuffleStream = 1;
constexpr std::uint64_t kDropoutStream = 2;
constexpr std::uint64_t kInitStream = 3;
constexpr std::uint64_t kSubsetStream = 4;

const std::map<Regime, std::string>& regime_names() {
  static const std::map<Regime, std::string> names{
      {Regime::Pretext, "pretext"},
      {Regime::DownstreamFrozen, "downstream_frozen"},
      {Regime::Finetune, "finetune"},
      {Regime::SupervisedBaseline, "supervised_baseline"}};
  return names;
}

struct Problem {
  Tensor inputs;  // already passed through any frozen prefix
  Tensor targets;
  std::vector<int> labels;  // classification only
  std::size_t size() const { return inputs.empty() ? 0 : inputs.dim(0); }
};

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

// Mini-batch Adam over spec.layers[begin..]. Layers below `begin` must be
// frozen; their output is what `train.inputs` holds.
TrainResult run_loop(const ArchitectureSpec& spec, ModelParams params, std::size_t begin,
                     const Problem& train, const Problem& val, const TrainConfig& config,
                     LossKind loss_kind, const EpochCallback& on_epoch) {
  const bool classify = loss_kind == LossKind::CrossEntropy;
  const std::size_t end = spec.layers.size();
  const auto layers = std::span<const LayerDesc>(spec.layers).subspan(begin);
  const AdamConfig adam{.learning_rate = config.learning_rate};
  std::mt19937_64 shuffle_rng(derive_seed(config.seed, {kShuffleStream}));
  std::mt19937_64 dropout_rng(derive_seed(config.seed, {kDropoutStream}));

  TrainResult result;
  std::vector<LayerParams<float>> best = params.layers;
  double best_primary = 0, best_secondary = 0;
  const std::size_t n = train.size();

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const std::vector<std::size_t> order = random_permutation(n, shuffle_rng);
    double loss_sum = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::span<const std::size_t> rows(order.data() + start,
                                              std::min(config.batch_size, n - start));
      const Tensor x = train.inputs.gather_rows(rows);
      const Tensor y = train.targets.gather_rows(rows);
      const auto lp = std::span<const LayerParams<float>>(params.layers).subspan(begin);
      ForwardCache<float> cache;
      const Tensor out = network_forward<float>(layers, lp, x, Mode::Train, &dropout_rng, &cache);
      const LossResult<float> loss = compute_loss(loss_kind, out, y);
      loss_sum += static_cast<double>(loss.value) * static_cast<double>(rows.size());
      const auto grads = network_backward<float>(layers, lp, cache, loss.grad);
      for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].has_params()) adam_step(params.layers[begin + i], grads[i], adam);
      }
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(n);
    record.val_loss = record.val_metric = nan();
    if (val.size() > 0) {
      const Tensor out = forward_layers(spec, params, begin, end, val.inputs);
      record.val_loss = compute_loss(loss_kind, out, val.targets).value;
      if (classify) {
        const std::vector<int> pred = argmax_rows(out);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == val.labels[i];
        record.val_metric = static_cast<double>(correct) / static_cast<double>(pred.size());
      } else {
        try {
          record.val_metric = r2(out, val.targets);
        } catch (const std::invalid_argument&) {
          // constant validation target: R^2 undefined, selection uses the loss
        }
      }
    }
    record.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    // Lexicographic selection key, larger is better.
    double primary, secondary;
    if (val.size() == 0) {
      primary = -record.train_loss;
      secondary = 0;
    } else if (classify) {
      primary = record.val_metric;
      secondary = -record.val_loss;
    } else {
      primary = -record.val_loss;
      secondary = 0;
    }
    if (epoch == 1 || primary > best_primary ||
        (primary == best_primary && secondary > best_secondary)) {
      best_primary = primary;
      best_secondary = secondary;
      best = params.layers;
      result.history.best_epoch = epoch;
    }
    result.history.epochs.push_back(record);
    if (on_epoch) on_epoch(record);
  }

  result.params.fingerprint = spec.fingerprint();
  result.params.layers = std::move(best);
  for (auto& p : result.params.layers) p.reset_optimizer();
  return result;
}

void check_params(const ArchitectureSpec& spec, const ModelParams& params) {
  if (params.layers.size() != spec.layers.size() ||
      (!params.fingerprint.empty() && params.fingerprint != spec.fingerprint())) {
    throw std::invalid_argument("initial parameters do not belong to architecture '" + spec.name + "'");
  }
}

}  // namespace

std::string to_string(Regime regime) { return regime_names().at(regime); }

Regime regime_from_string(const std::string& name) {
  for (const auto& [r, n] : regime_names()) {
    if (n == name) return r;
  }
  throw std::invalid_argument("unknown training regime '" + name + "'");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
  if (!(learning_rate > 0)) {
    throw std::invalid_argument("learning_rate must be positive, got " + std::to_string(learning_rate));
  }
  if (!(label_fraction > 0 && label_fraction <= 1)) {
    throw std::invalid_argument("label_fraction must be in (0, 1], got " +
                                std::to_string(label_fraction));
  }
}

TrainConfig TrainConfig::pretext() { return TrainConfig{}; }

TrainConfig TrainConfig::downstream(Regime r) {
  TrainConfig c;
  c.regime = r;
  c.learning_rate = 1e-4;
  c.epochs = r == Regime::Finetune ? 20 : 80;
  return c;
}

nlohmann::json config_to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"seed", c.seed},
          {"regime", to_string(c.regime)},
          {"label_fraction", c.label_fraction},
          {"masked_input", c.masked_input}};
}

TrainConfig config_from_json(const nlohmann::json& j, TrainConfig c) {
  if (!j.is_object()) throw std::invalid_argument("training config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "epochs") {
        c.epochs = value.get<std::size_t>();
      } else if (key == "batch_size") {
        c.batch_size = value.get<std::size_t>();
      } else if (key == "learning_rate") {
        c.learning_rate = value.get<double>();
      } else if (key == "seed") {
        c.seed = value.get<std::uint64_t>();
      } else if (key == "regime") {
        c.regime = regime_from_string(value.get<std::string>());
      } else if (key == "label_fraction") {
        c.label_fraction = value.get<double>();
      } else if (key == "masked_input") {
        c.masked_input = value.get<bool>();
      } else {
        throw std::invalid_argument("unknown training config key '" + key + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument("training config key '" + key + "': " + e.what());
    }
  }
  c.validate();
  return c;
}

std::string TrainHistory::to_jsonl(bool with_timing) const {
  std::ostringstream out;
  for (const auto& e : epochs) {
    nlohmann::json j = {{"epoch", e.epoch},
                        {"train_loss", e.train_loss},
                        {"val_loss", e.val_loss},
                        {"val_metric", e.val_metric},
                        {"best", e.epoch == best_epoch}};
    if (with_timing) j["seconds"] = e.seconds;
    out << j.dump() << "\n";
  }
  return out.str();
}

TrainResult train_pretext(const ArchitectureSpec& spec, const PretextBatch& train,
                          const PretextBatch& val, const TrainConfig& config,
                          const ModelParams* initial, const EpochCallback& on_epoch) {
  config.validate();
  if (config.regime != Regime::Pretext) {
    throw std::invalid_argument("train_pretext called with regime " + to_string(config.regime));
  }
  if (train.size() == 0) throw std::invalid_argument("pretext training set is empty");
  ModelParams params = initial ? *initial : init_params(spec, derive_seed(config.seed, {kInitStream}));
  check_params(spec, params);
  Problem tr{train.inputs, train.targets, {}};
  Problem va{val.inputs, val.targets, {}};
  return run_loop(spec, std::move(params), 0, tr, va, config, LossKind::Mse, on_epoch);
}

Tensor one_hot(std::span<const int> labels, std::size_t num_classes) {
  Tensor out({labels.size(), num_classes}, 0.0f);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= static_cast<int>(num_classes)) {
      throw std::invalid_argument("label " + std::to_string(labels[i]) + " at row " +
                                  std::to_string(i) + " outside 0.." +
                                  std::to_string(num_classes - 1));
    }
    out.at(i, static_cast<std::size_t>(labels[i])) = 1.0f;
  }
  return out;
}

TrainResult train_downstream(const ArchitectureSpec& spec, const WindowSet& train_set,
                             const WindowSet& val_set, const TrainConfig& config,
                             const ModelParams* initial, const EpochCallback& on_epoch) {
  config.validate();
  const std::size_t num_classes = spec.output_shape().at(0);
  for (const WindowSet* set : {&train_set, &val_set}) {
    for (std::size_t i = 0; i < set->size(); ++i) {
      if (set->labels[i] == kUnlabeled) {
        throw std::invalid_argument("downstream training needs labels; window " + set->sources[i] +
                                    " is unlabelled");
      }
    }
  }
  if (train_set.empty()) throw std::invalid_argument("downstream training set is empty");

  ModelParams params;
  switch (config.regime) {
    case Regime::DownstreamFrozen:
    case Regime::Finetune:
      if (!initial) {
        throw std::invalid_argument(to_string(config.regime) + " needs transferred parameters");
      }
      params = *initial;
      check_params(spec, params);
      set_conv_frozen(spec, params, config.regime == Regime::DownstreamFrozen);
      break;
    case Regime::SupervisedBaseline:
      params = init_params(spec, derive_seed(config.seed, {kInitStream}));
      set_conv_frozen(spec, params, false);
      break;
    case Regime::Pretext:
      throw std::invalid_argument("train_downstream called with the pretext regime");
  }
  for (auto& p : params.layers) p.reset_optimizer();

  const WindowSet train = downstream_training_set(train_set, config);

  const bool frozen_prefix = config.regime == Regime::DownstreamFrozen;
  const std::size_t begin = frozen_prefix ? spec.conv_prefix_length() : 0;
  const auto prepare = [&](const WindowSet& set) {
    Problem p;
    if (set.empty()) return p;
    Tensor x = config.masked_input ? mask_z_tail(set.windows, spec.horizon) : set.windows;
    // Frozen blocks are deterministic in eval mode, so their features are
    // computed once instead of every epoch.
    p.inputs = begin > 0 ? forward_layers(spec, params, 0, begin, x) : std::move(x);
    p.targets = one_hot(set.labels, num_classes);
    p.labels = set.labels;
    return p;
  };
  return run_loop(spec, std::move(params), begin, prepare(train), prepare(val_set), config,
                  LossKind::CrossEntropy, on_epoch);
}

std::vector<std::size_t> label_fraction_indices(const WindowSet& windows, double fraction,
                                                std::uint64_t seed) {
  if (!(fraction > 0 && fraction <= 1)) {
    throw std::invalid_argument("label fraction must be in (0, 1], got " + std::to_string(fraction));
  }
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (windows.labels[i] == kUnlabeled) {
      throw std::invalid_argument("label subset: window " + windows.sources[i] + " is unlabelled");
    }
    by_class[windows.labels[i]].push_back(i);
  }
  std::vector<std::size_t> out;
  for (const auto& [label, members] : by_class) {
    const double want = std::round(fraction * static_cast<double>(members.size()));
    const std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(want), 1, members.size());
    std::mt19937_64 rng(derive_seed(seed, {static_cast<std::uint64_t>(label)}));
    const auto order = random_permutation(members.size(), rng);
    for (std::size_t j = 0; j < k; ++j) out.push_back(members[order[j]]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

WindowSet downstream_training_set(const WindowSet& train, const TrainConfig& config) {
  if (config.label_fraction >= 1.0) return train;
  return label_fraction_subset(train, config.label_fraction, derive_seed(config.seed, {kSubsetStream}));
}

WindowSet label_fraction_subset(const WindowSet& windows, double fraction, std::uint64_t seed) {
  return windows.subset(label_fraction_indices(windows, fraction, seed));
}

}  // namespace cdmp
