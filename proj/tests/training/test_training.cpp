#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "../support/fixtures.h"
#include "cdmp/metrics.h"
#include "cdmp/training.h"

using namespace cdmp;
using cdmp::testing::narrow_architecture;
using cdmp::testing::toy_windows;

namespace {

TrainConfig quick(Regime regime, std::size_t epochs, double lr = 1e-3) {
  TrainConfig c = regime == Regime::Pretext ? TrainConfig::pretext() : TrainConfig::downstream(regime);
  c.epochs = epochs;
  c.batch_size = 16;
  c.learning_rate = lr;
  c.seed = 7;
  return c;
}

bool same_params(const ModelParams& a, const ModelParams& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    if (a.layers[i].weights != b.layers[i].weights || a.layers[i].bias != b.layers[i].bias) return false;
  }
  return true;
}

double training_accuracy(const ArchitectureSpec& spec, const ModelParams& p, const WindowSet& set) {
  const auto pred = argmax_rows(model_forward(spec, p, set.windows));
  return classification_metrics(pred, set.labels, spec.output_shape()[0]).accuracy;
}

struct Transferred {
  ArchitectureSpec pre, har;
  ModelParams params;
};

Transferred transferred(std::size_t classes) {
  Transferred t{build_pretext_spec(narrow_architecture()), build_har_spec(classes, narrow_architecture()), {}};
  t.params = transfer_and_freeze(t.pre, init_params(t.pre, 11), t.har, 12);
  return t;
}

}  // namespace

TEST(TrainConfigTest, DefaultSchedule) {
  const TrainConfig p = TrainConfig::pretext();
  EXPECT_EQ(p.epochs, 80u);
  EXPECT_EQ(p.batch_size, 512u);
  EXPECT_DOUBLE_EQ(p.learning_rate, 3e-4);
  const TrainConfig d = TrainConfig::downstream(Regime::DownstreamFrozen);
  EXPECT_EQ(d.epochs, 80u);
  EXPECT_DOUBLE_EQ(d.learning_rate, 1e-4);
  const TrainConfig f = TrainConfig::downstream(Regime::Finetune);
  EXPECT_EQ(f.epochs, 20u);
  EXPECT_DOUBLE_EQ(f.learning_rate, 1e-4);
}

TEST(TrainConfigTest, ValidationAndJson) {
  TrainConfig c = quick(Regime::Finetune, 3);
  c.label_fraction = 0.25;
  c.masked_input = true;
  EXPECT_EQ(config_from_json(config_to_json(c), TrainConfig{}), c);
  EXPECT_EQ(config_from_json({{"epochs", 5}}, c).epochs, 5u);
  EXPECT_THROW(config_from_json({{"epoch", 5}}, c), std::invalid_argument);
  EXPECT_THROW(config_from_json({{"batch_size", 0}}, c), std::invalid_argument);
  EXPECT_THROW(config_from_json({{"learning_rate", 0.0}}, c), std::invalid_argument);
  EXPECT_THROW(config_from_json({{"label_fraction", 0.0}}, c), std::invalid_argument);
  EXPECT_THROW(config_from_json({{"label_fraction", 1.5}}, c), std::invalid_argument);
  EXPECT_THROW(config_from_json({{"regime", "semi"}}, c), std::invalid_argument);
  EXPECT_THROW(config_from_json({{"epochs", "ten"}}, c), std::invalid_argument);
}

TEST(LabelFraction, OnePercentOfBalancedSetTakesOnePerClass) {
  const WindowSet set = toy_windows(100, 6, 1, 16);
  const auto idx = label_fraction_indices(set, 0.01, 3);
  ASSERT_EQ(idx.size(), 6u);
  std::map<int, int> counts;
  for (auto i : idx) ++counts[set.labels[i]];
  for (int c = 0; c < 6; ++c) EXPECT_EQ(counts[c], 1) << c;
}

TEST(LabelFraction, IdentityAndDeterminism) {
  const WindowSet set = toy_windows(7, 3, 2, 16);
  std::vector<std::size_t> all(set.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  EXPECT_EQ(label_fraction_indices(set, 1.0, 9), all);
  EXPECT_EQ(label_fraction_indices(set, 0.3, 9), label_fraction_indices(set, 0.3, 9));
  EXPECT_NE(label_fraction_indices(set, 0.3, 9), label_fraction_indices(set, 0.3, 10));
  EXPECT_THROW(label_fraction_indices(set, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(label_fraction_indices(set, -0.1, 1), std::invalid_argument);
}

TEST(LabelFraction, ClassHistogramStaysProportional) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 40; ++trial) {
    WindowSet set = toy_windows(1, 1, 5, 8);
    // Random imbalanced histogram over up to 12 classes.
    const int classes = 2 + static_cast<int>(rng() % 11);
    std::vector<WindowSet> parts;
    std::map<int, std::size_t> full;
    for (int c = 0; c < classes; ++c) {
      const std::size_t n = 1 + rng() % 80;
      WindowSet part = toy_windows(n, 1, rng(), 8);
      part.labels.assign(n, c);
      full[c] = n;
      parts.push_back(std::move(part));
    }
    set = WindowSet::concat(parts);
    const double f = 0.005 + 0.995 * double(rng() % 1000) / 1000.0;
    const auto idx = label_fraction_indices(set, f, rng());
    std::map<int, std::size_t> got;
    for (auto i : idx) ++got[set.labels[i]];
    for (const auto& [c, n] : full) {
      EXPECT_GE(got[c], 1u);
      EXPECT_LE(std::abs(double(got[c]) - f * double(n)), 1.0) << "class " << c << " f " << f;
    }
    EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
  }
}

TEST(PretextTraining, OverfitsSingleExample) {
  const ArchitectureSpec spec = build_pretext_spec(narrow_architecture());
  const PretextBatch one = make_pretext_batch(toy_windows(1, 1, 3));
  const TrainResult r = train_pretext(spec, one, {}, quick(Regime::Pretext, 400, 1e-3));
  const Tensor pred = model_forward(spec, r.params, one.inputs);
  double mse = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    mse += std::pow(double(pred.values()[i]) - one.targets.values()[i], 2);
  }
  mse /= double(pred.size());
  EXPECT_LT(mse, 1e-3);
}

TEST(PretextTraining, BestValidationNoWorseThanFirstEpoch) {
  const ArchitectureSpec spec = build_pretext_spec(narrow_architecture());
  const PretextBatch train = make_pretext_batch(toy_windows(8, 3, 1));
  const PretextBatch val = make_pretext_batch(toy_windows(2, 3, 2));
  const TrainResult r = train_pretext(spec, train, val, quick(Regime::Pretext, 6));
  ASSERT_EQ(r.history.epochs.size(), 6u);
  const auto& best = r.history.epochs.at(r.history.best_epoch - 1);
  EXPECT_LE(best.val_loss, r.history.epochs.front().val_loss);
  for (const auto& e : r.history.epochs) {
    EXPECT_TRUE(std::isfinite(e.train_loss));
    EXPECT_LE(best.val_loss, e.val_loss);
  }
  // The returned parameters reproduce the selected epoch's validation loss.
  const Tensor out = model_forward(spec, r.params, val.inputs);
  double mse = 0;
  for (std::size_t i = 0; i < out.size(); ++i) mse += std::pow(double(out.values()[i]) - val.targets.values()[i], 2);
  EXPECT_NEAR(mse / double(out.size()), best.val_loss, 1e-6);
}

TEST(PretextTraining, SeedDeterminesEverything) {
  const ArchitectureSpec spec = build_pretext_spec(narrow_architecture());
  const PretextBatch train = make_pretext_batch(toy_windows(6, 3, 1));
  const PretextBatch val = make_pretext_batch(toy_windows(2, 3, 2));
  const TrainResult a = train_pretext(spec, train, val, quick(Regime::Pretext, 3));
  const TrainResult b = train_pretext(spec, train, val, quick(Regime::Pretext, 3));
  EXPECT_TRUE(same_params(a.params, b.params));
  EXPECT_EQ(a.history.to_jsonl(), b.history.to_jsonl());
  TrainConfig other = quick(Regime::Pretext, 3);
  other.seed = 8;
  EXPECT_FALSE(same_params(a.params, train_pretext(spec, train, val, other).params));
}

TEST(PretextTraining, RepeatedBatchLossDoesNotRise) {
  const ArchitectureSpec spec = build_pretext_spec(narrow_architecture());
  const PretextBatch batch = make_pretext_batch(toy_windows(4, 3, 6));
  for (double lr : {1e-3, 3e-4, 1e-4}) {
    TrainConfig c = quick(Regime::Pretext, 6, lr);
    c.batch_size = 512;  // one step per epoch, always on the same batch
    const TrainResult r = train_pretext(spec, batch, {}, c);
    int rises = 0;
    for (std::size_t i = 1; i < r.history.epochs.size(); ++i) {
      rises += r.history.epochs[i].train_loss > r.history.epochs[i - 1].train_loss;
    }
    EXPECT_LE(rises, 1) << "lr " << lr;
  }
}

TEST(PretextTraining, Errors) {
  const ArchitectureSpec spec = build_pretext_spec(narrow_architecture());
  EXPECT_THROW(train_pretext(spec, {}, {}, quick(Regime::Pretext, 1)), std::invalid_argument);
  const PretextBatch b = make_pretext_batch(toy_windows(1, 1, 1));
  EXPECT_THROW(train_pretext(spec, b, {}, quick(Regime::Finetune, 1)), std::invalid_argument);
}

TEST(DownstreamTraining, FrozenRegimeOverfitsTenWindows) {
  const Transferred t = transferred(6);
  const WindowSet ten = toy_windows(2, 5, 4);
  const TrainResult r = train_downstream(t.har, ten, {}, quick(Regime::DownstreamFrozen, 400, 3e-3), &t.params);
  EXPECT_EQ(training_accuracy(t.har, r.params, ten), 1.0);
}

TEST(DownstreamTraining, FrozenRegimeLeavesConvBlocksBitIdentical) {
  const Transferred t = transferred(6);
  const std::string before = conv_checksum(t.har, t.params);
  const TrainResult r = train_downstream(t.har, toy_windows(4, 6, 1), toy_windows(1, 6, 2),
                                         quick(Regime::DownstreamFrozen, 3), &t.params);
  EXPECT_EQ(conv_checksum(t.har, r.params), before);
  EXPECT_FALSE(same_params(r.params, t.params));
  for (std::size_t i = 0; i < t.har.conv_prefix_length(); ++i) EXPECT_EQ(r.params.layers[i].frozen, t.har.layers[i].has_params());
}

TEST(DownstreamTraining, PrefixFeaturesComposeWithHead) {
  // The frozen regime trains the head on conv features computed once; that
  // is only sound if prefix-then-head equals the full forward pass exactly.
  const Transferred t = transferred(6);
  const WindowSet train = toy_windows(3, 6, 1);
  const TrainResult r = train_downstream(t.har, train, {}, quick(Regime::DownstreamFrozen, 2), &t.params);
  const std::size_t k = t.har.conv_prefix_length();
  const Tensor features = forward_layers(t.har, r.params, 0, k, train.windows);
  EXPECT_EQ(forward_layers(t.har, r.params, k, t.har.layers.size(), features),
            model_forward(t.har, r.params, train.windows));
}

TEST(DownstreamTraining, FinetuneUpdatesConvBlocks) {
  const Transferred t = transferred(6);
  const TrainResult r = train_downstream(t.har, toy_windows(4, 6, 1), {}, quick(Regime::Finetune, 2), &t.params);
  EXPECT_NE(conv_checksum(t.har, r.params), conv_checksum(t.har, t.params));
  for (const auto& p : r.params.layers) EXPECT_FALSE(p.frozen);
}

TEST(DownstreamTraining, BaselineIgnoresProvidedParameters) {
  const Transferred t = transferred(6);
  const WindowSet train = toy_windows(3, 6, 1);
  const TrainConfig c = quick(Regime::SupervisedBaseline, 2);
  const TrainResult with = train_downstream(t.har, train, {}, c, &t.params);
  const TrainResult without = train_downstream(t.har, train, {}, c, nullptr);
  EXPECT_TRUE(same_params(with.params, without.params));
  EXPECT_NE(conv_checksum(t.har, with.params), conv_checksum(t.har, t.params));
}

TEST(DownstreamTraining, SelectsBestValidationAccuracy) {
  const Transferred t = transferred(6);
  const WindowSet val = toy_windows(2, 6, 9);
  const TrainResult r = train_downstream(t.har, toy_windows(6, 6, 1), val, quick(Regime::DownstreamFrozen, 8), &t.params);
  ASSERT_EQ(r.history.epochs.size(), 8u);
  double best = 0;
  for (const auto& e : r.history.epochs) best = std::max(best, e.val_metric);
  EXPECT_EQ(r.history.epochs.at(r.history.best_epoch - 1).val_metric, best);
  EXPECT_DOUBLE_EQ(training_accuracy(t.har, r.params, val), best);
}

TEST(DownstreamTraining, DeterministicAcrossRuns) {
  const Transferred t = transferred(6);
  const WindowSet train = toy_windows(4, 6, 1);
  const WindowSet val = toy_windows(1, 6, 2);
  for (Regime regime : {Regime::DownstreamFrozen, Regime::Finetune, Regime::SupervisedBaseline}) {
    const TrainResult a = train_downstream(t.har, train, val, quick(regime, 2), &t.params);
    const TrainResult b = train_downstream(t.har, train, val, quick(regime, 2), &t.params);
    EXPECT_TRUE(same_params(a.params, b.params)) << to_string(regime);
    EXPECT_EQ(a.history.to_jsonl(), b.history.to_jsonl());
  }
}

TEST(DownstreamTraining, MaskedInputOption) {
  const Transferred t = transferred(6);
  const WindowSet train = toy_windows(2, 6, 1);
  TrainConfig c = quick(Regime::DownstreamFrozen, 1);
  const TrainResult plain = train_downstream(t.har, train, {}, c, &t.params);
  c.masked_input = true;
  const TrainResult masked = train_downstream(t.har, train, {}, c, &t.params);
  EXPECT_FALSE(same_params(plain.params, masked.params));
}

TEST(DownstreamTraining, LabelFractionUsesSubset) {
  const Transferred t = transferred(6);
  TrainConfig c = quick(Regime::DownstreamFrozen, 1);
  c.label_fraction = 0.01;
  const WindowSet train = toy_windows(100, 6, 1, 120);
  const TrainResult r = train_downstream(t.har, train, {}, c, &t.params);
  EXPECT_EQ(r.history.epochs.size(), 1u);
}

TEST(DownstreamTraining, Errors) {
  const Transferred t = transferred(6);
  WindowSet train = toy_windows(2, 6, 1);
  EXPECT_THROW(train_downstream(t.har, train, {}, quick(Regime::DownstreamFrozen, 1), nullptr),
               std::invalid_argument);
  EXPECT_THROW(train_downstream(t.har, train, {}, quick(Regime::Pretext, 1), &t.params),
               std::invalid_argument);
  EXPECT_THROW(train_downstream(t.har, WindowSet{}, {}, quick(Regime::SupervisedBaseline, 1)),
               std::invalid_argument);
  train.labels[3] = kUnlabeled;
  try {
    train_downstream(t.har, train, {}, quick(Regime::SupervisedBaseline, 1));
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("toy#3"), std::string::npos) << e.what();
  }
  train.labels[3] = 6;
  EXPECT_THROW(train_downstream(t.har, train, {}, quick(Regime::SupervisedBaseline, 1)),
               std::invalid_argument);
}

TEST(History, JsonLinesOnePerEpoch) {
  const ArchitectureSpec spec = build_pretext_spec(narrow_architecture());
  const PretextBatch train = make_pretext_batch(toy_windows(3, 2, 1));
  const TrainResult r = train_pretext(spec, train, train, quick(Regime::Pretext, 4));
  const std::string lines = r.history.to_jsonl();
  EXPECT_EQ(std::count(lines.begin(), lines.end(), '\n'), 4);
  const auto first = nlohmann::json::parse(lines.substr(0, lines.find('\n')));
  EXPECT_EQ(first.at("epoch"), 1);
  EXPECT_FALSE(first.contains("seconds"));
  const std::string timed = r.history.to_jsonl(true);
  EXPECT_TRUE(nlohmann::json::parse(timed.substr(0, timed.find('\n'))).contains("seconds"));
}
