#pragma once

#include <cmath>
#include <map>
#include <random>
#include <string>

#include "cdmp/datasets.h"
#include "cdmp/models.h"
#include "cdmp/protocol.h"
#include "cdmp/synthetic.h"
#include "scratch.h"

namespace cdmp::testing {

/// Narrow variant of both networks so training tests run in milliseconds.
inline ArchitectureOptions narrow_architecture() {
  ArchitectureOptions o;
  o.conv_filters = {8, 12, 16};
  o.pretext_hidden = {32, 16};
  o.har_hidden = {32, 16, 12};
  return o;
}

/// Labelled windows in [0, 1]: class c oscillates at its own frequency and
/// z follows x and y.
inline WindowSet toy_windows(std::size_t per_class, std::size_t classes, std::uint64_t seed,
                             std::size_t length = 120) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  WindowSet set;
  std::vector<float> v;
  v.reserve(per_class * classes * length * 3);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t k = 0; k < per_class; ++k) {
      const double phase = 6.283 * u(rng);
      const double w = 0.05 + 0.04 * static_cast<double>(c);
      for (std::size_t t = 0; t < length; ++t) {
        const double x = 0.5 + 0.3 * std::sin(w * static_cast<double>(t) + phase) + 0.02 * u(rng);
        const double y = 0.5 + 0.2 * std::cos(2 * w * static_cast<double>(t) + phase) + 0.02 * u(rng);
        const double z = 0.2 + 0.4 * x + 0.2 * y + 0.01 * u(rng);
        v.push_back(static_cast<float>(x));
        v.push_back(static_cast<float>(y));
        v.push_back(static_cast<float>(z));
      }
      set.labels.push_back(static_cast<int>(c));
      set.subject_ids.push_back(static_cast<int>(k % 5) + 1);
      set.sources.push_back("toy#" + std::to_string(set.sources.size()));
    }
  }
  set.windows = Tensor({per_class * classes, length, 3}, std::move(v));
  return set;
}

/// Protocol settings small enough to run every fold of every dataset in
/// seconds: the narrow network, two epochs per stage.
inline ProtocolConfig desk_protocol(std::uint64_t seed = 7) {
  ProtocolConfig c;
  c.architecture = narrow_architecture();
  for (TrainConfig* t : {&c.pretext, &c.downstream, &c.finetune, &c.baseline}) {
    t->epochs = 2;
    t->batch_size = 64;
  }
  c.downstream.learning_rate = c.finetune.learning_rate = c.baseline.learning_rate = 1e-3;
  c.seed = seed;
  return c;
}

/// Synthetic stand-in for a dataset at its real subject count, prepared once
/// per process.
inline const PreparedDataset& synthetic_prepared(DatasetId id) {
  static std::map<DatasetId, PreparedDataset> cache;
  auto it = cache.find(id);
  if (it == cache.end()) {
    ScratchDir dir("synthetic_" + dataset_info(id).name);
    write_synthetic_dataset(id, dir.path());
    it = cache.emplace(id, prepare_dataset(id, dir.path())).first;
  }
  return it->second;
}

}  // namespace cdmp::testing
