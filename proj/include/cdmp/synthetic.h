#pragma once

#include <cstdint>
#include <filesystem>

#include "cdmp/loaders.h"

namespace cdmp {

/// Generator for stand-in datasets in the on-disk layout of each real one.
/// Every activity has its own oscillation frequency, amplitude and gravity
/// offset, and z is a noisy linear mix of x and y, so both the masked-z
/// pretext and activity classification are learnable.
struct SyntheticOptions {
  std::uint64_t seed = 1;
  std::size_t subjects = 0;  // 0 selects the real roster size
  std::size_t ucihar_rows = 2;            // per subject and activity
  std::size_t motionsense_trials = 1;     // per activity, up to the real trial count
  std::size_t motionsense_samples = 300;  // per trial file
  std::size_t hapt_activity_samples = 300;
  std::size_t hapt_transition_samples = 150;
  std::size_t hapt_gap_samples = 40;      // unlabelled samples between segments
  double noise = 0.05;
};

/// Writes the dataset under `root`, replacing any files of the same name.
void write_synthetic_dataset(DatasetId id, const std::filesystem::path& root,
                             const SyntheticOptions& options = {});

}  // namespace cdmp
