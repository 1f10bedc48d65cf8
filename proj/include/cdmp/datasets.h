#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdmp/tensor.h"

namespace cdmp {

inline constexpr int kUnlabeled = -1;
inline constexpr double kSampleRateHz = 50.0;
inline constexpr float kMaskValue = -1.0f;
inline constexpr float kClipLow = -0.5f;
inline constexpr float kClipHigh = 1.5f;

/// Window geometry. The z axis is split into `past()` visible samples and a
/// masked tail of `horizon` samples; consecutive windows overlap by half.
struct WindowLayout {
  std::size_t length = 120;
  std::size_t horizon = 24;

  std::size_t stride() const { return length / 2; }
  std::size_t past() const { return length - horizon; }
  void validate() const;
  bool operator==(const WindowLayout&) const = default;
};

/// Continuous tri-axial accelerometer stream of one subject.
struct RawRecording {
  int subject_id = 0;
  Tensor samples;  // [N x 3]
  double sample_rate = kSampleRateHz;
  /// Per-sample class index, kUnlabeled where no activity applies.
  std::optional<std::vector<int>> labels;
  std::string source;

  std::size_t size() const { return samples.empty() ? 0 : samples.dim(0); }
};

struct NormalizationStats {
  std::array<float, 3> min{};
  std::array<float, 3> max{};
  bool operator==(const NormalizationStats&) const = default;
};

/// Fixed-length windows with per-window subject, label and provenance.
struct WindowSet {
  Tensor windows;                 // [M x L x 3]
  std::vector<int> labels;        // kUnlabeled where the window has no single label
  std::vector<int> subject_ids;
  std::vector<std::string> sources;
  std::optional<NormalizationStats> normalization;

  std::size_t size() const { return subject_ids.size(); }
  bool empty() const { return subject_ids.empty(); }
  std::size_t length() const { return windows.empty() ? 0 : windows.dim(1); }

  WindowSet subset(std::span<const std::size_t> indices) const;
  std::vector<std::size_t> labeled_indices() const;
  /// Sorted distinct subject ids.
  std::vector<int> subjects() const;
  void append(const WindowSet& other);
  static WindowSet concat(std::span<const WindowSet> parts);
  /// Throws if the parallel arrays disagree in length.
  void validate() const;
};

/// Slides a window of `layout.length` samples with stride `layout.stride()`.
/// Without `labeled_only`, windows whose samples do not share one label are
/// still emitted, with label kUnlabeled.
WindowSet make_windows(const RawRecording& recording, const WindowLayout& layout, bool labeled_only);

/// Number of windows a recording of n samples yields before label filtering.
std::size_t window_count(std::size_t n, const WindowLayout& layout);

/// Per-axis min and max over every sample of every window.
NormalizationStats fit_minmax(const WindowSet& data);

/// (x - min) / (max - min) per axis, clipped to [kClipLow, kClipHigh].
WindowSet apply_minmax(const WindowSet& data, const NormalizationStats& stats);

/// Masked-input window plus its hidden z-axis tail.
struct PretextExample {
  Tensor input;   // [L x 3]
  Tensor target;  // [horizon]
  std::size_t past = 0;
  std::size_t horizon = 0;
};

PretextExample make_pretext(const Tensor& window, std::size_t horizon = 24,
                            float mask_value = kMaskValue);

/// Batched pretext examples built from every window of a set.
struct PretextBatch {
  Tensor inputs;   // [M x L x 3]
  Tensor targets;  // [M x horizon]
  std::size_t size() const { return inputs.empty() ? 0 : inputs.dim(0); }
};

PretextBatch make_pretext_batch(const WindowSet& data, std::size_t horizon = 24,
                                float mask_value = kMaskValue);

/// Copy of [M x L x 3] windows with the last `horizon` z samples masked.
Tensor mask_z_tail(const Tensor& windows, std::size_t horizon, float mask_value = kMaskValue);

}  // namespace cdmp
