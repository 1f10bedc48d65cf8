#include "cdmp/datasets.h"

#include <algorithm>
#include <limits>
#include <set>
#include <stdexcept>

namespace cdmp {

void WindowLayout::validate() const {
  if (length < 2 || length % 2 != 0) {
    throw std::invalid_argument("window length must be even and at least 2, got " +
                                std::to_string(length));
  }
  if (horizon == 0 || horizon >= length) {
    throw std::invalid_argument("horizon " + std::to_string(horizon) +
                                " must lie in [1, window length " + std::to_string(length) + ")");
  }
}

WindowSet WindowSet::subset(std::span<const std::size_t> indices) const {
  WindowSet out;
  out.windows = windows.gather_rows(indices);
  out.normalization = normalization;
  for (std::size_t i : indices) {
    out.labels.push_back(labels.at(i));
    out.subject_ids.push_back(subject_ids.at(i));
    out.sources.push_back(sources.at(i));
  }
  return out;
}

std::vector<std::size_t> WindowSet::labeled_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != kUnlabeled) out.push_back(i);
  }
  return out;
}

std::vector<int> WindowSet::subjects() const {
  std::set<int> s(subject_ids.begin(), subject_ids.end());
  return {s.begin(), s.end()};
}

void WindowSet::append(const WindowSet& other) {
  const WindowSet parts[] = {std::move(*this), other};
  *this = concat(parts);
}

WindowSet WindowSet::concat(std::span<const WindowSet> parts) {
  WindowSet out;
  std::size_t total = 0, length = 0;
  for (const auto& part : parts) {
    if (part.empty()) continue;
    if (length != 0 && part.length() != length) {
      throw std::invalid_argument("cannot concatenate windows of length " +
                                  std::to_string(part.length()) + " and " + std::to_string(length));
    }
    length = part.length();
    total += part.size();
    if (!out.normalization) out.normalization = part.normalization;
  }
  if (total == 0) return out;
  std::vector<float> data;
  data.reserve(total * length * 3);
  for (const auto& part : parts) {
    if (part.empty()) continue;
    data.insert(data.end(), part.windows.values().begin(), part.windows.values().end());
    out.labels.insert(out.labels.end(), part.labels.begin(), part.labels.end());
    out.subject_ids.insert(out.subject_ids.end(), part.subject_ids.begin(), part.subject_ids.end());
    out.sources.insert(out.sources.end(), part.sources.begin(), part.sources.end());
  }
  out.windows = Tensor({total, length, 3}, std::move(data));
  return out;
}

void WindowSet::validate() const {
  const std::size_t m = subject_ids.size();
  const std::size_t rows = windows.empty() ? 0 : windows.dim(0);
  if (rows != m || labels.size() != m || sources.size() != m) {
    throw std::logic_error("window set arrays disagree: " + std::to_string(rows) + " windows, " +
                           std::to_string(labels.size()) + " labels, " + std::to_string(m) +
                           " subjects, " + std::to_string(sources.size()) + " sources");
  }
  if (!windows.empty() && (windows.rank() != 3 || windows.dim(2) != 3)) {
    throw std::logic_error("windows must be [M x L x 3], got " + shape_to_string(windows.shape()));
  }
}

std::size_t window_count(std::size_t n, const WindowLayout& layout) {
  if (n < layout.length) return 0;
  return (n - layout.length) / layout.stride() + 1;
}

WindowSet make_windows(const RawRecording& recording, const WindowLayout& layout, bool labeled_only) {
  layout.validate();
  const std::size_t n = recording.size();
  if (recording.labels && recording.labels->size() != n) {
    throw std::invalid_argument(recording.source + ": " + std::to_string(recording.labels->size()) +
                                " labels for " + std::to_string(n) + " samples");
  }
  WindowSet out;
  std::vector<float> data;
  const std::size_t count = window_count(n, layout);
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t start = w * layout.stride();
    int label = kUnlabeled;
    if (recording.labels) {
      const auto first = recording.labels->begin() + static_cast<std::ptrdiff_t>(start);
      const auto last = first + static_cast<std::ptrdiff_t>(layout.length);
      if (std::all_of(first, last, [&](int l) { return l == *first; })) label = *first;
    }
    if (labeled_only && label == kUnlabeled) continue;
    const float* src = recording.samples.data() + start * 3;
    data.insert(data.end(), src, src + layout.length * 3);
    out.labels.push_back(label);
    out.subject_ids.push_back(recording.subject_id);
    out.sources.push_back(recording.source + "@" + std::to_string(start));
  }
  if (!out.labels.empty()) {
    out.windows = Tensor({out.labels.size(), layout.length, 3}, std::move(data));
  }
  return out;
}

NormalizationStats fit_minmax(const WindowSet& data) {
  if (data.empty()) throw std::invalid_argument("min-max fit on an empty window set");
  NormalizationStats stats;
  stats.min.fill(std::numeric_limits<float>::infinity());
  stats.max.fill(-std::numeric_limits<float>::infinity());
  const auto values = data.windows.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t axis = i % 3;
    stats.min[axis] = std::min(stats.min[axis], values[i]);
    stats.max[axis] = std::max(stats.max[axis], values[i]);
  }
  for (std::size_t axis = 0; axis < 3; ++axis) {
    if (!(stats.max[axis] > stats.min[axis])) {
      throw std::invalid_argument("min-max: axis " + std::string(1, "xyz"[axis]) +
                                  " is constant (" + std::to_string(stats.min[axis]) +
                                  "); cannot normalise");
    }
  }
  return stats;
}

WindowSet apply_minmax(const WindowSet& data, const NormalizationStats& stats) {
  for (std::size_t axis = 0; axis < 3; ++axis) {
    if (!(stats.max[axis] > stats.min[axis])) {
      throw std::invalid_argument("min-max: degenerate stats on axis " + std::string(1, "xyz"[axis]));
    }
  }
  WindowSet out = data;
  auto values = out.windows.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t axis = i % 3;
    const double scaled = (static_cast<double>(values[i]) - stats.min[axis]) /
                          (static_cast<double>(stats.max[axis]) - stats.min[axis]);
    values[i] = std::clamp(static_cast<float>(scaled), kClipLow, kClipHigh);
  }
  out.normalization = stats;
  return out;
}

PretextExample make_pretext(const Tensor& window, std::size_t horizon, float mask_value) {
  if (window.rank() != 2 || window.dim(1) != 3 || horizon == 0 || horizon >= window.dim(0)) {
    throw std::invalid_argument("pretext: expected [L x 3] window with horizon < L, got " +
                                shape_to_string(window.shape()) + " and horizon " +
                                std::to_string(horizon));
  }
  const std::size_t len = window.dim(0);
  PretextExample ex;
  ex.past = len - horizon;
  ex.horizon = horizon;
  ex.input = window;
  ex.target = Tensor({horizon});
  for (std::size_t t = ex.past; t < len; ++t) {
    ex.target[t - ex.past] = window.at(t, 2);
    ex.input.at(t, 2) = mask_value;
  }
  return ex;
}

PretextBatch make_pretext_batch(const WindowSet& data, std::size_t horizon, float mask_value) {
  PretextBatch batch;
  if (data.empty()) return batch;
  const std::size_t m = data.size(), len = data.length();
  if (horizon == 0 || horizon >= len) {
    throw std::invalid_argument("pretext: horizon " + std::to_string(horizon) +
                                " incompatible with window length " + std::to_string(len));
  }
  batch.inputs = mask_z_tail(data.windows, horizon, mask_value);
  batch.targets = Tensor({m, horizon});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t t = 0; t < horizon; ++t) {
      batch.targets.at(i, t) = data.windows.at(i, len - horizon + t, 2);
    }
  }
  return batch;
}

Tensor mask_z_tail(const Tensor& windows, std::size_t horizon, float mask_value) {
  Tensor out = windows;
  const std::size_t m = windows.dim(0), len = windows.dim(1);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t t = len - horizon; t < len; ++t) out.at(i, t, 2) = mask_value;
  }
  return out;
}

}  // namespace cdmp
