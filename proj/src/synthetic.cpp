#include "cdmp/synthetic.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "cdmp/random.h"

namespace cdmp {

namespace fs = std::filesystem;

namespace {

struct Sample {
  double x, y, z;
};

// Continuous stream of one subject performing one activity.
class ActivitySignal {
 public:
  ActivitySignal(int activity, int subject, double noise, std::mt19937_64& rng)
      : noise_(noise), rng_(rng) {
    const double a = activity;
    omega_ = 2.0 * std::numbers::pi * (0.6 + 0.35 * a) / kSampleRateHz;
    amplitude_ = (0.3 + 0.15 * (activity % 3)) * (1.0 + 0.05 * ((subject * 7) % 5 - 2));
    gx_ = 0.5 * std::cos(1.3 * a);
    gy_ = 0.5 * std::sin(1.3 * a);
    gz_ = 0.3 * std::cos(0.7 * a + 1.0);
    phase_ = 2.0 * std::numbers::pi * uniform_unit(rng_);
  }

  Sample at(std::size_t t) {
    const double w = omega_ * static_cast<double>(t) + phase_;
    const double dx = amplitude_ * std::sin(w) + jitter();
    const double dy = 0.7 * amplitude_ * std::sin(2.0 * w + 0.5) + jitter();
    const double dz = 0.6 * dx - 0.4 * dy + 0.5 * jitter();
    return {gx_ + dx, gy_ + dy, gz_ + dz};
  }

 private:
  double jitter() { return noise_ * (2.0 * uniform_unit(rng_) - 1.0); }

  double noise_;
  std::mt19937_64& rng_;
  double omega_, amplitude_, gx_, gy_, gz_, phase_;
};

std::ofstream open_output(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::string fmt(const char* format, double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

std::size_t roster(DatasetId id, const SyntheticOptions& o) {
  const std::size_t n = o.subjects ? o.subjects : dataset_info(id).expected_subjects;
  if (n == 0) throw std::invalid_argument("synthetic dataset needs at least one subject");
  return n;
}

void write_ucihar(const fs::path& root, const SyntheticOptions& o, std::mt19937_64& rng) {
  constexpr std::size_t kRow = 128;
  const std::size_t subjects = roster(DatasetId::UciHar, o);
  const std::vector<int> test_subjects{2, 4, 9, 10, 12, 13, 18, 20, 24};
  for (const std::string part : {"train", "test"}) {
    std::vector<std::ofstream> axes;
    for (const char axis : {'x', 'y', 'z'}) {
      axes.push_back(open_output(root / part / "Inertial Signals" /
                                 ("total_acc_" + std::string(1, axis) + "_" + part + ".txt")));
    }
    std::ofstream labels = open_output(root / part / ("y_" + part + ".txt"));
    std::ofstream subject_file = open_output(root / part / ("subject_" + part + ".txt"));
    for (int s = 1; s <= static_cast<int>(subjects); ++s) {
      const bool is_test = std::find(test_subjects.begin(), test_subjects.end(), s) != test_subjects.end();
      if (is_test != (std::string(part) == "test")) continue;
      for (int a = 0; a < 6; ++a) {
        ActivitySignal signal(a, s, o.noise, rng);
        std::vector<Sample> stream;
        for (std::size_t t = 0; t < (o.ucihar_rows + 1) * kRow / 2; ++t) stream.push_back(signal.at(t));
        for (std::size_t r = 0; r < o.ucihar_rows; ++r) {
          for (std::size_t t = 0; t < kRow; ++t) {
            const Sample& v = stream[r * kRow / 2 + t];
            axes[0] << fmt(" %.7e", v.x);
            axes[1] << fmt(" %.7e", v.y);
            axes[2] << fmt(" %.7e", v.z);
          }
          for (auto& f : axes) f << "\n";
          labels << a + 1 << "\n";
          subject_file << s << "\n";
        }
      }
    }
  }
}

void write_motionsense(const fs::path& root, const SyntheticOptions& o, std::mt19937_64& rng) {
  struct Activity {
    const char* prefix;
    std::vector<int> trials;
  };
  // Label order follows the loader: dws, ups, wlk, sit, std, jog.
  const std::vector<Activity> activities{{"dws", {1, 2, 11}}, {"ups", {3, 4, 12}},
                                         {"wlk", {7, 8, 15}}, {"sit", {5, 13}},
                                         {"std", {6, 14}},    {"jog", {9, 16}}};
  const std::size_t subjects = roster(DatasetId::MotionSense, o);
  const fs::path base = root / "A_DeviceMotion_data";
  for (std::size_t a = 0; a < activities.size(); ++a) {
    const auto& act = activities[a];
    const std::size_t trials = std::min(o.motionsense_trials, act.trials.size());
    for (std::size_t k = 0; k < trials; ++k) {
      const fs::path dir = base / (std::string(act.prefix) + "_" + std::to_string(act.trials[k]));
      for (int s = 1; s <= static_cast<int>(subjects); ++s) {
        std::ofstream out = open_output(dir / ("sub_" + std::to_string(s) + ".csv"));
        out << ",attitude.roll,attitude.pitch,attitude.yaw,gravity.x,gravity.y,gravity.z,"
               "rotationRate.x,rotationRate.y,rotationRate.z,userAcceleration.x,"
               "userAcceleration.y,userAcceleration.z\n";
        ActivitySignal signal(static_cast<int>(a), s, o.noise, rng);
        for (std::size_t t = 0; t < o.motionsense_samples; ++t) {
          const Sample v = signal.at(t);
          out << t << ",0.0,0.0,0.0,0.0,0.0,-1.0,0.0,0.0,0.0" << fmt(",%.6f", v.x)
              << fmt(",%.6f", v.y) << fmt(",%.6f", v.z) << "\n";
        }
      }
    }
  }
}

void write_hapt(const fs::path& root, const SyntheticOptions& o, std::mt19937_64& rng) {
  const std::size_t users = roster(DatasetId::Hapt, o);
  const fs::path base = root / "RawData";
  std::ofstream labels = open_output(base / "labels.txt");
  for (int u = 1; u <= static_cast<int>(users); ++u) {
    char name[64];
    std::snprintf(name, sizeof name, "acc_exp%02d_user%02d.txt", u, u);
    std::ofstream out = open_output(base / name);
    std::size_t t = 0;
    auto emit = [&](ActivitySignal& signal, std::size_t n) {
      for (std::size_t i = 0; i < n; ++i, ++t) {
        const Sample v = signal.at(t);
        out << fmt("%.8e", v.x) << fmt(" %.8e", v.y) << fmt(" %.8e", v.z) << "\n";
      }
    };
    ActivitySignal idle(-1, u, o.noise, rng);
    for (int k = 0; k < 12; ++k) {
      const int a = (k + u) % 12;  // rotate the order per user
      emit(idle, o.hapt_gap_samples);
      const std::size_t n = a < 6 ? o.hapt_activity_samples : o.hapt_transition_samples;
      ActivitySignal signal(a, u, o.noise, rng);
      const std::size_t start = t + 1;
      emit(signal, n);
      labels << u << " " << u << " " << a + 1 << " " << start << " " << t << "\n";
    }
    emit(idle, o.hapt_gap_samples);
  }
}

}  // namespace

void write_synthetic_dataset(DatasetId id, const fs::path& root, const SyntheticOptions& options) {
  std::mt19937_64 rng(derive_seed(options.seed, {static_cast<std::uint64_t>(id)}));
  switch (id) {
    case DatasetId::UciHar:
      write_ucihar(root, options, rng);
      break;
    case DatasetId::MotionSense:
      write_motionsense(root, options, rng);
      break;
    case DatasetId::Hapt:
      write_hapt(root, options, rng);
      break;
  }
}

}  // namespace cdmp
