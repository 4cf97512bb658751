#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <span>
#include <vector>

#include "infocnf/rng.hpp"
#include "infocnf/tensor.hpp"

namespace infocnf {

/// Points (one per row) with optional integer labels.
struct Dataset {
  Tensor x;
  std::vector<int> labels;  // empty when unlabeled
  std::size_t num_classes = 0;

  std::size_t size() const { return x.rows(); }
  std::size_t dim() const { return x.cols(); }
  Dataset subset(std::span<const std::size_t> rows) const;
};

struct MixtureSpec {
  std::vector<double> weights{0.3, 0.4, 0.3};
  std::vector<double> means{-2.0, 0.0, 2.0};
  std::vector<double> stddevs{0.4, 0.5, 0.4};

  void validate() const;
  double log_density(double x) const;
  double density(double x) const;
};

/// n i.i.d. draws, shape [n, 1].
Dataset gen_1d_mixture(const MixtureSpec& spec, std::size_t n, std::uint64_t seed);

struct Labeled2dSpec {
  std::vector<std::array<double, 2>> means{{-2.0, -2.0}, {2.0, -2.0}, {-2.0, 2.0}, {2.0, 2.0}};
  std::vector<std::array<double, 2>> stddevs{{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}};
  std::size_t samples_per_class = 500;

  std::size_t num_classes() const { return means.size(); }
  void validate() const;
  double class_log_density(int label, double x, double y) const;
};

/// samples_per_class points per class, classes in consecutive blocks.
Dataset gen_2d_labeled(const Labeled2dSpec& spec, std::uint64_t seed);

enum class SpiralDirection { clockwise, counter_clockwise };

const char* spiral_direction_name(SpiralDirection d);

struct SpiralSystem {
  double a = 1.0;
  double b = 0.25;
  SpiralDirection direction = SpiralDirection::counter_clockwise;
};

/// clockwise: R = a + 50 b / t, centred at (-5, 0); counter-clockwise: R = a + b t, centred at (5, 0).
std::array<double, 2> gen_spiral(const SpiralSystem& sys, double t);

struct SpiralSpec {
  std::size_t n_curves = 5000;
  std::size_t n_points = 1000;
  std::size_t window = 200;
  /// Ground-truth points kept after every window for extrapolation targets.
  std::size_t reserve = 100;
  double t_lo = 0.1 * std::numbers::pi;
  double t_hi = 6.0 * std::numbers::pi;
  double noise = 0.3;
  double a_mean = 1.0, a_sd = 0.08;
  double b_mean = 0.25, b_sd = 0.03;

  void validate() const;
};

struct SpiralCurve {
  SpiralSystem system;
  Tensor truth;               // [n_points, 2]
  std::size_t window_start = 0;
  Tensor window;              // [window, 2], noisy
};

struct SpiralCorpus {
  std::vector<double> times;  // n_points equally spaced
  std::vector<SpiralCurve> curves;
  SpiralSpec spec;

  std::vector<double> window_times(const SpiralCurve& c) const;
};

/// Curves alternate clockwise / counter-clockwise, so exactly half go each way.
SpiralCorpus gen_spiral_corpus(const SpiralSpec& spec, std::uint64_t seed);

// CSV dumps with a header row.
void write_points_csv(const std::filesystem::path& path, const Dataset& data);
/// One row per window step: sequence id, t, x, y, a, b, direction.
void write_spiral_windows_csv(const std::filesystem::path& path, const SpiralCorpus& corpus);
/// One row per ground-truth point: sequence id, t, x, y.
void write_spiral_truth_csv(const std::filesystem::path& path, const SpiralCorpus& corpus);

}  // namespace infocnf
