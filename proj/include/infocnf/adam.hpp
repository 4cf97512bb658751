#pragma once

#include <span>
#include <utility>
#include <vector>

#include "infocnf/tape.hpp"

namespace infocnf {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over a flat parameter vector.
class Adam {
 public:
  Adam() = default;
  explicit Adam(std::size_t size, AdamConfig cfg = {});

  /// One update. A non-finite gradient entry raises TrainingError naming the
  /// offending parameter when `registry` is given; parameters are untouched then.
  void step(std::span<double> params, std::span<const double> grads, double lr,
            const ParamStore* registry = nullptr);

  long steps() const { return t_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::vector<double> m_, v_;
  long t_ = 0;
};

/// Piecewise-constant learning rate: `base` until the first milestone, then
/// the milestone value from its epoch on. Epochs are 1-based.
class LrSchedule {
 public:
  LrSchedule() = default;
  LrSchedule(double base, std::vector<std::pair<int, double>> milestones);

  double at(int epoch) const;
  double base() const { return base_; }
  const std::vector<std::pair<int, double>>& milestones() const { return milestones_; }

 private:
  double base_ = 1e-3;
  std::vector<std::pair<int, double>> milestones_;
};

}  // namespace infocnf
