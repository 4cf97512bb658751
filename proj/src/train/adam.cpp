#include "infocnf/adam.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "infocnf/errors.hpp"

namespace infocnf {

Adam::Adam(std::size_t size, AdamConfig cfg) : cfg_(cfg), m_(size, 0.0), v_(size, 0.0) {}

namespace {

std::string locate(std::size_t index, const ParamStore* registry) {
  if (!registry) return fmt::format("flat index {}", index);
  for (const auto& e : registry->entries()) {
    if (index >= e.offset && index < e.offset + e.size) {
      return fmt::format("'{}' element {} (flat index {})", e.name, index - e.offset, index);
    }
  }
  return fmt::format("flat index {}", index);
}

}  // namespace

void Adam::step(std::span<double> params, std::span<const double> grads, double lr, const ParamStore* registry) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ShapeError(fmt::format("adam: expected {} parameters, got {} values and {} gradients", m_.size(),
                                 params.size(), grads.size()));
  }
  std::size_t bad = 0, first_bad = 0;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      if (bad++ == 0) first_bad = i;
    }
  }
  if (bad) {
    throw TrainingError(fmt::format("non-finite gradient at {} ({} of {} entries affected, step {})",
                                    locate(first_bad, registry), bad, grads.size(), t_ + 1));
  }
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g * g;
    const double m_hat = m_[i] / c1;
    const double v_hat = v_[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
  }
}

LrSchedule::LrSchedule(double base, std::vector<std::pair<int, double>> milestones)
    : base_(base), milestones_(std::move(milestones)) {
  if (!(base > 0.0)) throw ConfigError("learning rate must be positive");
  std::sort(milestones_.begin(), milestones_.end());
  double prev = base;
  int prev_epoch = 0;
  for (const auto& [epoch, lr] : milestones_) {
    if (epoch < 1) throw ConfigError("lr_schedule epochs are 1-based");
    if (epoch == prev_epoch) throw ConfigError(fmt::format("lr_schedule lists epoch {} twice", epoch));
    if (!(lr > 0.0)) throw ConfigError("lr_schedule values must be positive");
    if (lr > prev) throw ConfigError("lr_schedule must be non-increasing");
    prev = lr;
    prev_epoch = epoch;
  }
}

double LrSchedule::at(int epoch) const {
  double lr = base_;
  for (const auto& [e, v] : milestones_) {
    if (epoch >= e) lr = v;
  }
  return lr;
}

}  // namespace infocnf
