#pragma once

#include <span>
#include <vector>

#include "infocnf/mlp.hpp"

namespace infocnf {

struct GateConfig {
  std::size_t hidden = 16;
  double init_log10_tol = -5.0;  // initial mean of the log10-tolerance Gaussian
  double init_sigma = 0.5;       // initial stddev, in log10 units
  double min_log10 = -8.0;
  double max_log10 = -1.0;
  bool baseline = true;
  double baseline_decay = 0.99;
};

/// One draw from a layer's tolerance policy.
struct GateDraw {
  std::size_t layer = 0;
  double mu = 0.0;
  double sigma = 0.0;
  double pre_clamp = 0.0;  // sampled log10-tolerance before clamping
  double tolerance = 0.0;  // 10^clamp(pre_clamp)
  Var log_prob;            // log N(pre_clamp; mu, sigma^2), differentiable w.r.t. the gate
};

/// Per-layer Gaussian policy over log10 error tolerances. Each layer owns a
/// small network mapping the batch-mean layer input to (mu, log sigma).
class GatePolicy {
 public:
  GatePolicy() = default;
  GatePolicy(ParamStore& store, std::size_t dim, std::size_t num_layers, const GateConfig& cfg,
             const std::string& prefix = "gate");

  /// Random hidden weights; output layer zeroed with the bias set to
  /// (init_log10_tol, log init_sigma) so every layer starts at the same policy.
  void init(ParamStore& store, Rng& rng) const;

  GateDraw sample(Tape& tape, std::size_t layer, const Tensor& summary, Rng& rng) const;
  /// Deterministic tolerance 10^clamp(mu), used for learned-tolerance evaluation.
  GateDraw mean(Tape& tape, std::size_t layer, const Tensor& summary) const;

  std::size_t size() const { return nets_.size(); }
  const GateConfig& config() const { return cfg_; }
  const Mlp& net(std::size_t layer) const { return nets_.at(layer); }

 private:
  GateDraw evaluate(Tape& tape, std::size_t layer, const Tensor& summary) const;

  std::vector<Mlp> nets_;
  GateConfig cfg_;
};

/// Per-dimension mean over the batch rows; [1, d].
Tensor gate_feature_summary(const Tensor& batch);

double clamp_log10_tolerance(double u, const GateConfig& cfg);

/// r_i = -[L - (alpha / N) * sum_{j >= i} R_j]. Plain values: no gradient flows through returns.
std::vector<double> compute_returns(double loss, std::span<const double> rewards, double alpha);

/// alpha = 0.1 * |L0| * N / sum |R_i|, so the reward term starts an order of
/// magnitude below the loss.
double calibrate_alpha(double loss0, std::span<const double> rewards0);

/// Exponential moving average of returns per layer.
class ReturnBaseline {
 public:
  ReturnBaseline() = default;
  ReturnBaseline(std::size_t layers, double decay, bool enabled);

  /// Current baseline b_i (0 when disabled or before the first update).
  double value(std::size_t layer) const;
  std::vector<double> values() const;
  void update(std::span<const double> returns);
  bool enabled() const { return enabled_; }

 private:
  std::vector<double> values_;
  std::vector<bool> seen_;
  double decay_ = 0.99;
  bool enabled_ = true;
};

/// loss - sum_i log p(g_i | x) * (r_i - b_i). Its gradient is the loss
/// gradient plus the REINFORCE term.
Var reinforce_surrogate(const Var& loss, std::span<const GateDraw> draws, std::span<const double> returns,
                        std::span<const double> baseline);

}  // namespace infocnf
