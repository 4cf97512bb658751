#include "infocnf/tolgate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "infocnf/errors.hpp"

namespace infocnf {

GatePolicy::GatePolicy(ParamStore& store, std::size_t dim, std::size_t num_layers, const GateConfig& cfg,
                       const std::string& prefix)
    : cfg_(cfg) {
  if (!(cfg.min_log10 < cfg.max_log10)) throw ConfigError("gate clamp range is empty");
  if (!(cfg.init_sigma > 0.0)) throw ConfigError("gate init_sigma must be positive");
  for (std::size_t k = 0; k < num_layers; ++k) {
    nets_.emplace_back(store, fmt::format("{}.{}", prefix, k), std::vector<std::size_t>{dim, cfg.hidden, 2},
                       Activation::tanh);
  }
}

void GatePolicy::init(ParamStore& store, Rng& rng) const {
  for (const auto& net : nets_) {
    net.init_random(store, rng);
    net.zero_output(store);
    auto bias = store.values(net.bias(net.layer_count() - 1));
    bias[0] = cfg_.init_log10_tol;
    bias[1] = std::log(cfg_.init_sigma);
  }
}

double clamp_log10_tolerance(double u, const GateConfig& cfg) { return std::clamp(u, cfg.min_log10, cfg.max_log10); }

GateDraw GatePolicy::evaluate(Tape& tape, std::size_t layer, const Tensor& summary) const {
  const Mlp& net = nets_.at(layer);
  const Var out = net.forward(tape, tape.constant(summary));
  GateDraw d;
  d.layer = layer;
  d.mu = out.value()[0];
  d.sigma = std::exp(out.value()[1]);
  d.log_prob = out;  // stashed; callers replace it with the log density
  return d;
}

namespace {

// log N(u; mu, sigma^2) with u a constant, from the gate output row [mu, log sigma].
Var gaussian_log_prob(const Var& out, double u) {
  const Var mu = slice_cols(out, 0, 1);
  const Var log_sigma = slice_cols(out, 1, 2);
  const Var standardized = div(add_scalar(scale(mu, -1.0), u), exp(log_sigma));
  const Var lp = sub(scale(square(standardized), -0.5), log_sigma);
  return add_scalar(lp, -0.5 * std::log(2.0 * std::numbers::pi));
}

}  // namespace

GateDraw GatePolicy::sample(Tape& tape, std::size_t layer, const Tensor& summary, Rng& rng) const {
  GateDraw d = evaluate(tape, layer, summary);
  d.pre_clamp = d.mu + d.sigma * rng.normal();
  d.tolerance = std::pow(10.0, clamp_log10_tolerance(d.pre_clamp, cfg_));
  d.log_prob = gaussian_log_prob(d.log_prob, d.pre_clamp);
  return d;
}

GateDraw GatePolicy::mean(Tape& tape, std::size_t layer, const Tensor& summary) const {
  GateDraw d = evaluate(tape, layer, summary);
  d.pre_clamp = d.mu;
  d.tolerance = std::pow(10.0, clamp_log10_tolerance(d.mu, cfg_));
  d.log_prob = gaussian_log_prob(d.log_prob, d.pre_clamp);
  return d;
}

Tensor gate_feature_summary(const Tensor& batch) {
  const std::size_t r = batch.rows(), c = batch.cols();
  if (r == 0) throw UsageError("gate_feature_summary: empty batch");
  Tensor out = Tensor::zeros(1, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += batch[i * c + j];
  for (auto& v : out.data()) v /= static_cast<double>(r);
  return out;
}

std::vector<double> compute_returns(double loss, std::span<const double> rewards, double alpha) {
  if (rewards.empty()) throw UsageError("compute_returns: need at least one reward");
  if (alpha < 0.0) throw UsageError("compute_returns: alpha must be nonnegative");
  const double n = static_cast<double>(rewards.size());
  std::vector<double> r(rewards.size());
  double tail = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    tail += rewards[i];
    r[i] = -(loss - (alpha / n) * tail);
  }
  return r;
}

double calibrate_alpha(double loss0, std::span<const double> rewards0) {
  double total = 0.0;
  for (double r : rewards0) total += std::abs(r);
  if (total == 0.0) return 0.0;
  return 0.1 * std::abs(loss0) * static_cast<double>(rewards0.size()) / total;
}

ReturnBaseline::ReturnBaseline(std::size_t layers, double decay, bool enabled)
    : values_(layers, 0.0), seen_(layers, false), decay_(decay), enabled_(enabled) {}

double ReturnBaseline::value(std::size_t layer) const {
  if (!enabled_ || layer >= values_.size()) return 0.0;
  return values_[layer];
}

std::vector<double> ReturnBaseline::values() const {
  std::vector<double> out(values_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = value(i);
  return out;
}

void ReturnBaseline::update(std::span<const double> returns) {
  if (!enabled_) return;
  if (returns.size() != values_.size()) throw UsageError("ReturnBaseline: layer count mismatch");
  for (std::size_t i = 0; i < returns.size(); ++i) {
    if (!seen_[i]) {
      values_[i] = returns[i];
      seen_[i] = true;
    } else {
      values_[i] = decay_ * values_[i] + (1.0 - decay_) * returns[i];
    }
  }
}

Var reinforce_surrogate(const Var& loss, std::span<const GateDraw> draws, std::span<const double> returns,
                        std::span<const double> baseline) {
  if (draws.size() != returns.size()) throw UsageError("reinforce_surrogate: draws and returns differ in count");
  if (!baseline.empty() && baseline.size() != returns.size()) {
    throw UsageError("reinforce_surrogate: baseline and returns differ in count");
  }
  std::vector<Var> terms{loss};
  std::vector<double> coeffs{1.0};
  for (std::size_t i = 0; i < draws.size(); ++i) {
    const double b = baseline.empty() ? 0.0 : baseline[i];
    terms.push_back(draws[i].log_prob);
    coeffs.push_back(-(returns[i] - b));
  }
  return lincomb(terms, coeffs);
}

}  // namespace infocnf
