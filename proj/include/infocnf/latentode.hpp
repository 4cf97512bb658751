#pragma once

#include <span>
#include <vector>

#include "infocnf/condition.hpp"
#include "infocnf/odesolve.hpp"
#include "infocnf/synthdata.hpp"

namespace infocnf {

struct LatentOdeSpec {
  std::size_t obs_dim = 2;
  std::size_t latent_dim = 5;
  std::size_t d_y = 3;  // supervised block, dims [0, d_y)
  std::size_t rnn_hidden = 25;
  std::size_t dyn_hidden = 20;
  std::size_t dec_hidden = 20;
  bool partitioned = true;
  double sigma_obs = 0.3;
  double beta_sup = 1.0;
};

/// Label features fed to q_phi: [(a - 1) / 0.08, (b - 0.25) / 0.03, is_cw, is_ccw].
inline constexpr std::size_t kSpiralLabelWidth = 4;
Tensor spiral_label_features(std::span<const SpiralSystem> systems);

/// A batch of equally spaced windows sharing one relative time grid.
struct SequenceBatch {
  std::vector<double> times;  // relative to the window start, times[0] == 0
  std::vector<Tensor> steps;  // one [B, obs_dim] tensor per time
  std::vector<SpiralSystem> systems;
  std::size_t size() const { return systems.size(); }
};

/// Noisy observation windows of the chosen curves.
SequenceBatch window_batch(const SpiralCorpus& corpus, std::span<const std::size_t> curves);
/// Ground truth for the `count` points right after each chosen window, on the
/// same relative grid (times continue past the window).
SequenceBatch future_batch(const SpiralCorpus& corpus, std::span<const std::size_t> curves, std::size_t count);

class LatentOdeModel {
 public:
  LatentOdeModel() = default;
  /// Architecture with all parameters zero.
  explicit LatentOdeModel(const LatentOdeSpec& spec);

  void init_random(Rng& rng);

  struct Posterior {
    Var mu;
    Var log_sigma;
  };
  /// Tanh recurrence over the observations in reverse time order; the final
  /// hidden state maps linearly to the posterior of z(t0).
  Posterior encode(Tape& tape, std::span<const Tensor> steps) const;

  /// Latent trajectory from z0 through `times`, decoded to observation space.
  struct Decoded {
    std::vector<Var> points;
    SolveStats stats;
  };
  Decoded decode(Tape& tape, const Var& z0, std::span<const double> times, const SolverConfig& solver) const;

  /// Prior of z0 per row; N(0, I) for the baseline, [q_phi(y), N(0, I)] when partitioned.
  Posterior prior(Tape& tape, std::span<const SpiralSystem> systems) const;
  /// q_theta(z_y) = [a_hat, b_hat, logit_cw, logit_ccw] on the standardized label scale.
  Var supervise(Tape& tape, const Var& z_y) const;

  const LatentOdeSpec& spec() const { return spec_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  std::size_t conditioning_parameter_count() const;

 private:
  LatentOdeSpec spec_;
  ParamStore params_;
  ParamId enc_wx_, enc_wh_, enc_b_;
  Linear enc_head_;
  Mlp dynamics_;
  Mlp decoder_;
  Linear cond_prior_;  // q_phi, partitioned only
  Linear cond_sup_;    // q_theta, partitioned only
};

struct ElboResult {
  Var loss;   // -recon + kl + beta_sup * sup
  Var recon;  // mean per-sequence Gaussian log-likelihood
  Var kl;     // mean per-sequence KL(q(z0) || p(z0))
  Var sup;    // mean supervised loss (zero scalar for the baseline)
  SolveStats stats;
};

/// Per-dimension closed-form KL between diagonal Gaussians; [B, d].
Var gaussian_kl(const Var& mu_q, const Var& log_sigma_q, const Var& mu_p, const Var& log_sigma_p);

/// rng == nullptr decodes from the posterior mean; otherwise one
/// reparameterized sample per sequence.
ElboResult elbo(Tape& tape, const LatentOdeModel& model, const SequenceBatch& batch, const SolverConfig& solver,
                Rng* rng);

struct Extrapolation {
  std::vector<Tensor> points;  // one [B, obs_dim] per requested time
  double mse = 0.0;            // against `truth` when provided, else NaN
  SolveStats stats;
};

/// Where z_y(t0) comes from when extrapolating a partitioned model: the
/// encoded prefix alone, or the prior mean q_phi(y) of the true labels.
enum class ExtrapolationSource { prefix, labels };

/// Encode the prefix, integrate the posterior mean to `times`, decode.
Extrapolation extrapolate(const LatentOdeModel& model, const SequenceBatch& prefix, std::span<const double> times,
                          const SolverConfig& solver, const SequenceBatch* truth = nullptr,
                          ExtrapolationSource source = ExtrapolationSource::prefix);

/// Mean squared error over all points and coordinates.
double trajectory_mse(std::span<const Tensor> predicted, std::span<const Tensor> truth);

}  // namespace infocnf
