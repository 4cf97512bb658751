#include "infocnf/latentode.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "infocnf/errors.hpp"

namespace infocnf {

Tensor spiral_label_features(std::span<const SpiralSystem> systems) {
  Tensor out = Tensor::zeros(systems.size(), kSpiralLabelWidth);
  for (std::size_t i = 0; i < systems.size(); ++i) {
    const auto& s = systems[i];
    out.at(i, 0) = (s.a - 1.0) / 0.08;
    out.at(i, 1) = (s.b - 0.25) / 0.03;
    out.at(i, 2) = s.direction == SpiralDirection::clockwise ? 1.0 : 0.0;
    out.at(i, 3) = s.direction == SpiralDirection::clockwise ? 0.0 : 1.0;
  }
  return out;
}

namespace {

std::vector<double> relative_grid(const SpiralCorpus& corpus, std::size_t count) {
  // Same offsets for every curve, so the whole batch shares one solve.
  std::vector<double> t(count);
  for (std::size_t i = 0; i < count; ++i) t[i] = corpus.times[i] - corpus.times[0];
  return t;
}

}  // namespace

SequenceBatch window_batch(const SpiralCorpus& corpus, std::span<const std::size_t> curves) {
  if (curves.empty()) throw UsageError("window_batch: no curves selected");
  const std::size_t T = corpus.spec.window;
  SequenceBatch b;
  b.times = relative_grid(corpus, T);
  b.steps.assign(T, Tensor::zeros(curves.size(), 2));
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto& c = corpus.curves.at(curves[i]);
    b.systems.push_back(c.system);
    for (std::size_t k = 0; k < T; ++k) {
      b.steps[k].at(i, 0) = c.window.at(k, 0);
      b.steps[k].at(i, 1) = c.window.at(k, 1);
    }
  }
  return b;
}

SequenceBatch future_batch(const SpiralCorpus& corpus, std::span<const std::size_t> curves, std::size_t count) {
  if (curves.empty() || count == 0) throw UsageError("future_batch: empty request");
  const std::size_t T = corpus.spec.window;
  SequenceBatch b;
  const auto grid = relative_grid(corpus, T + count);
  b.times.assign(grid.begin() + static_cast<std::ptrdiff_t>(T), grid.end());
  b.steps.assign(count, Tensor::zeros(curves.size(), 2));
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto& c = corpus.curves.at(curves[i]);
    if (c.window_start + T + count > corpus.times.size()) {
      throw UsageError(fmt::format("future_batch: curve {} has fewer than {} points after its window", curves[i], count));
    }
    b.systems.push_back(c.system);
    for (std::size_t k = 0; k < count; ++k) {
      b.steps[k].at(i, 0) = c.truth.at(c.window_start + T + k, 0);
      b.steps[k].at(i, 1) = c.truth.at(c.window_start + T + k, 1);
    }
  }
  return b;
}

LatentOdeModel::LatentOdeModel(const LatentOdeSpec& spec) : spec_(spec) {
  if (spec.d_y == 0 || spec.d_y >= spec.latent_dim) throw ConfigError("latent ODE needs 0 < d_y < latent_dim");
  if (!(spec.sigma_obs > 0.0)) throw ConfigError("sigma_obs must be positive");
  if (spec.beta_sup < 0.0) throw ConfigError("beta_sup must be nonnegative");
  const std::size_t H = spec.rnn_hidden, D = spec.latent_dim;
  enc_wx_ = params_.add("enc.wx", {spec.obs_dim, H});
  enc_wh_ = params_.add("enc.wh", {H, H});
  enc_b_ = params_.add("enc.b", {1, H});
  enc_head_ = Linear(params_, "enc.head", H, 2 * D);
  dynamics_ = Mlp(params_, "dyn", {D, spec.dyn_hidden, D}, Activation::softplus);
  decoder_ = Mlp(params_, "dec", {D, spec.dec_hidden, spec.obs_dim}, Activation::tanh);
  if (spec.partitioned) {
    cond_prior_ = Linear(params_, "cond.prior", kSpiralLabelWidth, 2 * spec.d_y);
    cond_sup_ = Linear(params_, "cond.sup", spec.d_y, kSpiralLabelWidth);
  }
}

void LatentOdeModel::init_random(Rng& rng) {
  auto glorot = [&](ParamId id) {
    const auto& e = params_.entry(id);
    const double sd = std::sqrt(2.0 / static_cast<double>(e.shape[0] + e.shape[1]));
    for (auto& v : params_.values(id)) v = rng.normal(0.0, sd);
  };
  glorot(enc_wx_);
  glorot(enc_wh_);
  glorot(enc_head_.weight());
  dynamics_.init_random(params_, rng);
  decoder_.init_random(params_, rng);
}

std::size_t LatentOdeModel::conditioning_parameter_count() const {
  const std::vector<std::string> prefixes{"cond."};
  return params_.count_with_prefix(prefixes);
}

LatentOdeModel::Posterior LatentOdeModel::encode(Tape& tape, std::span<const Tensor> steps) const {
  if (steps.empty()) throw UsageError("encode: empty sequence");
  const std::size_t B = steps.front().rows();
  const Var wx = tape.param(enc_wx_), wh = tape.param(enc_wh_), b = tape.param(enc_b_);
  Var h = tape.constant(Tensor::zeros(B, spec_.rnn_hidden));
  for (std::size_t k = steps.size(); k-- > 0;) {
    const Var x = tape.constant(steps[k]);
    h = tanh(add_bias(add(matmul(x, wx), matmul(h, wh)), b));
  }
  const Var out = enc_head_.apply(tape, h);
  const std::size_t D = spec_.latent_dim;
  return {slice_cols(out, 0, D), slice_cols(out, D, 2 * D)};
}

LatentOdeModel::Decoded LatentOdeModel::decode(Tape& tape, const Var& z0, std::span<const double> times,
                                               const SolverConfig& solver) const {
  const Dynamics f = [&](const Var& z, double) { return dynamics_.forward(tape, z); };
  Decoded out;
  std::vector<Var> zs;
  if (times.size() == 1) {
    if (times[0] != 0.0) throw UsageError("decode: a single time must be 0");
    zs.push_back(z0);
  } else {
    auto sol = integrate_grid(f, z0, times, solver);
    zs = std::move(sol.ys);
    out.stats = sol.stats;
  }
  out.points.reserve(zs.size());
  for (const auto& z : zs) out.points.push_back(decoder_.forward(tape, z));
  return out;
}

LatentOdeModel::Posterior LatentOdeModel::prior(Tape& tape, std::span<const SpiralSystem> systems) const {
  const std::size_t B = systems.size(), D = spec_.latent_dim;
  if (!spec_.partitioned) {
    return {tape.constant(Tensor::zeros(B, D)), tape.constant(Tensor::zeros(B, D))};
  }
  const std::size_t dy = spec_.d_y;
  const Var out = cond_prior_.apply(tape, tape.constant(spiral_label_features(systems)));
  const Var rest = tape.constant(Tensor::zeros(B, D - dy));
  return {concat_cols(slice_cols(out, 0, dy), rest), concat_cols(slice_cols(out, dy, 2 * dy), rest)};
}

Var LatentOdeModel::supervise(Tape& tape, const Var& z_y) const {
  if (!spec_.partitioned) throw UsageError("the baseline latent ODE has no supervised head");
  return cond_sup_.apply(tape, z_y);
}

Var gaussian_kl(const Var& mu_q, const Var& log_sigma_q, const Var& mu_p, const Var& log_sigma_p) {
  const Var var_ratio_num = add(exp(scale(log_sigma_q, 2.0)), square(sub(mu_q, mu_p)));
  const Var quad = scale(div(var_ratio_num, exp(scale(log_sigma_p, 2.0))), 0.5);
  return add_scalar(add(sub(log_sigma_p, log_sigma_q), quad), -0.5);
}

ElboResult elbo(Tape& tape, const LatentOdeModel& model, const SequenceBatch& batch, const SolverConfig& solver,
                Rng* rng) {
  const auto& spec = model.spec();
  const std::size_t B = batch.size();
  if (batch.steps.size() != batch.times.size()) throw UsageError("elbo: times and steps differ in length");
  const auto post = model.encode(tape, batch.steps);

  Var z0 = post.mu;
  if (rng) {
    Tensor eps = Tensor::zeros(B, spec.latent_dim);
    for (auto& e : eps.data()) e = rng->normal();
    z0 = add(post.mu, mul(exp(post.log_sigma), tape.constant(std::move(eps))));
  }

  const auto dec = model.decode(tape, z0, batch.times, solver);
  // Gaussian log-likelihood with fixed sigma_obs, summed over time and coordinates.
  std::vector<Var> sq;
  sq.reserve(dec.points.size());
  for (std::size_t k = 0; k < dec.points.size(); ++k) {
    sq.push_back(sum_rows(square(sub(dec.points[k], tape.constant(batch.steps[k])))));
  }
  const double s2 = spec.sigma_obs * spec.sigma_obs;
  const double n_obs = static_cast<double>(batch.times.size() * spec.obs_dim);
  const std::vector<double> coeffs(sq.size(), -0.5 / s2);
  const Var recon_rows = add_scalar(lincomb(sq, coeffs), -0.5 * n_obs * std::log(2.0 * std::numbers::pi * s2));

  const auto pri = model.prior(tape, batch.systems);
  const Var kl_rows = sum_rows(gaussian_kl(post.mu, post.log_sigma, pri.mu, pri.log_sigma));

  ElboResult out;
  out.stats = dec.stats;
  out.recon = mean(recon_rows);
  out.kl = mean(kl_rows);
  if (spec.partitioned) {
    // q_theta reads the supervised block of the code that feeds the decoder.
    const Var pred = model.supervise(tape, slice_cols(z0, 0, spec.d_y));
    const Tensor labels = spiral_label_features(batch.systems);
    Tensor ab = Tensor::zeros(B, 2), dir = Tensor::zeros(B, 2);
    for (std::size_t i = 0; i < B; ++i) {
      ab.at(i, 0) = labels.at(i, 0);
      ab.at(i, 1) = labels.at(i, 1);
      dir.at(i, 0) = labels.at(i, 2);
      dir.at(i, 1) = labels.at(i, 3);
    }
    const Var mse = scale(sum_rows(square(sub(slice_cols(pred, 0, 2), tape.constant(ab)))), 0.5);
    const Var xent = cross_entropy(slice_cols(pred, 2, 4), dir);
    out.sup = mean(add(mse, xent));
  } else {
    out.sup = tape.constant(Tensor::scalar(0.0));
  }
  const std::vector<Var> terms{out.recon, out.kl, out.sup};
  const std::vector<double> w{-1.0, 1.0, spec.partitioned ? spec.beta_sup : 0.0};
  out.loss = lincomb(terms, w);
  return out;
}

Extrapolation extrapolate(const LatentOdeModel& model, const SequenceBatch& prefix, std::span<const double> times,
                          const SolverConfig& solver, const SequenceBatch* truth, ExtrapolationSource source) {
  if (times.empty()) throw UsageError("extrapolate: no target times");
  Tape tape(&model.params());
  const auto post = model.encode(tape, prefix.steps);
  Var z0 = post.mu;
  if (source == ExtrapolationSource::labels && model.spec().partitioned) {
    const std::size_t d = model.spec().latent_dim, d_y = model.spec().d_y;
    const Var prior_mu = model.prior(tape, prefix.systems).mu;
    z0 = concat_cols(slice_cols(prior_mu, 0, d_y), slice_cols(post.mu, d_y, d));
  }
  std::vector<double> grid;
  const bool prepend = times.front() != 0.0;
  if (prepend) grid.push_back(0.0);
  grid.insert(grid.end(), times.begin(), times.end());
  const auto dec = model.decode(tape, z0, grid, solver);

  Extrapolation out;
  out.stats = dec.stats;
  for (std::size_t k = prepend ? 1 : 0; k < dec.points.size(); ++k) out.points.push_back(dec.points[k].value());
  out.mse = std::numeric_limits<double>::quiet_NaN();
  if (truth) out.mse = trajectory_mse(out.points, truth->steps);
  return out;
}

double trajectory_mse(std::span<const Tensor> predicted, std::span<const Tensor> truth) {
  if (predicted.size() != truth.size() || predicted.empty()) {
    throw UsageError("trajectory_mse: prediction and truth lengths differ");
  }
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < predicted.size(); ++k) {
    if (!predicted[k].same_shape(truth[k])) throw ShapeError("trajectory_mse: shape mismatch");
    for (std::size_t i = 0; i < predicted[k].size(); ++i) {
      const double d = predicted[k][i] - truth[k][i];
      acc += d * d;
    }
    n += predicted[k].size();
  }
  return acc / static_cast<double>(n);
}

}  // namespace infocnf
