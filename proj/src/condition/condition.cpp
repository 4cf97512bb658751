#include "infocnf/condition.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "infocnf/errors.hpp"

namespace infocnf {

void LatentPartition::validate() const {
  if (d_y == 0 || d_y > d_total) {
    throw UsageError(fmt::format("latent partition needs 0 < d_y <= d_total (d_y = {}, d_total = {})", d_y, d_total));
  }
}

Linear::Linear(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out)
    : w_(store.add(prefix + ".w", {in, out})), b_(store.add(prefix + ".b", {1, out})), in_(in), out_(out) {}

Var Linear::apply(Tape& tape, const Var& x) const {
  return add_bias(matmul(x, tape.param(w_)), tape.param(b_));
}

ConditionalPrior::ConditionalPrior(ParamStore& store, std::size_t num_classes, std::size_t d_y)
    : map_(store, "cond.prior", num_classes, 2 * d_y) {}

ConditionalPrior::Params ConditionalPrior::params(Tape& tape, const Tensor& one_hot) const {
  const Var out = map_.apply(tape, tape.constant(one_hot));
  const std::size_t dy = d_y();
  return {slice_cols(out, 0, dy), slice_cols(out, dy, 2 * dy)};
}

Classifier::Classifier(ParamStore& store, std::size_t in, std::size_t num_classes, double dropout)
    : map_(store, "cond.classifier", in, num_classes), dropout_(dropout) {
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("classifier dropout must lie in [0, 1)");
}

Var Classifier::logits(Tape& tape, const Var& z_y, bool training, Rng* rng) const {
  if (!training || dropout_ == 0.0) return map_.apply(tape, z_y);
  if (!rng) throw UsageError("training-mode dropout needs a generator");
  const double keep = 1.0 - dropout_;
  Tensor mask = Tensor::zeros(z_y.rows(), z_y.cols());
  for (auto& m : mask.data()) m = rng->uniform() < keep ? 1.0 / keep : 0.0;
  return map_.apply(tape, mul(z_y, tape.constant(std::move(mask))));
}

Tensor one_hot(std::span<const int> labels, std::size_t num_classes) {
  if (labels.empty()) throw UsageError("one_hot: no labels");
  Tensor out = Tensor::zeros(labels.size(), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw UsageError(fmt::format("label {} out of range for {} classes", y, num_classes));
    }
    out.at(i, static_cast<std::size_t>(y)) = 1.0;
  }
  return out;
}

Var diagonal_gaussian_log_density(const Var& z, const Var& mu, const Var& log_sigma) {
  const double d = static_cast<double>(z.cols());
  const Var standardized = div(sub(z, mu), exp(log_sigma));
  const Var quad = scale(sum_rows(square(standardized)), -0.5);
  return add_scalar(sub(quad, sum_rows(log_sigma)), -0.5 * d * std::log(2.0 * std::numbers::pi));
}

Var factored_log_prior(const Var& z_y, std::span<const std::size_t> block_widths, std::span<const Var> mus,
                       std::span<const Var> log_sigmas) {
  if (block_widths.empty() || mus.size() != block_widths.size() || log_sigmas.size() != block_widths.size()) {
    throw UsageError("factored_log_prior: one (mu, log sigma) pair per block is required");
  }
  std::vector<Var> parts;
  std::size_t begin = 0;
  for (std::size_t k = 0; k < block_widths.size(); ++k) {
    const std::size_t end = begin + block_widths[k];
    if (end > z_y.cols()) throw ShapeError("factored_log_prior: blocks exceed the supervised width");
    parts.push_back(diagonal_gaussian_log_density(slice_cols(z_y, begin, end), mus[k], log_sigmas[k]));
    begin = end;
  }
  if (begin != z_y.cols()) throw ShapeError("factored_log_prior: blocks must cover the supervised width");
  const std::vector<double> ones(parts.size(), 1.0);
  return lincomb(parts, ones);
}

Var conditional_log_prior(Tape& tape, const Var& z, std::span<const int> labels, const LatentPartition& partition,
                          const ConditionalPrior& prior) {
  partition.validate();
  if (z.cols() != partition.d_total) {
    throw ShapeError(fmt::format("conditional_log_prior: code {} does not match width {}", shape_string(z.shape()),
                                 partition.d_total));
  }
  if (labels.size() != z.rows()) throw UsageError("conditional_log_prior: one label per row is required");
  const auto p = prior.params(tape, one_hot(labels, prior.num_classes()));
  const Var lp_y = diagonal_gaussian_log_density(slice_cols(z, 0, partition.d_y), p.mu, p.log_sigma);
  if (partition.is_full()) return lp_y;
  return add(lp_y, standard_normal_log_density(slice_cols(z, partition.d_y, partition.d_total)));
}

Var cross_entropy(const Var& logits, const Tensor& targets) {
  if (!logits.value().same_shape(targets)) {
    throw ShapeError(fmt::format("cross_entropy: logits {} vs targets {}", shape_string(logits.shape()),
                                 shape_string(targets.shape())));
  }
  const Var picked = sum_rows(mul(logits, logits.tape()->constant(targets)));
  return sub(logsumexp_rows(logits), picked);
}

std::size_t CnfModel::conditioning_parameter_count() const {
  const std::vector<std::string> prefixes{"cond."};
  return params.count_with_prefix(prefixes);
}

CnfModel build_cnf_skeleton(const CnfSpec& spec) {
  if (spec.dim == 0 || spec.num_layers == 0) throw ConfigError("model needs a positive width and layer count");
  CnfModel m;
  m.spec = spec;
  m.flow = FlowStack(m.params, spec.dim, spec.num_layers, spec.hidden, spec.activation);
  if (spec.num_classes > 0) {
    if (spec.num_classes < 2) throw ConfigError("a conditional model needs at least 2 classes");
    if (m.spec.d_y == 0) m.spec.d_y = std::max<std::size_t>(1, spec.dim / 2);
    m.partition = LatentPartition{spec.dim, m.spec.d_y};
    if (m.spec.d_y > spec.dim) throw ConfigError(fmt::format("d_y = {} exceeds the width {}", m.spec.d_y, spec.dim));
    m.prior = ConditionalPrior(m.params, spec.num_classes, m.spec.d_y);
    m.classifier = Classifier(m.params, m.spec.d_y, spec.num_classes, spec.dropout);
  } else {
    m.spec.d_y = 0;
    m.partition = LatentPartition{spec.dim, 0};
  }
  if (spec.gated) m.gate.emplace(m.params, spec.dim, spec.num_layers, spec.gate);
  return m;
}

CnfModel build_cnf_model(const CnfSpec& spec, Rng& rng) {
  CnfModel m = build_cnf_skeleton(spec);
  Rng flow_rng = rng.split("flow");
  m.flow.init_random(m.params, flow_rng, spec.init_gain);
  if (m.gate) {
    Rng gate_rng = rng.split("gate");
    m.gate->init(m.params, gate_rng);
  }
  return m;
}

namespace {

CnfLoss conditional_loss(Tape& tape, const CnfModel& model, const Tensor& x, std::span<const int> labels,
                         const LossOptions& opts) {
  if (opts.beta < 0.0) throw UsageError("beta must be nonnegative");
  CnfLoss out;
  out.density = forward_density(tape, model.flow, tape.constant(x), opts.flow);
  const Var& z = out.density.z;
  Var log_prior;
  if (model.conditional()) {
    log_prior = conditional_log_prior(tape, z, labels, model.partition, model.prior);
  } else {
    log_prior = standard_normal_log_density(z);
  }
  out.log_px = sub(log_prior, out.density.delta_logp);
  out.nll = scale(mean(out.log_px), -1.0);
  if (model.conditional()) {
    out.logits = model.classifier.logits(tape, slice_cols(z, 0, model.partition.d_y), opts.training, opts.dropout_rng);
    out.xent = mean(cross_entropy(out.logits, one_hot(labels, model.num_classes())));
  } else {
    out.xent = tape.constant(Tensor::scalar(0.0));
  }
  const std::vector<Var> terms{out.nll, out.xent};
  const std::vector<double> coeffs{1.0, opts.beta};
  out.objective = lincomb(terms, coeffs);
  return out;
}

}  // namespace

CnfLoss infocnf_loss(Tape& tape, const CnfModel& model, const Tensor& x, std::span<const int> labels,
                     const LossOptions& opts) {
  return conditional_loss(tape, model, x, labels, opts);
}

CnfLoss ccnf_loss(Tape& tape, const CnfModel& model, const Tensor& x, std::span<const int> labels,
                  const LossOptions& opts) {
  if (!model.conditional() || !model.partition.is_full()) {
    throw UsageError("ccnf_loss needs a conditional model with d_y equal to the full width");
  }
  return conditional_loss(tape, model, x, labels, opts);
}

Var marginal_nll(Tape& tape, const CnfModel& model, const Tensor& x, std::span<const double> class_prior,
                 const FlowOptions& flow) {
  const DensityResult dens = forward_density(tape, model.flow, tape.constant(x), flow);
  if (!model.conditional()) return sub(dens.delta_logp, standard_normal_log_density(dens.z));

  const std::size_t L = model.num_classes();
  std::vector<double> py(class_prior.begin(), class_prior.end());
  if (py.empty()) py.assign(L, 1.0 / static_cast<double>(L));
  if (py.size() != L) throw UsageError("marginal_nll: class prior has the wrong length");
  double total = 0.0;
  for (double p : py) {
    if (!(p > 0.0)) throw UsageError("marginal_nll: class prior entries must be positive");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw UsageError("marginal_nll: class prior must sum to 1");

  std::vector<Var> per_class;
  std::vector<int> labels(x.rows());
  for (std::size_t y = 0; y < L; ++y) {
    std::fill(labels.begin(), labels.end(), static_cast<int>(y));
    const Var lp = conditional_log_prior(tape, dens.z, labels, model.partition, model.prior);
    per_class.push_back(add_scalar(sub(lp, dens.delta_logp), std::log(py[y])));
  }
  return scale(logsumexp_rows(concat_cols(per_class)), -1.0);
}

Tensor conditional_sample(const CnfModel& model, int label, std::size_t n, Rng& rng, const SolverConfig& solver) {
  if (n == 0) throw UsageError("conditional_sample: n must be positive");
  const std::size_t d = model.spec.dim;
  Tensor z = Tensor::zeros(n, d);
  std::size_t dy = 0;
  Tensor mu, sigma;
  if (model.conditional()) {
    Tape tape(&model.params);
    const std::vector<int> one{label};
    const auto p = model.prior.params(tape, one_hot(one, model.num_classes()));
    dy = model.partition.d_y;
    mu = p.mu.value();
    sigma = p.log_sigma.value();
    for (auto& s : sigma.data()) s = std::exp(s);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double eta = rng.normal();
      z.at(i, j) = j < dy ? mu[j] + sigma[j] * eta : eta;
    }
  }
  return sample_flow(model.params, model.flow, z, solver);
}

std::vector<int> argmax_rows(const Tensor& logits) {
  std::vector<int> out(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < logits.cols(); ++j) {
      if (logits.at(i, j) > logits.at(i, best)) best = j;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

}  // namespace infocnf
