#include "infocnf/flow.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

namespace infocnf {

const char* trace_mode_name(TraceMode m) { return m == TraceMode::exact ? "exact" : "hutchinson"; }

TraceMode parse_trace_mode(const std::string& name) {
  if (name == "exact") return TraceMode::exact;
  if (name == "hutchinson") return TraceMode::hutchinson;
  throw ConfigError("unknown trace mode '" + name + "'");
}

FlowStack::FlowStack(ParamStore& store, std::size_t dim, std::size_t num_layers,
                     const std::vector<std::size_t>& hidden, Activation act, const std::string& prefix)
    : dim_(dim) {
  if (dim == 0 || num_layers == 0) throw UsageError("flow stack needs a positive width and layer count");
  for (std::size_t k = 0; k < num_layers; ++k) {
    std::vector<std::size_t> widths{dim + 1};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(dim);
    layers_.push_back(FlowLayer{Mlp(store, fmt::format("{}.{}", prefix, k), std::move(widths), act), k});
  }
}

void FlowStack::init_random(ParamStore& store, Rng& rng, double gain) const {
  for (const auto& layer : layers_) layer.dynamics.init_random(store, rng, gain);
}

std::size_t FlowStack::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.dynamics.parameter_count();
  return n;
}

namespace {

std::vector<Var> basis_tangents(Tape& tape, std::size_t rows, std::size_t dim) {
  std::vector<Var> out;
  out.reserve(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    Tensor e = Tensor::zeros(rows, dim + 1);
    for (std::size_t r = 0; r < rows; ++r) e.at(r, j) = 1.0;
    out.push_back(tape.constant(std::move(e)));
  }
  return out;
}

void check_exact_dim(std::size_t d) {
  if (d > kMaxExactTraceDim) {
    throw UsageError(fmt::format("exact trace is limited to d <= {} (got d = {}); use hutchinson trace mode",
                                 kMaxExactTraceDim, d));
  }
}

// Negated trace from the exact-mode tangents: -(sum_j [J e_j]_j).
Var neg_trace_from_basis(const std::vector<Var>& tangents) {
  std::vector<Var> diag;
  diag.reserve(tangents.size());
  for (std::size_t j = 0; j < tangents.size(); ++j) diag.push_back(slice_cols(tangents[j], j, j + 1));
  const std::vector<double> coeffs(diag.size(), -1.0);
  return lincomb(diag, coeffs);
}

}  // namespace

Var trace_exact(Tape& tape, const Mlp& f, const Var& z, double t) {
  const std::size_t d = z.cols();
  check_exact_dim(d);
  const auto tangents = basis_tangents(tape, z.rows(), d);
  const auto res = f.forward_with_tangents(tape, with_time_column(tape, z, t), tangents);
  return scale(neg_trace_from_basis(res.tangents), -1.0);
}

Var trace_hutchinson(Tape& tape, const Mlp& f, const Var& z, double t, const Var& eps) {
  const Var jv = jvp(tape, f, z, t, eps);
  return sum_rows(mul(eps, jv));
}

Tensor rademacher_probe(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor eps = Tensor::zeros(rows, cols);
  for (auto& v : eps.data()) v = rng.rademacher();
  return eps;
}

LayerResult forward_layer(Tape& tape, const FlowLayer& layer, const Var& z_in, const SolverConfig& solver,
                          TraceMode trace, Rng* probe_rng) {
  const std::size_t d = z_in.cols();
  const std::size_t rows = z_in.rows();
  const Mlp& net = layer.dynamics;

  std::vector<Var> tangents;
  Var eps;
  if (trace == TraceMode::exact) {
    check_exact_dim(d);
    tangents = basis_tangents(tape, rows, d);
  } else {
    if (!probe_rng) throw UsageError("hutchinson trace mode needs a probe generator");
    // One probe per solve, held fixed across solver steps.
    eps = tape.constant(rademacher_probe(rows, d, *probe_rng));
    tangents.push_back(concat_cols(eps, tape.constant(Tensor::zeros(rows, 1))));
  }

  const Dynamics augmented = [&](const Var& s, double t) {
    const Var z = slice_cols(s, 0, d);
    const auto res = net.forward_with_tangents(tape, with_time_column(tape, z, t), tangents);
    Var neg_trace;
    if (trace == TraceMode::exact) {
      neg_trace = neg_trace_from_basis(res.tangents);
    } else {
      neg_trace = scale(sum_rows(mul(eps, res.tangents[0])), -1.0);
    }
    return concat_cols(res.out, neg_trace);
  };

  const Var s0 = concat_cols(z_in, tape.constant(Tensor::zeros(rows, 1)));
  SolveResult sol;
  try {
    sol = integrate(augmented, s0, 0.0, 1.0, solver);
  } catch (const DivergenceError& e) {
    throw DivergenceError(fmt::format("flow layer {}: {}", layer.index, e.what()), e.stats(),
                          static_cast<int>(layer.index));
  }
  return LayerResult{slice_cols(sol.y, 0, d), slice_cols(sol.y, d, d + 1), sol.stats};
}

DensityResult forward_density(Tape& tape, const FlowStack& stack, const Var& x, const FlowOptions& opts) {
  if (x.cols() != stack.dim()) {
    throw ShapeError(fmt::format("forward_density: input {} does not match flow width {}", shape_string(x.shape()),
                                 stack.dim()));
  }
  DensityResult res;
  Var z = x;
  std::vector<Var> deltas;
  for (const auto& layer : stack.layers()) {
    const SolverConfig cfg = opts.choose_solver ? opts.choose_solver(layer.index, z.value()) : opts.solver;
    LayerResult lr = forward_layer(tape, layer, z, cfg, opts.trace, opts.probe_rng);
    z = lr.z;
    deltas.push_back(lr.delta_logp);
    res.stats.push_back(lr.stats);
    res.layer_tolerances.push_back(cfg.rtol);
  }
  res.z = z;
  const std::vector<double> ones(deltas.size(), 1.0);
  res.delta_logp = lincomb(deltas, ones);
  return res;
}

Var standard_normal_log_density(const Var& z) {
  const double d = static_cast<double>(z.cols());
  const double log_norm = -0.5 * d * std::log(2.0 * std::numbers::pi);
  return add_scalar(scale(sum_rows(square(z)), -0.5), log_norm);
}

Tensor sample_flow(const ParamStore& store, const FlowStack& stack, const Tensor& z, const SolverConfig& solver,
                   SolveStats* stats) {
  if (z.cols() != stack.dim()) {
    throw ShapeError(fmt::format("sample_flow: latent {} does not match flow width {}", shape_string(z.shape()),
                                 stack.dim()));
  }
  Tensor x = z;
  for (std::size_t k = stack.size(); k-- > 0;) {
    const FlowLayer& layer = stack.layer(k);
    Tape tape(&store);
    // s = 1 - t runs the layer backwards in time: dz/ds = -f(z, 1 - s).
    const Dynamics reversed = [&](const Var& y, double s) {
      return scale(layer.dynamics.forward(tape, with_time_column(tape, y, 1.0 - s)), -1.0);
    };
    SolveResult sol;
    try {
      sol = integrate(reversed, tape.constant(x), 0.0, 1.0, solver);
    } catch (const DivergenceError& e) {
      throw DivergenceError(fmt::format("flow layer {} (sampling): {}", k, e.what()), e.stats(), static_cast<int>(k));
    }
    if (stats) *stats += sol.stats;
    x = sol.y.value();
  }
  return x;
}

}  // namespace infocnf
