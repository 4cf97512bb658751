#include "infocnf/oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <regex>

#include <unistd.h>

#include <fmt/format.h>

#include "infocnf/checkpoint.hpp"
#include "infocnf/trainer.hpp"

namespace infocnf {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

OracleReport report(std::string bound, double measured, double expected, double tolerance, bool pass,
                    std::string detail = {}) {
  OracleReport r;
  r.bound = std::move(bound);
  r.measured = measured;
  r.expected = expected;
  r.tolerance = tolerance;
  r.pass = pass;
  r.detail = std::move(detail);
  return r;
}

// |a - b| / max(|a|, |b|, floor)
double rel_err(double a, double b, double floor = 1e-300) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  double var = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
  MeanSe m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  for (double x : v) m.var += (x - m.mean) * (x - m.mean);
  m.var /= static_cast<double>(v.size() - 1);
  m.se = std::sqrt(m.var / static_cast<double>(v.size()));
  return m;
}

Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng, double sd = 1.0) {
  Tensor t = Tensor::zeros(r, c);
  for (auto& v : t.vec()) v = rng.normal(0.0, sd);
  return t;
}

// Central differences of `loss` w.r.t. params[i] for each index; largest relative error against `grads`.
struct FdResult {
  double max_rel = 0.0;
  double worst_grad = 0.0, worst_fd = 0.0;
};

FdResult fd_compare(std::vector<double>& params, std::span<const double> grads, std::span<const std::size_t> idx,
                    double h, const std::function<double()>& loss) {
  FdResult out;
  for (std::size_t i : idx) {
    const double keep = params[i];
    params[i] = keep + h;
    const double up = loss();
    params[i] = keep - h;
    const double down = loss();
    params[i] = keep;
    const double fd = (up - down) / (2.0 * h);
    const double e = rel_err(grads[i], fd, 1e-12);
    if (e > out.max_rel) {
      out.max_rel = e;
      out.worst_grad = grads[i];
      out.worst_fd = fd;
    }
  }
  return out;
}

std::vector<std::size_t> pick_indices(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  for (std::size_t i = 0; i < std::min(k, n); ++i) std::swap(all[i], all[i + rng.below(n - i)]);
  all.resize(std::min(k, n));
  return all;
}

// ---------------------------------------------------------------------------
// Trained-model fixtures, memoized so several oracles share one training run.

struct TimedCnf {
  CnfRun run;
  double seconds = 0.0;
};

struct TimedLatent {
  LatentRun run;
  double seconds = 0.0;
};

const TimedCnf& cnf_fixture(Task task, ToleranceMode mode, std::uint64_t seed) {
  static std::map<std::tuple<int, int, std::uint64_t>, TimedCnf> cache;
  const auto key = std::make_tuple(static_cast<int>(task), static_cast<int>(mode), seed);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  TrainConfig cfg = default_config(task);
  cfg.seed = seed;
  cfg.tolerance_mode = mode;
  const auto t0 = Clock::now();
  TimedCnf t{train_cnf(cfg), 0.0};
  t.seconds = seconds_since(t0);
  return cache.emplace(key, std::move(t)).first->second;
}

const TimedLatent& latent_fixture(bool partitioned, std::uint64_t seed) {
  static std::map<std::pair<bool, std::uint64_t>, TimedLatent> cache;
  const auto key = std::make_pair(partitioned, seed);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  TrainConfig cfg = default_config(Task::latentode);
  cfg.seed = seed;
  cfg.model.latent.partitioned = partitioned;
  const auto t0 = Clock::now();
  TimedLatent t{train_latentode(cfg), 0.0};
  t.seconds = seconds_since(t0);
  return cache.emplace(key, std::move(t)).first->second;
}

double epoch_mean_nfe(const CnfRun& run) {
  double s = 0.0;
  for (const auto& m : run.metrics) s += m.mean_nfe;
  return s / static_cast<double>(run.metrics.size());
}

// ---------------------------------------------------------------------------
// diffcore

OracleReport primitive_gradients() {
  Rng rng(101);
  double worst = 0.0;
  std::string worst_name;
  using Unary = std::function<Var(const Var&)>;
  const std::vector<std::pair<std::string, Unary>> unary = {
      {"softplus", [](const Var& a) { return softplus(a); }},
      {"sigmoid", [](const Var& a) { return sigmoid(a); }},
      {"tanh", [](const Var& a) { return infocnf::tanh(a); }},
      {"exp", [](const Var& a) { return infocnf::exp(a); }},
      {"log", [](const Var& a) { return infocnf::log(square(a)); }},
      {"square", [](const Var& a) { return square(a); }},
      {"sqrt", [](const Var& a) { return infocnf::sqrt(add_scalar(square(a), 1.0)); }},
      {"sum_rows", [](const Var& a) { return sum_rows(a); }},
      {"sum_cols", [](const Var& a) { return sum_cols(a); }},
      {"mean", [](const Var& a) { return mean(a); }},
      {"logsumexp", [](const Var& a) { return logsumexp(a); }},
      {"logsumexp_rows", [](const Var& a) { return logsumexp_rows(a); }},
      {"slice_cols", [](const Var& a) { return slice_cols(a, 1, 3); }},
      {"scale", [](const Var& a) { return scale(a, -1.7); }},
  };
  const Tensor other = random_tensor(3, 4, rng);
  const Tensor right = random_tensor(4, 2, rng);
  const Tensor bias = random_tensor(1, 4, rng);
  const std::vector<std::pair<std::string, Unary>> binary = {
      {"matmul", [&](const Var& a) { return matmul(a, a.tape()->constant(right)); }},
      {"add", [&](const Var& a) { return add(a, a.tape()->constant(other)); }},
      {"sub", [&](const Var& a) { return sub(a.tape()->constant(other), a); }},
      {"mul", [&](const Var& a) { return mul(a, a); }},
      {"div", [&](const Var& a) { return div(a.tape()->constant(other), add_scalar(square(a), 0.5)); }},
      {"add_bias", [&](const Var& a) { return add_bias(a, a.tape()->constant(bias)); }},
      {"concat_cols", [&](const Var& a) { return concat_cols(a, square(a)); }},
      {"lincomb",
       [&](const Var& a) {
         const std::vector<Var> terms{a, square(a)};
         const std::vector<double> c{0.3, -1.1};
         return lincomb(terms, c);
       }},
  };
  std::vector<std::pair<std::string, Unary>> all = unary;
  all.insert(all.end(), binary.begin(), binary.end());
  for (const auto& [name, fn] : all) {
    const Tensor x0 = random_tensor(3, 4, rng);
    Tensor weights;
    {
      Tape probe;
      weights = random_tensor(fn(probe.constant(x0)).rows(), fn(probe.constant(x0)).cols(), rng);
    }
    auto value = [&](const Tensor& x) {
      Tape t;
      const Var y = fn(t.constant(x));
      double s = 0.0;
      for (std::size_t i = 0; i < y.value().size(); ++i) s += weights[i] * y.value()[i];
      return s;
    };
    Tape tape;
    const Var x = tape.variable(x0);
    const Var y = fn(x);
    tape.backward(sum(mul(y, tape.constant(weights))));
    const Tensor g = tape.grad(x);
    for (std::size_t i = 0; i < x0.size(); ++i) {
      Tensor up = x0, down = x0;
      up[i] += 1e-6;
      down[i] -= 1e-6;
      const double fd = (value(up) - value(down)) / 2e-6;
      const double e = std::abs(g[i] - fd) / std::max(1.0, std::abs(fd));
      if (e > worst) {
        worst = e;
        worst_name = name;
      }
    }
  }
  return report("max |grad - fd| / max(1, |fd|) <= 1e-6", worst, 0.0, 1e-6, worst <= 1e-6,
                fmt::format("{} primitives; worst {}", all.size(), worst_name));
}

OracleReport mlp_gradient() {
  Rng rng(102);
  ParamStore store;
  Mlp net(store, "net", {3, 8, 8, 2}, Activation::softplus);
  net.init_random(store, rng);
  const Tensor x = random_tensor(5, 3, rng);
  const Tensor w = random_tensor(5, 2, rng);
  auto loss = [&]() {
    Tape t(&store);
    return sum(mul(net.forward(t, t.constant(x)), t.constant(w))).value().item();
  };
  Tape tape(&store);
  const auto grads = tape.backward(sum(mul(net.forward(tape, tape.constant(x)), tape.constant(w))));
  std::vector<std::size_t> idx(store.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const FdResult r = fd_compare(store.flat(), grads, idx, 1e-6, loss);
  return report("max relative error <= 1e-6", r.max_rel, 0.0, 1e-6, r.max_rel <= 1e-6,
                fmt::format("{} parameters", store.size()));
}

OracleReport jvp_vjp_duality() {
  Rng rng(103);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    ParamStore store;
    Mlp net(store, "f", {4, 16, 3}, Activation::tanh);
    net.init_random(store, rng);
    const Tensor z = random_tensor(2, 3, rng), v = random_tensor(2, 3, rng), u = random_tensor(2, 3, rng);
    const double t = rng.uniform();
    Tape tape(&store);
    const Tensor jv = jvp(tape, net, tape.constant(z), t, tape.constant(v)).value();
    const Tensor uj = vjp(store, net, z, t, u);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      lhs += u[i] * jv[i];
      rhs += uj[i] * v[i];
    }
    worst = std::max(worst, rel_err(lhs, rhs, 1e-12));
  }
  return report("max relative |u.(Jv) - (u^T J).v| <= 1e-10", worst, 0.0, 1e-10, worst <= 1e-10);
}

OracleReport philox_known_answers() {
  struct Kat {
    std::array<std::uint32_t, 4> ctr;
    std::array<std::uint32_t, 2> key;
    std::array<std::uint32_t, 4> out;
  };
  const Kat kats[] = {
      {{0, 0, 0, 0}, {0, 0}, {0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}},
      {{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
       {0xffffffff, 0xffffffff},
       {0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}},
      {{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
       {0xa4093822, 0x299f31d0},
       {0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}},
  };
  int bad = 0;
  for (const auto& k : kats) bad += philox4x32_10(k.ctr, k.key) != k.out;
  return report("mismatching vectors == 0", bad, 0.0, 0.0, bad == 0);
}

// ---------------------------------------------------------------------------
// odesolve

Dynamics linear_dynamics(double a) {
  return [a](const Var& y, double) { return scale(y, a); };
}

double endpoint_error(const SolverConfig& cfg) {
  Tape tape;
  const auto r = integrate(linear_dynamics(1.0), tape.constant(Tensor::scalar(1.0)), 0.0, 1.0, cfg);
  return std::abs(r.y.value().item() - std::numbers::e);
}

struct OrderRatios {
  double rk4 = 0.0;
  double dopri5 = 0.0;
};

OrderRatios order_ratios() {
  OrderRatios o;
  o.rk4 = endpoint_error(SolverConfig::rk4(8)) / endpoint_error(SolverConfig::rk4(16));
  SolverConfig d4;
  d4.fixed_step_count = 4;
  SolverConfig d8 = d4;
  d8.fixed_step_count = 8;
  o.dopri5 = endpoint_error(d4) / endpoint_error(d8);
  return o;
}

OracleReport solver_exponential() {
  const double e = endpoint_error(SolverConfig::with_tolerance(1e-10)) / std::numbers::e;
  return report("relative error of y(1) for y' = y <= 1e-8", e, 0.0, 1e-8, e <= 1e-8);
}

OracleReport solver_harmonic() {
  // y = (x, v), x'' = -x from (1, 0); exact (cos t, -sin t) at each output time.
  const Dynamics f = [](const Var& y, double) {
    const Var x = slice_cols(y, 0, 1), v = slice_cols(y, 1, 2);
    return concat_cols(v, scale(x, -1.0));
  };
  std::vector<double> times;
  for (int i = 0; i <= 20; ++i) times.push_back(0.5 * i);
  Tape tape;
  const auto r = integrate_grid(f, tape.constant(Tensor::row(std::vector<double>{1.0, 0.0})), times,
                                SolverConfig::with_tolerance(1e-10));
  double worst = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    worst = std::max(worst, std::abs(r.ys[k].value()[0] - std::cos(times[k])));
    worst = std::max(worst, std::abs(r.ys[k].value()[1] + std::sin(times[k])));
  }
  return report("max abs error over t in [0, 10] <= 1e-8", worst, 0.0, 1e-8, worst <= 1e-8);
}

OracleReport solver_order_rk4() {
  const double r = order_ratios().rk4;
  return report("error ratio for halved step in [12, 20]", r, 16.0, 4.0, r >= 12.0 && r <= 20.0);
}

OracleReport solver_order_dopri5() {
  const double r = order_ratios().dopri5;
  return report("error ratio for halved step in [24, 40]", r, 32.0, 8.0, r >= 24.0 && r <= 40.0);
}

OracleReport solver_nfe_accounting() {
  long bad = 0;
  long total = 0;
  for (double tol : {1e-3, 1e-6, 1e-9}) {
    for (double a : {-2.0, 0.5, 3.0}) {
      long calls = 0;
      const Dynamics f = [&](const Var& y, double) {
        ++calls;
        return scale(y, a);
      };
      Tape tape;
      const auto r = integrate(f, tape.constant(Tensor::scalar(1.0)), 0.0, 1.0, SolverConfig::with_tolerance(tol));
      bad += std::abs(calls - r.stats.nfe);
      total += calls;
    }
  }
  return report("sum |counted calls - reported NFE| == 0", static_cast<double>(bad), 0.0, 0.0, bad == 0,
                fmt::format("{} evaluations counted", total));
}

OracleReport solver_nfe_monotone() {
  long prev = 0;
  int violations = 0;
  std::string series;
  for (double tol : {1e-2, 1e-4, 1e-6, 1e-8, 1e-10}) {
    Tape tape;
    const auto r = integrate(linear_dynamics(2.0), tape.constant(Tensor::scalar(1.0)), 0.0, 2.0,
                             SolverConfig::with_tolerance(tol));
    violations += r.stats.nfe < prev;
    prev = r.stats.nfe;
    series += fmt::format("{} ", r.stats.nfe);
  }
  return report("NFE never decreases as tolerance tightens", violations, 0.0, 0.0, violations == 0,
                "NFE: " + series);
}

OracleReport solver_sensitivity() {
  double worst = 0.0;
  for (double a : {-1.5, 0.7, 2.0}) {
    Tape tape;
    const Var y0 = tape.variable(Tensor::scalar(1.0));
    const auto r = integrate(linear_dynamics(a), y0, 0.0, 1.0, SolverConfig::with_tolerance(1e-10));
    tape.backward(r.y);
    worst = std::max(worst, rel_err(tape.grad(y0).item(), std::exp(a)));
  }
  return report("relative error of dy(1)/dy0 against e^a <= 1e-8", worst, 0.0, 1e-8, worst <= 1e-8);
}

OracleReport solver_error_norm() {
  Rng rng(104);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> err(5), y0(5), y1(5);
    for (std::size_t i = 0; i < 5; ++i) {
      err[i] = rng.normal(0, 1e-4);
      y0[i] = rng.normal();
      y1[i] = rng.normal();
    }
    const double atol = 1e-6, rtol = 1e-5;
    double acc = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
      const double s = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
      acc += (err[i] / s) * (err[i] / s);
    }
    worst = std::max(worst, rel_err(error_norm(err, y0, y1, atol, rtol), std::sqrt(acc / 5.0)));
  }
  return report("relative error against the RMS formula <= 1e-14", worst, 0.0, 1e-14, worst <= 1e-14);
}

// ---------------------------------------------------------------------------
// flow

OracleReport flow_trace_fd() {
  Rng rng(105);
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    ParamStore store;
    Mlp net(store, "f", {4, 16, 16, 3}, Activation::softplus);
    net.init_random(store, rng);
    const Tensor z = random_tensor(4, 3, rng);
    const double t = rng.uniform();
    Tape tape(&store);
    const Tensor tr = trace_exact(tape, net, tape.constant(z), t).value();
    auto f = [&](const Tensor& zz) {
      Tape tt(&store);
      return net.forward(tt, with_time_column(tt, tt.constant(zz), t)).value();
    };
    for (std::size_t b = 0; b < z.rows(); ++b) {
      double fd = 0.0;
      for (std::size_t j = 0; j < 3; ++j) {
        Tensor up = z, down = z;
        up.at(b, j) += 1e-6;
        down.at(b, j) -= 1e-6;
        fd += (f(up).at(b, j) - f(down).at(b, j)) / 2e-6;
      }
      worst = std::max(worst, std::abs(fd - tr[b]) / std::max(1.0, std::abs(fd)));
    }
  }
  return report("max |trace - fd trace| / max(1, |fd|) <= 1e-6", worst, 0.0, 1e-6, worst <= 1e-6);
}

struct HutchinsonOutcome {
  double worst_z = 0.0;  // largest |mean - exact| / se over networks
  int failures = 0;
  double diag_worst = 0.0;  // largest per-sample deviation in the diagonal case
};

HutchinsonOutcome hutchinson_check() {
  constexpr std::size_t kProbes = 10000, kDim = 4;
  Rng rng(106);
  HutchinsonOutcome out;
  for (int n = 0; n < 10; ++n) {
    ParamStore store;
    Mlp net(store, "f", {kDim + 1, 32, 32, kDim}, Activation::softplus);
    net.init_random(store, rng);
    const Tensor z = random_tensor(1, kDim, rng);
    const double t = rng.uniform();
    Tape tape(&store);
    const double exact = trace_exact(tape, net, tape.constant(z), t).value().item();
    Tensor zs = Tensor::zeros(kProbes, kDim);
    for (std::size_t i = 0; i < kProbes; ++i) {
      for (std::size_t j = 0; j < kDim; ++j) zs.at(i, j) = z[j];
    }
    const Tensor eps = rademacher_probe(kProbes, kDim, rng);
    const Tensor est = trace_hutchinson(tape, net, tape.constant(zs), t, tape.constant(eps)).value();
    const MeanSe m = mean_se(est.vec());
    const double zscore = std::abs(m.mean - exact) / m.se;
    out.worst_z = std::max(out.worst_z, zscore);
    out.failures += zscore > 3.0;
  }
  // f(z, t) = z diag(c): every probe recovers sum(c) exactly.
  ParamStore store;
  Mlp lin(store, "d", {kDim + 1, kDim}, Activation::identity);
  Tensor w = Tensor::zeros(kDim + 1, kDim);
  double tr = 0.0;
  for (std::size_t j = 0; j < kDim; ++j) {
    w.at(j, j) = 0.5 + static_cast<double>(j);
    tr += w.at(j, j);
  }
  store.set(lin.weight(0), w);
  Tape tape(&store);
  const Tensor zs = random_tensor(kProbes, kDim, rng);
  const Tensor eps = rademacher_probe(kProbes, kDim, rng);
  const Tensor est = trace_hutchinson(tape, lin, tape.constant(zs), 0.3, tape.constant(eps)).value();
  for (double v : est.vec()) out.diag_worst = std::max(out.diag_worst, std::abs(v - tr));
  return out;
}

OracleReport flow_hutchinson() {
  const HutchinsonOutcome h = hutchinson_check();
  const bool pass = h.failures == 0 && h.diag_worst <= 1e-12;
  return report("all 10 networks within 3 SE; diagonal case exact per sample", h.worst_z, 0.0, 3.0, pass,
                fmt::format("networks outside 3 SE: {}; diagonal max deviation {:.3g}", h.failures, h.diag_worst));
}

OracleReport flow_invertibility() {
  Rng rng(107);
  CnfSpec spec;
  spec.dim = 2;
  spec.num_layers = 2;
  spec.hidden = {16, 16};
  CnfModel model = build_cnf_model(spec, rng);
  const Tensor x = random_tensor(100, 2, rng);
  const SolverConfig solver = SolverConfig::with_tolerance(1e-9);
  Tape tape(&model.params);
  FlowOptions fo;
  fo.solver = solver;
  const Tensor z = forward_density(tape, model.flow, tape.constant(x), fo).z.value();
  const Tensor back = sample_flow(model.params, model.flow, z, solver);
  const double err = max_abs_diff(back, x);
  return report("max |flow^-1(flow(x)) - x| <= 1e-6 on 100 points", err, 0.0, 1e-6, err <= 1e-6);
}

OracleReport flow_linear_density() {
  // f(z) = z A with constant A: z(1) = x expm(A), delta = -tr(A) per layer.
  ParamStore dummy;
  FlowStack stack(dummy, 2, 1, {}, Activation::identity);
  Tensor w = Tensor::zeros(3, 2);
  w.at(0, 0) = 0.3;
  w.at(0, 1) = -0.4;
  w.at(1, 0) = 0.2;
  w.at(1, 1) = -0.1;
  dummy.set(stack.layer(0).dynamics.weight(0), w);
  // expm of [[0.3, -0.4], [0.2, -0.1]] via eigen-free series.
  std::array<double, 4> term{1, 0, 0, 1}, sum = term;
  const std::array<double, 4> A{0.3, -0.4, 0.2, -0.1};
  for (int k = 1; k < 40; ++k) {
    const std::array<double, 4> next{(term[0] * A[0] + term[1] * A[2]) / k, (term[0] * A[1] + term[1] * A[3]) / k,
                                     (term[2] * A[0] + term[3] * A[2]) / k, (term[2] * A[1] + term[3] * A[3]) / k};
    term = next;
    for (int i = 0; i < 4; ++i) sum[i] += term[i];
  }
  Rng rng(108);
  const Tensor x = random_tensor(20, 2, rng);
  Tape tape(&dummy);
  FlowOptions fo;
  fo.solver = SolverConfig::with_tolerance(1e-10);
  const DensityResult d = forward_density(tape, stack, tape.constant(x), fo);
  const Tensor lp = sub(standard_normal_log_density(d.z), d.delta_logp).value();
  double worst = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double z0 = x.at(i, 0) * sum[0] + x.at(i, 1) * sum[2];
    const double z1 = x.at(i, 0) * sum[1] + x.at(i, 1) * sum[3];
    const double expected = -std::log(2.0 * std::numbers::pi) - 0.5 * (z0 * z0 + z1 * z1) + (0.3 - 0.1);
    worst = std::max(worst, std::abs(lp[i] - expected));
  }
  return report("max |log p(x) - closed form| <= 1e-7", worst, 0.0, 1e-7, worst <= 1e-7);
}

OracleReport flow_gradient_fd() {
  Rng rng(109);
  CnfSpec spec;
  spec.dim = 1;
  spec.num_layers = 1;
  spec.hidden = {16, 16};
  CnfModel model = build_cnf_model(spec, rng);
  const Tensor x = random_tensor(16, 1, rng, 1.5);
  LossOptions lo;
  lo.flow.solver = SolverConfig::with_tolerance(1e-10);
  auto loss = [&]() {
    Tape t(&model.params);
    return infocnf_loss(t, model, x, {}, lo).objective.value().item();
  };
  Tape tape(&model.params);
  const auto grads = tape.backward(infocnf_loss(tape, model, x, {}, lo).objective);
  const auto idx = pick_indices(model.params.size(), 20, rng);
  const FdResult r = fd_compare(model.params.flat(), grads, idx, 1e-4, loss);
  return report("max relative error on 20 parameters <= 1e-4", r.max_rel, 0.0, 1e-4, r.max_rel <= 1e-4,
                fmt::format("worst grad {:.6g} vs fd {:.6g}", r.worst_grad, r.worst_fd));
}

OracleReport flow_hutchinson_training() {
  TrainConfig cfg = default_config(Task::density);
  cfg.epochs = 5;
  cfg.data.n_train = 500;
  cfg.data.n_test = 500;
  const CnfRun exact = train_cnf(cfg);
  cfg.trace = TraceMode::hutchinson;
  const CnfRun hutch = train_cnf(cfg);
  const double diff = std::abs(exact.metrics.back().test_nll - hutch.metrics.back().test_nll);
  return report("|final NLL exact - final NLL hutchinson| <= 0.05 (1D)", diff, 0.0, 0.05, diff <= 0.05);
}

// ---------------------------------------------------------------------------
// condition

CnfModel random_conditional_model(std::size_t dim, std::size_t classes, std::size_t d_y, std::size_t layers,
                                  Rng& rng) {
  CnfSpec spec;
  spec.dim = dim;
  spec.num_layers = layers;
  spec.hidden = {16, 16};
  spec.num_classes = classes;
  spec.d_y = d_y;
  CnfModel model = build_cnf_model(spec, rng);
  for (const auto& e : model.params.entries()) {
    if (e.name.rfind("cond.", 0) != 0) continue;
    for (std::size_t i = 0; i < e.size; ++i) model.params.flat()[e.offset + i] = rng.normal(0.0, 0.3);
  }
  return model;
}

OracleReport condition_log_prior() {
  Rng rng(110);
  CnfModel model = random_conditional_model(3, 3, 2, 1, rng);
  const Tensor z = random_tensor(6, 3, rng);
  const std::vector<int> labels{0, 1, 2, 2, 1, 0};
  Tape tape(&model.params);
  const Tensor lp = conditional_log_prior(tape, tape.constant(z), labels, model.partition, model.prior).value();
  const Tensor W = model.params.tensor(model.prior.map().weight());
  const Tensor b = model.params.tensor(model.prior.map().bias());
  double worst = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    double expected = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      double mu = 0.0, ls = 0.0;
      if (j < 2) {
        mu = W.at(static_cast<std::size_t>(labels[i]), j) + b[j];
        ls = W.at(static_cast<std::size_t>(labels[i]), 2 + j) + b[2 + j];
      }
      const double u = (z.at(i, j) - mu) / std::exp(ls);
      expected += -0.5 * std::log(2.0 * std::numbers::pi) - ls - 0.5 * u * u;
    }
    worst = std::max(worst, std::abs(lp[i] - expected));
  }
  return report("max |log prior - hand formula| <= 1e-12", worst, 0.0, 1e-12, worst <= 1e-12);
}

OracleReport condition_zero_init() {
  Rng rng(111);
  CnfSpec spec;
  spec.dim = 2;
  spec.num_layers = 1;
  spec.num_classes = 4;
  spec.d_y = 1;
  CnfModel model = build_cnf_model(spec, rng);
  const Tensor z = random_tensor(8, 2, rng);
  // Identical across labels bit for bit; against N(0, I) only up to summation order.
  double across = 0.0, vs_normal = 0.0;
  Tensor first;
  for (int y = 0; y < 4; ++y) {
    const std::vector<int> labels(8, y);
    Tape tape(&model.params);
    const Var zc = tape.constant(z);
    const Tensor a = conditional_log_prior(tape, zc, labels, model.partition, model.prior).value();
    const Tensor b = standard_normal_log_density(zc).value();
    if (y == 0) first = a;
    across = std::max(across, max_abs_diff(a, first));
    vs_normal = std::max(vs_normal, max_abs_diff(a, b));
  }
  return report("fresh model: log prior identical for every label and within 1e-12 of N(0, I)", across, 0.0, 0.0,
                across == 0.0 && vs_normal <= 1e-12, fmt::format("max deviation from N(0, I) {:.3g}", vs_normal));
}

OracleReport condition_loss_decomposition() {
  Rng rng(112);
  CnfModel model = random_conditional_model(2, 4, 1, 1, rng);
  const Dataset data = gen_2d_labeled(Labeled2dSpec{{{-2, -2}, {2, -2}, {-2, 2}, {2, 2}},
                                                    {{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}},
                                                    4},
                                      5);
  double worst = 0.0;
  for (double beta : {0.0, 0.5, 1.0, 3.0}) {
    Tape tape(&model.params);
    LossOptions lo;
    lo.beta = beta;
    lo.flow.solver = SolverConfig::with_tolerance(1e-6);
    const CnfLoss l = infocnf_loss(tape, model, data.x, data.labels, lo);
    worst = std::max(worst, std::abs(l.objective.value().item() -
                                     (l.nll.value().item() + beta * l.xent.value().item())));
  }
  return report("|J - (nll + beta * xent)| <= 1e-12", worst, 0.0, 1e-12, worst <= 1e-12);
}

OracleReport condition_marginal_bound() {
  Rng rng(113);
  CnfModel model = random_conditional_model(2, 4, 1, 1, rng);
  const Tensor x = random_tensor(32, 2, rng, 2.0);
  FlowOptions fo;
  fo.solver = SolverConfig::with_tolerance(1e-7);
  Tape tape(&model.params);
  const Tensor marg = marginal_nll(tape, model, x, {}, fo).value();
  const DensityResult d = forward_density(tape, model.flow, tape.constant(x), fo);
  int violations = 0;
  double worst_gap = INFINITY;
  for (int y = 0; y < 4; ++y) {
    const std::vector<int> labels(32, y);
    const Tensor lp =
        sub(conditional_log_prior(tape, d.z, labels, model.partition, model.prior), d.delta_logp).value();
    for (std::size_t i = 0; i < 32; ++i) {
      const double bound = -lp[i] + std::log(4.0);
      violations += marg[i] > bound + 1e-12;
      worst_gap = std::min(worst_gap, bound - marg[i]);
    }
  }
  return report("marginal NLL <= -log p(x | y) + log L for every row and label", violations, 0.0, 0.0,
                violations == 0, fmt::format("smallest slack {:.3g}", worst_gap));
}

OracleReport condition_sample_ks() {
  CnfSpec spec;
  spec.dim = 2;
  spec.num_layers = 1;
  spec.num_classes = 2;
  spec.d_y = 1;
  CnfModel model = build_cnf_skeleton(spec);  // zero dynamics: identity flow
  Tensor W = Tensor::zeros(2, 2);
  W.at(1, 0) = 1.0;   // class 1: mu = 1
  W.at(1, 1) = 0.3;   // class 1: log sigma = 0.3
  model.params.set(model.prior.map().weight(), W);
  Rng rng(114);
  constexpr std::size_t n = 10000;
  const Tensor s = conditional_sample(model, 1, n, rng, SolverConfig::with_tolerance(1e-6));
  double worst = 0.0;
  for (std::size_t j = 0; j < 2; ++j) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = s.at(i, j);
    std::sort(v.begin(), v.end());
    const double mu = j == 0 ? 1.0 : 0.0, sd = j == 0 ? std::exp(0.3) : 1.0;
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = normal_cdf((v[i] - mu) / sd);
      d = std::max({d, std::abs(c - static_cast<double>(i) / n), std::abs(c - static_cast<double>(i + 1) / n)});
    }
    worst = std::max(worst, d);
  }
  const double crit = 1.628 / std::sqrt(static_cast<double>(n));  // alpha = 0.01
  return report("KS statistic below the 1% critical value", worst, 0.0, crit, worst <= crit);
}

OracleReport condition_classifier_roundtrip() {
  const CnfRun& run = cnf_fixture(Task::infocnf, ToleranceMode::fixed, 0).run;
  const CnfModel& model = run.model;
  Rng rng(115);
  const SolverConfig solver = SolverConfig::with_tolerance(1e-6);
  long agree = 0, total = 0;
  for (std::size_t y = 0; y < model.num_classes(); ++y) {
    const Tensor x = conditional_sample(model, static_cast<int>(y), 250, rng, solver);
    Tape tape(&model.params);
    FlowOptions fo;
    fo.solver = solver;
    const DensityResult d = forward_density(tape, model.flow, tape.constant(x), fo);
    const auto pred =
        argmax_rows(model.classifier.logits(tape, slice_cols(d.z, 0, model.partition.d_y), false, nullptr).value());
    for (int p : pred) agree += p == static_cast<int>(y);
    total += static_cast<long>(pred.size());
  }
  const double frac = static_cast<double>(agree) / static_cast<double>(total);
  return report("classifier agrees with the sampled class on >= 90%", frac, 1.0, 0.1, frac >= 0.9);
}

// ---------------------------------------------------------------------------
// tolgate

OracleReport gate_returns() {
  const std::vector<double> R{-20.0, -26.0, -32.0};
  const double L = 1.7, alpha = 0.3;
  const auto r = compute_returns(L, R, alpha);
  double worst = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    double tail = 0.0;
    for (std::size_t j = i; j < 3; ++j) tail += R[j];
    worst = std::max(worst, std::abs(r[i] + (L - alpha / 3.0 * tail)));
  }
  return report("max |r_i - hand formula| <= 1e-12", worst, 0.0, 1e-12, worst <= 1e-12);
}

OracleReport gate_clamp() {
  GateConfig cfg;
  int bad = 0;
  for (double u : {-20.0, -8.0, -4.5, -1.0, 3.0}) {
    const double c = clamp_log10_tolerance(u, cfg);
    bad += c < -8.0 || c > -1.0 || (u >= -8.0 && u <= -1.0 && c != u);
  }
  return report("clamp keeps log10 tolerance in [-8, -1] and is the identity inside", bad, 0.0, 0.0, bad == 0);
}

struct ReinforceOutcome {
  double z_mu = 0.0, z_sigma = 0.0;  // |estimate - analytic| / se per component, baseline on
  double z_mu_off = 0.0, z_sigma_off = 0.0;
  double var_on = 0.0, var_off = 0.0;
  double est_mu = 0.0, est_sigma = 0.0, exact_mu = 0.0, exact_sigma = 0.0;
};

// One gate, objective f(u) = (log10 g - c)^2 with u ~ N(mu, sigma^2):
// E f = (mu - c)^2 + sigma^2, so dE/dmu = 2 (mu - c) and dE/dlog sigma = 2 sigma^2.
ReinforceOutcome reinforce_toy() {
  constexpr std::size_t kSamples = 50000;
  constexpr double c = -4.0;
  GateConfig gc;
  gc.init_log10_tol = -5.0;
  gc.init_sigma = 0.5;
  ParamStore store;
  GatePolicy policy(store, 1, 1, gc);
  Rng init(116);
  policy.init(store, init);
  const Mlp& net = policy.net(0);
  const ParamId out_bias = net.bias(net.layer_count() - 1);
  const std::size_t off = store.entry(out_bias).offset;
  const Tensor summary = Tensor::scalar(0.0);

  ReinforceOutcome o;
  for (bool with_baseline : {true, false}) {
    Rng rng(117);
    ReturnBaseline baseline(1, gc.baseline_decay, with_baseline);
    std::vector<double> g_mu(kSamples), g_sigma(kSamples);
    double mu = 0.0, sigma = 0.0;
    for (std::size_t i = 0; i < kSamples; ++i) {
      Tape tape(&store);
      const GateDraw d = policy.sample(tape, 0, summary, rng);
      mu = d.mu;
      sigma = d.sigma;
      const double f = std::pow(std::log10(d.tolerance) - c, 2);
      const std::vector<double> none{0.0};
      const auto returns = compute_returns(f, none, 0.0);
      const auto b = baseline.values();
      const std::vector<GateDraw> draws{d};
      const auto grads = tape.backward(reinforce_surrogate(tape.constant(Tensor::scalar(f)), draws, returns, b));
      baseline.update(returns);
      g_mu[i] = grads[off];
      g_sigma[i] = grads[off + 1];
    }
    const MeanSe m = mean_se(g_mu), s = mean_se(g_sigma);
    o.exact_mu = 2.0 * (mu - c);
    o.exact_sigma = 2.0 * sigma * sigma;
    if (with_baseline) {
      o.z_mu = std::abs(m.mean - o.exact_mu) / m.se;
      o.z_sigma = std::abs(s.mean - o.exact_sigma) / s.se;
      o.var_on = m.var + s.var;
      o.est_mu = m.mean;
      o.est_sigma = s.mean;
    } else {
      o.z_mu_off = std::abs(m.mean - o.exact_mu) / m.se;
      o.z_sigma_off = std::abs(s.mean - o.exact_sigma) / s.se;
      o.var_off = m.var + s.var;
    }
  }
  return o;
}

OracleReport gate_reinforce() {
  const ReinforceOutcome o = reinforce_toy();
  const double worst = std::max({o.z_mu, o.z_sigma, o.z_mu_off, o.z_sigma_off});
  const bool pass = worst <= 3.0 && o.var_on < o.var_off;
  return report("estimates within 3 SE of the analytic gradient; baseline lowers variance", worst, 0.0, 3.0, pass,
                fmt::format("d/dmu {:.5f} vs {:.5f}, d/dlog sigma {:.5f} vs {:.5f}; variance {:.4g} (baseline) vs "
                            "{:.4g}",
                            o.est_mu, o.exact_mu, o.est_sigma, o.exact_sigma, o.var_on, o.var_off));
}

// ---------------------------------------------------------------------------
// latentode

OracleReport latent_kl() {
  Rng rng(118);
  const Tensor mq = random_tensor(4, 3, rng), lq = random_tensor(4, 3, rng, 0.5);
  const Tensor mp = random_tensor(4, 3, rng), lp = random_tensor(4, 3, rng, 0.5);
  Tape tape;
  const Tensor kl = gaussian_kl(tape.constant(mq), tape.constant(lq), tape.constant(mp), tape.constant(lp)).value();
  const Tensor self = gaussian_kl(tape.constant(mq), tape.constant(lq), tape.constant(mq), tape.constant(lq)).value();
  double worst = 0.0;
  bool nonneg = true;
  for (std::size_t i = 0; i < kl.size(); ++i) {
    const double sq = std::exp(lq[i]), sp = std::exp(lp[i]);
    const double expected = std::log(sp / sq) + (sq * sq + (mq[i] - mp[i]) * (mq[i] - mp[i])) / (2 * sp * sp) - 0.5;
    worst = std::max(worst, std::abs(kl[i] - expected));
    nonneg = nonneg && kl[i] >= 0.0;
  }
  const double self_max = max_abs(self);
  return report("KL matches the closed form, is nonnegative and vanishes for equal arguments", worst, 0.0, 1e-12,
                worst <= 1e-12 && nonneg && self_max <= 1e-15);
}

SpiralCorpus small_corpus(std::size_t curves, std::size_t window, std::uint64_t seed) {
  SpiralSpec s;
  s.n_curves = curves;
  s.n_points = 120;
  s.window = window;
  s.reserve = 20;
  return gen_spiral_corpus(s, seed);
}

OracleReport latent_partition_degeneracy() {
  LatentOdeSpec spec;
  LatentOdeModel part(spec);
  Rng rng(119);
  part.init_random(rng);
  spec.partitioned = false;
  LatentOdeModel base(spec);
  for (const auto& e : base.params().entries()) {
    const ParamId src = part.params().find(e.name);
    std::copy_n(part.params().values(src).begin(), e.size, base.params().flat().begin() + e.offset);
  }
  const SpiralCorpus corpus = small_corpus(4, 20, 3);
  const std::vector<std::size_t> idx{0, 1, 2, 3};
  const SequenceBatch batch = window_batch(corpus, idx);
  const SolverConfig solver = SolverConfig::with_tolerance(1e-6);
  Tape ta(&part.params()), tb(&base.params());
  const ElboResult a = elbo(ta, part, batch, solver, nullptr);
  const ElboResult b = elbo(tb, base, batch, solver, nullptr);
  const double diff = std::max(std::abs(a.recon.value().item() - b.recon.value().item()),
                               std::abs(a.kl.value().item() - b.kl.value().item()));
  return report("zero conditioning: reconstruction and KL equal the baseline's exactly", diff, 0.0, 0.0, diff == 0.0);
}

OracleReport latent_gradient_fd() {
  LatentOdeSpec spec;
  spec.rnn_hidden = 8;
  spec.dyn_hidden = 8;
  spec.dec_hidden = 8;
  LatentOdeModel model(spec);
  Rng rng(120);
  model.init_random(rng);
  for (const auto& e : model.params().entries()) {
    if (e.name.rfind("cond.", 0) != 0) continue;
    for (std::size_t i = 0; i < e.size; ++i) model.params().flat()[e.offset + i] = rng.normal(0.0, 0.3);
  }
  const SpiralCorpus corpus = small_corpus(2, 8, 4);
  const std::vector<std::size_t> idx{0, 1};
  const SequenceBatch batch = window_batch(corpus, idx);
  const SolverConfig solver = SolverConfig::with_tolerance(1e-10);
  auto loss = [&]() {
    Tape t(&model.params());
    return elbo(t, model, batch, solver, nullptr).loss.value().item();
  };
  Tape tape(&model.params());
  const auto grads = tape.backward(elbo(tape, model, batch, solver, nullptr).loss);
  const auto pick = pick_indices(model.params().size(), 20, rng);
  const FdResult r = fd_compare(model.params().flat(), grads, pick, 1e-5, loss);
  return report("max relative error of the ELBO gradient on 20 parameters <= 1e-4", r.max_rel, 0.0, 1e-4,
                r.max_rel <= 1e-4, fmt::format("worst grad {:.6g} vs fd {:.6g}", r.worst_grad, r.worst_fd));
}

// ---------------------------------------------------------------------------
// synthdata

OracleReport synth_mixture_riemann() {
  const MixtureSpec m;
  double area = 0.0;
  const double h = 1e-3;
  for (double x = -12.0 + h / 2; x < 12.0; x += h) area += m.density(x) * h;
  const double e = std::abs(area - 1.0);
  return report("|integral of the mixture density - 1| <= 1e-9", e, 0.0, 1e-9, e <= 1e-9);
}

OracleReport synth_mixture_moments() {
  const MixtureSpec m;
  const Dataset d = gen_1d_mixture(m, 100000, 21);
  const MeanSe s = mean_se(d.x.vec());
  double mean = 0.0;
  for (std::size_t k = 0; k < m.weights.size(); ++k) mean += m.weights[k] * m.means[k];
  const double z = std::abs(s.mean - mean) / s.se;
  return report("sample mean within 3 SE of the mixture mean", z, 0.0, 3.0, z <= 3.0);
}

OracleReport synth_labeled_riemann() {
  const Labeled2dSpec s;
  double worst = 0.0;
  const double h = 0.02;
  for (int y = 0; y < static_cast<int>(s.num_classes()); ++y) {
    double area = 0.0;
    for (double a = -8.0 + h / 2; a < 8.0; a += h) {
      for (double b = -8.0 + h / 2; b < 8.0; b += h) area += std::exp(s.class_log_density(y, a, b)) * h * h;
    }
    worst = std::max(worst, std::abs(area - 1.0));
  }
  return report("every class density integrates to 1 within 1e-6", worst, 0.0, 1e-6, worst <= 1e-6);
}

OracleReport synth_spiral_formula() {
  double worst = 0.0;
  for (double t : {0.5, 2.0, 7.5, 18.0}) {
    const SpiralSystem cw{1.1, 0.2, SpiralDirection::clockwise};
    const SpiralSystem ccw{0.9, 0.3, SpiralDirection::counter_clockwise};
    const auto p = gen_spiral(cw, t);
    const auto q = gen_spiral(ccw, t);
    const double rc = 1.1 + 50 * 0.2 / t, rq = 0.9 + 0.3 * t;
    worst = std::max({worst, std::abs(p[0] - (rc * std::cos(t) - 5)), std::abs(p[1] - rc * std::sin(t)),
                      std::abs(q[0] - (rq * std::cos(t) + 5)), std::abs(q[1] - rq * std::sin(t))});
  }
  return report("max |gen_spiral - closed form| <= 1e-12", worst, 0.0, 1e-12, worst <= 1e-12);
}

OracleReport synth_spiral_statistics() {
  SpiralSpec spec;  // full 5000-curve corpus
  const SpiralCorpus c = gen_spiral_corpus(spec, 7);
  std::vector<double> a, b;
  std::size_t cw = 0;
  double sq = 0.0;
  std::size_t n = 0;
  for (const auto& curve : c.curves) {
    a.push_back(curve.system.a);
    b.push_back(curve.system.b);
    cw += curve.system.direction == SpiralDirection::clockwise;
    for (std::size_t k = 0; k < spec.window; ++k) {
      for (std::size_t j = 0; j < 2; ++j) {
        const double r = curve.window.at(k, j) - curve.truth.at(curve.window_start + k, j);
        sq += r * r;
        ++n;
      }
    }
  }
  const MeanSe ma = mean_se(a), mb = mean_se(b);
  const double za = std::abs(ma.mean - spec.a_mean) / ma.se, zb = std::abs(mb.mean - spec.b_mean) / mb.se;
  const double noise = std::sqrt(sq / static_cast<double>(n));
  const double noise_err = std::abs(noise - spec.noise) / spec.noise;
  const bool pass = za <= 3 && zb <= 3 && cw * 2 == c.curves.size() && noise_err <= 0.01;
  return report("a, b means within 3 SE; half clockwise; noise sd within 1%", std::max(za, zb), 0.0, 3.0, pass,
                fmt::format("{} curves, {} clockwise, noise sd {:.4f}", c.curves.size(), cw, noise));
}

// ---------------------------------------------------------------------------
// train

OracleReport train_adam_quadratic() {
  std::vector<double> x{3.0, -2.0, 0.5};
  const std::vector<double> target{1.0, 2.0, -1.0};
  Adam adam(3);
  for (int it = 0; it < 3000; ++it) {
    std::vector<double> g(3);
    for (std::size_t i = 0; i < 3; ++i) g[i] = 2.0 * (x[i] - target[i]) * static_cast<double>(i + 1);
    adam.step(x, g, it < 2000 ? 1e-2 : 1e-3);
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < 3; ++i) worst = std::max(worst, std::abs(x[i] - target[i]));
  return report("Adam reaches the quadratic minimum within 1e-6", worst, 0.0, 1e-6, worst <= 1e-6);
}

OracleReport train_riemann_identity() {
  CnfSpec spec;
  spec.dim = 1;
  spec.num_layers = 1;
  const CnfModel model = build_cnf_skeleton(spec);
  const double area = riemann_normalization(model, -8.0, 8.0, 1e-3, SolverConfig::with_tolerance(1e-5));
  const double e = std::abs(area - 1.0);
  return report("identity flow integrates to 1 within 1e-9", e, 0.0, 1e-9, e <= 1e-9);
}

OracleReport train_checkpoint_roundtrip() {
  Rng rng(122);
  CnfSpec spec;
  spec.dim = 2;
  spec.num_classes = 4;
  spec.d_y = 1;
  spec.gated = true;
  const CnfModel model = build_cnf_model(spec, rng);
  const auto dir = std::filesystem::temp_directory_path() / fmt::format("infocnf-oracle-{}", ::getpid());
  std::filesystem::create_directories(dir);
  save_cnf(dir / "m.json", model, default_config(Task::infocnf));
  const CnfModel back = load_cnf(dir / "m.json");
  std::filesystem::remove_all(dir);
  const bool same = back.params.flat() == model.params.flat() && back.params.count() == model.params.count();
  return report("reloaded parameters are bit-identical", same ? 0.0 : 1.0, 0.0, 0.0, same);
}

OracleReport train_config_unknown_key() {
  std::string msg;
  try {
    parse_config(nlohmann::json::parse(R"({"data": {"n_trian": 5}})"), Task::infocnf);
  } catch (const ConfigError& e) {
    msg = e.what();
  }
  const bool pass = msg.find("data.n_trian") != std::string::npos;
  return report("unknown key rejected with its field path", pass ? 0.0 : 1.0, 0.0, 0.0, pass, msg);
}

OracleReport train_density_near_optimum() {
  TrainConfig cfg = default_config(Task::density);
  cfg.model.num_layers = 1;
  const CnfRun run = train_cnf(cfg);
  double exact = 0.0;
  const Tensor& x = run.test.x;
  for (std::size_t i = 0; i < x.rows(); ++i) exact -= cfg.data.mixture.log_density(x[i]) / static_cast<double>(x.rows());
  const double model_nll = run.metrics.back().test_nll;
  const double gap = model_nll - exact;
  return report("1-layer flow test NLL within 0.1 nats of the exact density's", gap, 0.0, 0.1, std::abs(gap) <= 0.1,
                fmt::format("model {:.4f} vs exact {:.4f}", model_nll, exact));
}

// ---------------------------------------------------------------------------
// acceptance criteria

OracleReport acc_normalization() {
  const TimedCnf& d = cnf_fixture(Task::density, ToleranceMode::fixed, 0);
  const auto t0 = Clock::now();
  const double area = riemann_normalization(d.run.model, -8.0, 8.0, 1e-3, SolverConfig::with_tolerance(1e-5));
  const double secs = d.seconds + seconds_since(t0);
  const double e = std::abs(area - 1.0);
  return report("|area - 1| <= 0.01 and runtime <= 900 s", e, 0.0, 0.01, e <= 0.01 && secs <= 900.0,
                fmt::format("area {:.6f}; train + check {:.0f} s; final test NLL {:.4f}", area, secs,
                            d.run.metrics.back().test_nll));
}

OracleReport acc_tolerance_insensitivity() {
  const CnfRun& run = cnf_fixture(Task::infocnf, ToleranceMode::fixed, 0).run;
  EvalOptions opts = eval_options(run.config);
  std::vector<EvalMetrics> ms;
  std::string detail;
  for (double tol : {1e-5, 1e-6, 1e-7, 1e-8}) {
    opts.tolerance = tol;
    ms.push_back(evaluate(run.model, run.test, opts));
    detail += fmt::format("{:g}: nll {:.6f} err {:.4f} nfe {:.1f}; ", tol, ms.back().nll, ms.back().err,
                          ms.back().mean_nfe);
  }
  double spread = 0.0;
  bool same_err = true;
  for (const auto& a : ms) {
    for (const auto& b : ms) {
      spread = std::max(spread, std::abs(a.nll - b.nll));
      same_err = same_err && a.err == b.err;
    }
  }
  return report("NLL spread <= 1e-3 nats and identical test errors", spread, 0.0, 1e-3, spread <= 1e-3 && same_err,
                detail);
}

OracleReport acc_nfe_monotonicity() {
  const CnfRun& run = cnf_fixture(Task::infocnf, ToleranceMode::fixed, 0).run;
  EvalOptions opts = eval_options(run.config);
  opts.tolerance = 1e-7;
  const double tight = evaluate(run.model, run.test, opts).mean_nfe;
  opts.tolerance = 1e-3;
  const double loose = evaluate(run.model, run.test, opts).mean_nfe;
  return report("mean NFE at 1e-7 > mean NFE at 1e-3", tight - loose, 0.0, 0.0, tight > loose,
                fmt::format("NFE {:.1f} at 1e-7, {:.1f} at 1e-3", tight, loose));
}

OracleReport acc_gradient_fidelity() {
  Rng rng(130);
  CnfModel model = random_conditional_model(2, 4, 1, 1, rng);
  Labeled2dSpec spec;
  spec.samples_per_class = 3;
  const Dataset data = gen_2d_labeled(spec, 31);
  LossOptions lo;
  lo.training = true;
  lo.flow.solver = SolverConfig::with_tolerance(1e-10);
  Rng dropout(132);
  // Reusing one dropout stream state per evaluation keeps the mask fixed across perturbations.
  auto objective = [&](Tape& t) {
    Rng mask = dropout;
    lo.dropout_rng = &mask;
    return infocnf_loss(t, model, data.x, data.labels, lo).objective;
  };
  auto loss = [&]() {
    Tape t(&model.params);
    return objective(t).value().item();
  };
  Tape tape(&model.params);
  const auto grads = tape.backward(objective(tape));
  const auto idx = pick_indices(model.params.size(), 20, rng);
  const FdResult r = fd_compare(model.params.flat(), grads, idx, 1e-4, loss);
  return report("max relative error on 20 random parameters <= 1e-4", r.max_rel, 0.0, 1e-4, r.max_rel <= 1e-4,
                fmt::format("{} parameters; worst grad {:.8g} vs fd {:.8g}", model.params.size(), r.worst_grad,
                            r.worst_fd));
}

OracleReport acc_solver_order() {
  const OrderRatios o = order_ratios();
  const bool pass = o.rk4 >= 12 && o.rk4 <= 20 && o.dopri5 >= 24 && o.dopri5 <= 40;
  return report("rk4 ratio in [12, 20] and dopri5 ratio in [24, 40]", o.rk4, 16.0, 4.0, pass,
                fmt::format("rk4 {:.3f}, dopri5 {:.3f}", o.rk4, o.dopri5));
}

OracleReport acc_hutchinson() {
  OracleReport r = flow_hutchinson();
  return r;
}

OracleReport acc_partition_efficiency() {
  double err_info = 0.0, err_ccnf = 0.0, slowest = 0.0;
  std::size_t p_info = 0, p_ccnf = 0;
  std::string detail;
  for (std::uint64_t seed : {0, 1, 2}) {
    const TimedCnf& a = cnf_fixture(Task::infocnf, ToleranceMode::fixed, seed);
    const TimedCnf& b = cnf_fixture(Task::ccnf, ToleranceMode::fixed, seed);
    err_info += a.run.metrics.back().test_err / 3.0;
    err_ccnf += b.run.metrics.back().test_err / 3.0;
    p_info = a.run.model.conditioning_parameter_count();
    p_ccnf = b.run.model.conditioning_parameter_count();
    slowest = std::max({slowest, a.seconds, b.seconds});
    detail += fmt::format("seed {}: err {:.4f} vs {:.4f}; ", seed, a.run.metrics.back().test_err,
                          b.run.metrics.back().test_err);
  }
  const bool pass = p_info < p_ccnf && err_info <= err_ccnf + 0.01 && slowest <= 1800.0;
  return report("fewer conditioning parameters, error <= CCNF + 1 pp, runtime <= 1800 s per run", err_info - err_ccnf,
                0.0, 0.01, pass,
                detail + fmt::format("parameters {} vs {}; slowest run {:.0f} s", p_info, p_ccnf, slowest));
}

OracleReport acc_gated_nfe() {
  double nfe_fixed = 0.0, nfe_gated = 0.0, nll_fixed = 0.0, nll_gated = 0.0;
  std::string detail;
  for (std::uint64_t seed : {0, 1, 2}) {
    const CnfRun& f = cnf_fixture(Task::infocnf, ToleranceMode::fixed, seed).run;
    const CnfRun& g = cnf_fixture(Task::infocnf, ToleranceMode::gated, seed).run;
    nfe_fixed += epoch_mean_nfe(f) / 3.0;
    nfe_gated += epoch_mean_nfe(g) / 3.0;
    nll_fixed += f.metrics.back().test_nll / 3.0;
    nll_gated += g.metrics.back().test_nll / 3.0;
    detail += fmt::format("seed {}: nfe {:.2f} vs {:.2f}, nll {:.4f} vs {:.4f}; ", seed, epoch_mean_nfe(g),
                          epoch_mean_nfe(f), g.metrics.back().test_nll, f.metrics.back().test_nll);
  }
  const double reduction = 1.0 - nfe_gated / nfe_fixed;
  const double nll_gap = std::abs(nll_gated - nll_fixed);
  const bool pass = reduction >= 0.05 && nll_gap <= 0.05;
  return report("NFE reduction >= 5% with |NLL gap| <= 0.05 nats", reduction, 0.05, 0.05, pass,
                detail + fmt::format("NLL gap {:.4f}", nll_gap));
}

OracleReport acc_reinforce() { return gate_reinforce(); }

OracleReport acc_spiral() {
  int wins = 0;
  double slowest = 0.0;
  std::string detail;
  for (std::uint64_t seed : {0, 1, 2}) {
    const TimedLatent& p = latent_fixture(true, seed);
    const TimedLatent& b = latent_fixture(false, seed);
    wins += p.run.final_eval.mse < b.run.final_eval.mse;
    slowest = std::max({slowest, p.seconds, b.seconds});
    detail += fmt::format("seed {}: mse {:.4f} vs {:.4f} (true-label z_y {:.4f}); ", seed, p.run.final_eval.mse,
                          b.run.final_eval.mse, p.run.final_eval.label_mse);
  }
  return report("partitioned MSE lower in >= 2 of 3 seeds, runtime <= 2700 s per run", wins, 2.0, 0.0,
                wins >= 2 && slowest <= 2700.0, detail + fmt::format("slowest run {:.0f} s", slowest));
}

OracleReport acc_determinism() {
  TrainConfig cfg = default_config(Task::infocnf);
  cfg.epochs = 3;
  cfg.data.n_train = 100;
  cfg.data.n_test = 50;
  cfg.batch_size = 100;
  cfg.seed = 9;
  const CnfRun a = train_cnf(cfg);
  const CnfRun b = train_cnf(cfg);
  const auto dir = std::filesystem::temp_directory_path() / fmt::format("infocnf-det-{}", ::getpid());
  std::filesystem::create_directories(dir);
  write_metrics_csv(dir / "a.csv", a.metrics);
  write_metrics_csv(dir / "b.csv", b.metrics);
  const bool same_csv = read_csv(dir / "a.csv").rows == read_csv(dir / "b.csv").rows;
  const bool same_params = a.model.params.flat() == b.model.params.flat();

  save_cnf(dir / "model.json", a.model, cfg);
  const CnfModel back = load_cnf(dir / "model.json");
  const EvalOptions opts = eval_options(cfg);
  const EvalMetrics m1 = evaluate(a.model, a.test, opts), m2 = evaluate(back, a.test, opts);
  const bool same_eval = m1.nll == m2.nll && m1.err == m2.err && m1.mean_nfe == m2.mean_nfe &&
                         m1.marginal_nll == m2.marginal_nll;

  TrainConfig lcfg = default_config(Task::latentode);
  LatentOdeModel lat(lcfg.model.latent);
  Rng rng(133);
  lat.init_random(rng);
  save_latentode(dir / "latent.json", lat, lcfg);
  const LatentOdeModel lat_back = load_latentode(dir / "latent.json");
  const SpiralCorpus corpus = small_corpus(4, 20, 5);
  const SolverConfig s = SolverConfig::with_tolerance(1e-4);
  const LatentEval e1 = evaluate_latentode(lat, corpus, 20, s, 4), e2 = evaluate_latentode(lat_back, corpus, 20, s, 4);
  const bool same_latent = e1.loss == e2.loss && e1.mse == e2.mse;
  std::filesystem::remove_all(dir);

  const int bad = !same_csv + !same_params + !same_eval + !same_latent;
  return report("repeated runs and reloaded checkpoints are bit-identical", bad, 0.0, 0.0, bad == 0,
                fmt::format("metrics {}, parameters {}, flow eval {}, latent eval {}", same_csv, same_params,
                            same_eval, same_latent));
}

OracleReport acc_suite();

std::vector<Oracle> build_registry() {
  std::vector<Oracle> r = {
      {"diffcore/primitive_gradients", "every primitive's adjoint against central differences", primitive_gradients},
      {"diffcore/mlp_gradient", "MLP parameter gradient against central differences", mlp_gradient},
      {"diffcore/jvp_vjp_duality", "u.(Jv) equals (u^T J).v", jvp_vjp_duality},
      {"diffcore/philox_known_answers", "Philox4x32-10 known-answer vectors", philox_known_answers},
      {"solver/exponential", "dopri5 on y' = y against e", solver_exponential},
      {"solver/harmonic_oscillator", "dopri5 dense grid against cos and sin", solver_harmonic},
      {"solver/order_rk4", "rk4 convergence order", solver_order_rk4},
      {"solver/order_dopri5", "forced-step dopri5 convergence order", solver_order_dopri5},
      {"solver/nfe_accounting", "reported NFE equals counted dynamics calls", solver_nfe_accounting},
      {"solver/nfe_monotone", "NFE grows as tolerance tightens", solver_nfe_monotone},
      {"solver/sensitivity", "discrete adjoint dy(1)/dy0 against e^a", solver_sensitivity},
      {"solver/error_norm", "error norm against the RMS formula", solver_error_norm},
      {"flow/trace_exact_fd", "exact Jacobian trace against central differences", flow_trace_fd},
      {"flow/hutchinson_unbiased", "Hutchinson mean within 3 SE of the exact trace", flow_hutchinson},
      {"flow/invertibility", "sampling inverts the density pass", flow_invertibility},
      {"flow/linear_density", "linear dynamics against the closed-form density", flow_linear_density},
      {"flow/gradient_fd", "CNF NLL gradient against central differences", flow_gradient_fd},
      {"flow/hutchinson_training_1d", "1D training with Hutchinson matches the exact trace",
       flow_hutchinson_training},
      {"condition/log_prior_formula", "conditional log prior against the Gaussian formula", condition_log_prior},
      {"condition/zero_init_neutral", "fresh conditioning is the standard normal", condition_zero_init},
      {"condition/loss_decomposition", "objective equals nll + beta * xent", condition_loss_decomposition},
      {"condition/marginal_bound", "marginal NLL bounded by conditional NLL + log L", condition_marginal_bound},
      {"condition/sample_ks", "conditional samples pass a KS test", condition_sample_ks},
      {"condition/classifier_roundtrip", "classifier recovers the class of conditional samples",
       condition_classifier_roundtrip},
      {"tolgate/returns_arithmetic", "returns against the hand formula", gate_returns},
      {"tolgate/clamp", "tolerance clamp range", gate_clamp},
      {"tolgate/reinforce_toy", "REINFORCE estimate against the analytic gradient", gate_reinforce},
      {"latentode/kl_closed_form", "Gaussian KL formula", latent_kl},
      {"latentode/partition_degeneracy", "zero conditioning reduces to the baseline", latent_partition_degeneracy},
      {"latentode/elbo_gradient_fd", "ELBO gradient against central differences", latent_gradient_fd},
      {"synthdata/mixture_riemann", "mixture density integrates to one", synth_mixture_riemann},
      {"synthdata/mixture_moments", "mixture sample mean", synth_mixture_moments},
      {"synthdata/labeled2d_riemann", "class densities integrate to one", synth_labeled_riemann},
      {"synthdata/spiral_formula", "spiral generator against the closed form", synth_spiral_formula},
      {"synthdata/spiral_statistics", "corpus parameter, direction and noise statistics", synth_spiral_statistics},
      {"train/adam_quadratic", "Adam converges on a quadratic", train_adam_quadratic},
      {"train/riemann_identity_flow", "identity flow normalization", train_riemann_identity},
      {"train/checkpoint_roundtrip", "checkpoint save and load", train_checkpoint_roundtrip},
      {"train/config_unknown_key", "config rejects unknown keys by path", train_config_unknown_key},
      {"train/density_near_optimum", "trained 1D flow approaches the exact NLL", train_density_near_optimum},
      {"acceptance/01_normalization", "trained 1D density integrates to one", acc_normalization},
      {"acceptance/02_tolerance_insensitivity", "evaluation metrics stable from 1e-5 to 1e-8",
       acc_tolerance_insensitivity},
      {"acceptance/03_nfe_monotonicity", "NFE at 1e-7 exceeds NFE at 1e-3", acc_nfe_monotonicity},
      {"acceptance/04_gradient_fidelity", "InfoCNF loss gradient against finite differences", acc_gradient_fidelity},
      {"acceptance/05_solver_order", "rk4 and dopri5 convergence orders", acc_solver_order},
      {"acceptance/06_hutchinson", "Hutchinson unbiasedness", acc_hutchinson},
      {"acceptance/07_partition_efficiency", "InfoCNF against CCNF", acc_partition_efficiency},
      {"acceptance/08_gated_nfe", "learned tolerances reduce training NFE", acc_gated_nfe},
      {"acceptance/09_reinforce", "REINFORCE toy gradient and baseline", acc_reinforce},
      {"acceptance/10_spiral_extrapolation", "partitioned latent ODE against the baseline", acc_spiral},
      {"acceptance/11_determinism", "bit-exact reruns and checkpoint round trip", acc_determinism},
      {"acceptance/12_oracle_suite", "every module oracle passes within 1800 s", acc_suite},
  };
  return r;
}

std::map<std::string, OracleReport>& memo() {
  static std::map<std::string, OracleReport> m;
  return m;
}

OracleReport acc_suite() {
  int failures = 0, count = 0;
  double seconds = 0.0;
  std::string failed;
  for (const auto& o : oracle_registry()) {
    if (o.name.rfind("acceptance/", 0) == 0) continue;
    const OracleReport r = run_oracle(o);
    ++count;
    seconds += r.seconds;
    if (!r.pass) {
      ++failures;
      failed += " " + o.name;
    }
  }
  return report("zero failures and total runtime <= 1800 s", failures, 0.0, 0.0, failures == 0 && seconds <= 1800.0,
                fmt::format("{} oracles in {:.1f} s{}", count, seconds, failed.empty() ? "" : "; failed:" + failed));
}

}  // namespace

const std::vector<Oracle>& oracle_registry() {
  static const std::vector<Oracle> r = build_registry();
  return r;
}

std::vector<const Oracle*> select_oracles(const std::string& pattern) {
  std::vector<const Oracle*> out;
  std::regex re;
  try {
    re = std::regex(pattern.empty() ? std::string(".*") : pattern);
  } catch (const std::regex_error& e) {
    throw UsageError(fmt::format("invalid filter '{}': {}", pattern, e.what()));
  }
  for (const auto& o : oracle_registry()) {
    if (std::regex_search(o.name, re)) out.push_back(&o);
  }
  return out;
}

OracleReport run_oracle(const Oracle& oracle) {
  auto it = memo().find(oracle.name);
  if (it != memo().end()) return it->second;
  const auto t0 = Clock::now();
  OracleReport r;
  try {
    r = oracle.run();
  } catch (const std::exception& e) {
    r = report("completes without error", NAN, 0.0, 0.0, false, fmt::format("exception: {}", e.what()));
  }
  r.name = oracle.name;
  r.seconds = seconds_since(t0);
  memo()[oracle.name] = r;
  return r;
}

nlohmann::json oracle_report_json(const std::vector<OracleReport>& reports) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["oracles"] = nlohmann::json::array();
  int failures = 0;
  for (const auto& r : reports) {
    failures += !r.pass;
    j["oracles"].push_back({{"name", r.name},
                            {"measured", num(r.measured)},
                            {"expected", num(r.expected)},
                            {"tolerance", num(r.tolerance)},
                            {"bound", r.bound},
                            {"pass", r.pass},
                            {"seconds", r.seconds},
                            {"detail", r.detail}});
  }
  j["total"] = reports.size();
  j["failures"] = failures;
  return j;
}

std::string format_oracle_line(const OracleReport& r) {
  return fmt::format("{} {:<40} measured={:<12.6g} ({}) {:.1f}s{}", r.pass ? "PASS" : "FAIL", r.name, r.measured,
                     r.bound, r.seconds, r.detail.empty() ? "" : "  [" + r.detail + "]");
}

}  // namespace infocnf
