#include "infocnf/odesolve.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace infocnf {

const char* solver_method_name(SolverMethod m) {
  switch (m) {
    case SolverMethod::dopri5: return "dopri5";
    case SolverMethod::rk4_fixed: return "rk4_fixed";
  }
  return "?";
}

SolverMethod parse_solver_method(const std::string& name) {
  if (name == "dopri5") return SolverMethod::dopri5;
  if (name == "rk4_fixed") return SolverMethod::rk4_fixed;
  throw ConfigError("unknown solver method '" + name + "'");
}

SolverConfig SolverConfig::with_tolerance(double g) {
  SolverConfig cfg;
  cfg.rtol = g;
  cfg.atol = g;
  return cfg;
}

SolverConfig SolverConfig::rk4(long steps) {
  SolverConfig cfg;
  cfg.method = SolverMethod::rk4_fixed;
  cfg.fixed_step_count = steps;
  return cfg;
}

void SolverConfig::validate() const {
  if (!(rtol > 0.0) || !(atol > 0.0)) throw ConfigError(fmt::format("solver tolerances must be positive (rtol={}, atol={})", rtol, atol));
  if (max_steps <= 0) throw ConfigError("solver max_steps must be positive");
  if (!(min_factor > 0.0 && min_factor < 1.0 && max_factor > 1.0)) {
    throw ConfigError(fmt::format("solver factors must satisfy 0 < min_factor < 1 < max_factor (got {}, {})",
                                  min_factor, max_factor));
  }
  if (!(safety > 0.0 && safety <= 1.0)) throw ConfigError("solver safety must lie in (0, 1]");
  if (method == SolverMethod::rk4_fixed && fixed_step_count <= 0) {
    throw ConfigError("rk4_fixed requires a positive fixed_step_count");
  }
  if (fixed_step_count < 0) throw ConfigError("fixed_step_count must be nonnegative");
}

const ButcherTableau& dormand_prince() {
  static const ButcherTableau tableau = [] {
    ButcherTableau t{};
    t.c = {0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0};
    t.a[1] = {1.0 / 5.0};
    t.a[2] = {3.0 / 40.0, 9.0 / 40.0};
    t.a[3] = {44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0};
    t.a[4] = {19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0};
    t.a[5] = {9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0};
    t.a[6] = {35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0};
    t.b = {35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0};
    t.b_hat = {5179.0 / 57600.0, 0.0,         7571.0 / 16695.0, 393.0 / 640.0,
               -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0};
    return t;
  }();
  return tableau;
}

double error_norm(std::span<const double> err, std::span<const double> y0, std::span<const double> y1, double atol,
                  double rtol) {
  if (err.size() != y0.size() || err.size() != y1.size()) throw ShapeError("error_norm: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < err.size(); ++i) {
    const double scale = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double r = err[i] / scale;
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(err.size()));
}

double next_step_size(double h, double err_norm, const SolverConfig& cfg) {
  if (err_norm == 0.0) return h * cfg.max_factor;
  const double factor = cfg.safety * std::pow(err_norm, -0.2);
  return h * std::clamp(factor, cfg.min_factor, cfg.max_factor);
}

namespace {

class CountedDynamics {
 public:
  CountedDynamics(const Dynamics& f, SolveStats& stats) : f_(f), stats_(stats) {}

  Var operator()(const Var& y, double t) const {
    ++stats_.nfe;
    Var k = f_(y, t);
    if (k.shape() != y.shape()) {
      throw ShapeError(fmt::format("dynamics returned shape {} for state {}", shape_string(k.shape()),
                                   shape_string(y.shape())));
    }
    if (!k.value().all_finite()) throw NumericError(fmt::format("non-finite derivative at t={}", t));
    return k;
  }

 private:
  const Dynamics& f_;
  SolveStats& stats_;
};

double rms_scaled(std::span<const double> v, std::span<const double> y0, double atol, double rtol) {
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double r = v[i] / (atol + std::abs(y0[i]) * rtol);
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(v.size()));
}

InitialStep initial_step_counted(const CountedDynamics& f, const Var& y0, double t0, double t1,
                                 const SolverConfig& cfg, SolveStats& stats) {
  const long before = stats.nfe;
  InitialStep res;
  res.f0 = f(y0, t0);
  const double span = t1 - t0;
  const auto y = y0.value().data();
  const auto f0 = res.f0.value().data();
  const bool zero_derivative = std::all_of(f0.begin(), f0.end(), [](double v) { return v == 0.0; });
  if (zero_derivative) {
    res.h = span / 100.0;
    res.nfe = stats.nfe - before;
    return res;
  }
  const double d0 = rms_scaled(y, y, cfg.atol, cfg.rtol);
  const double d1 = rms_scaled(f0, y, cfg.atol, cfg.rtol);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, span);

  Tensor trial = y0.value();
  for (std::size_t i = 0; i < trial.size(); ++i) trial[i] += h0 * f0[i];
  const Var f1 = f(y0.tape()->constant(std::move(trial)), t0 + h0);
  std::vector<double> diff(f0.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = f1.value()[i] - f0[i];
  const double d2 = rms_scaled(diff, y, cfg.atol, cfg.rtol) / h0;
  const double dmax = std::max(d1, d2);
  const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 0.2);
  res.h = std::min({100.0 * h0, h1, span});
  res.nfe = stats.nfe - before;
  return res;
}

struct Attempt {
  Var y_new;
  Var k_last;
  std::vector<double> err;
};

Attempt dopri5_attempt(const CountedDynamics& f, const Var& y, const Var& k1, double t, double h) {
  const auto& tab = dormand_prince();
  std::array<Var, 7> k;
  k[0] = k1;
  Var stage_input;
  for (std::size_t s = 1; s < 7; ++s) {
    std::vector<Var> terms{y};
    std::vector<double> coeffs{1.0};
    for (std::size_t j = 0; j < s; ++j) {
      if (tab.a[s][j] == 0.0) continue;
      terms.push_back(k[j]);
      coeffs.push_back(h * tab.a[s][j]);
    }
    stage_input = lincomb(terms, coeffs);
    k[s] = f(stage_input, t + tab.c[s] * h);
  }
  Attempt out;
  out.y_new = stage_input;  // the last stage is evaluated at the 5th-order solution
  out.k_last = k[6];
  out.err.assign(y.value().size(), 0.0);
  for (std::size_t s = 0; s < 7; ++s) {
    const double e = h * (tab.b[s] - tab.b_hat[s]);
    if (e == 0.0) continue;
    const auto kv = k[s].value().data();
    for (std::size_t i = 0; i < out.err.size(); ++i) out.err[i] += e * kv[i];
  }
  return out;
}

Var rk4_step(const CountedDynamics& f, const Var& y, double t, double h) {
  const Var k1 = f(y, t);
  const Var y2 = lincomb(std::array<Var, 2>{y, k1}, std::array<double, 2>{1.0, 0.5 * h});
  const Var k2 = f(y2, t + 0.5 * h);
  const Var y3 = lincomb(std::array<Var, 2>{y, k2}, std::array<double, 2>{1.0, 0.5 * h});
  const Var k3 = f(y3, t + 0.5 * h);
  const Var y4 = lincomb(std::array<Var, 2>{y, k3}, std::array<double, 2>{1.0, h});
  const Var k4 = f(y4, t + h);
  return lincomb(std::array<Var, 5>{y, k1, k2, k3, k4},
                 std::array<double, 5>{1.0, h / 6.0, h / 3.0, h / 3.0, h / 6.0});
}

void check_times(std::span<const double> times) {
  if (times.size() < 2) throw UsageError("integration needs at least a start and an end time");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) {
      throw UsageError(fmt::format("integration times must increase strictly (t[{}]={} <= t[{}]={})", i, times[i],
                                   i - 1, times[i - 1]));
    }
  }
}

}  // namespace

InitialStep initial_step(const Dynamics& f, const Var& y0, double t0, double t1, const SolverConfig& cfg) {
  SolveStats stats;
  CountedDynamics counted(f, stats);
  return initial_step_counted(counted, y0, t0, t1, cfg, stats);
}

double initial_step_size(const Dynamics& f, const Var& y0, double t0, double t1, const SolverConfig& cfg) {
  return initial_step(f, y0, t0, t1, cfg).h;
}

GridSolveResult integrate_grid(const Dynamics& f, const Var& y0, std::span<const double> times,
                               const SolverConfig& cfg) {
  cfg.validate();
  check_times(times);
  if (!y0.value().all_finite()) throw NumericError("initial state is not finite");

  GridSolveResult res;
  CountedDynamics counted(f, res.stats);
  res.ys.push_back(y0);
  Var y = y0;

  if (cfg.method == SolverMethod::rk4_fixed) {
    for (std::size_t idx = 1; idx < times.size(); ++idx) {
      const double t0 = times[idx - 1];
      const double h = (times[idx] - t0) / static_cast<double>(cfg.fixed_step_count);
      for (long s = 0; s < cfg.fixed_step_count; ++s) {
        y = rk4_step(counted, y, t0 + static_cast<double>(s) * h, h);
        ++res.stats.accepted_steps;
      }
      res.ys.push_back(y);
    }
    return res;
  }

  if (cfg.fixed_step_count > 0) {
    Var k1 = counted(y, times[0]);
    for (std::size_t idx = 1; idx < times.size(); ++idx) {
      const double t0 = times[idx - 1];
      const double h = (times[idx] - t0) / static_cast<double>(cfg.fixed_step_count);
      for (long s = 0; s < cfg.fixed_step_count; ++s) {
        Attempt a = dopri5_attempt(counted, y, k1, t0 + static_cast<double>(s) * h, h);
        y = a.y_new;
        k1 = a.k_last;
        ++res.stats.accepted_steps;
      }
      res.ys.push_back(y);
    }
    return res;
  }

  InitialStep init = initial_step_counted(counted, y, times.front(), times.back(), cfg, res.stats);
  double h = init.h;
  Var k1 = init.f0;
  double t = times.front();
  for (std::size_t idx = 1; idx < times.size(); ++idx) {
    const double target = times[idx];
    const double snap = 1e-12 * std::max(1.0, std::abs(target));
    while (t < target) {
      if (res.stats.accepted_steps + res.stats.rejected_steps >= cfg.max_steps) {
        throw DivergenceError(fmt::format("solver exceeded max_steps={} at t={}", cfg.max_steps, t), res.stats);
      }
      double step = h;
      bool last = false;
      if (t + step >= target - snap) {
        step = target - t;
        last = true;
      }
      if (!(step > 1e-14 * std::max(1.0, std::abs(t)))) {
        throw DivergenceError(fmt::format("step size underflow (h={}) at t={}", step, t), res.stats);
      }
      Attempt a = dopri5_attempt(counted, y, k1, t, step);
      const double en = error_norm(a.err, y.value().data(), a.y_new.value().data(), cfg.atol, cfg.rtol);
      if (!std::isfinite(en)) throw NumericError(fmt::format("non-finite error estimate at t={}", t));
      if (en <= 1.0) {
        y = a.y_new;
        k1 = a.k_last;
        t = last ? target : t + step;
        ++res.stats.accepted_steps;
      } else {
        ++res.stats.rejected_steps;
      }
      h = next_step_size(step, en, cfg);
    }
    res.ys.push_back(y);
  }
  return res;
}

SolveResult integrate(const Dynamics& f, const Var& y0, double t0, double t1, const SolverConfig& cfg) {
  const double times[2] = {t0, t1};
  GridSolveResult g = integrate_grid(f, y0, times, cfg);
  return SolveResult{g.ys.back(), g.stats};
}

}  // namespace infocnf
