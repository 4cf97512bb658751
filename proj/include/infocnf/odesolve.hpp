#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "infocnf/errors.hpp"
#include "infocnf/tape.hpp"

namespace infocnf {

enum class SolverMethod { dopri5, rk4_fixed };

const char* solver_method_name(SolverMethod m);
SolverMethod parse_solver_method(const std::string& name);

/// Lower and upper bound on a tolerance emitted by a gate.
inline constexpr double kMinGateTolerance = 1e-8;
inline constexpr double kMaxGateTolerance = 1e-1;

struct SolverConfig {
  SolverMethod method = SolverMethod::dopri5;
  double rtol = 1e-5;
  double atol = 1e-5;
  long max_steps = 10000;
  double safety = 0.9;
  double min_factor = 0.2;
  double max_factor = 10.0;
  /// Number of equal steps per output interval. Required for rk4_fixed; for
  /// dopri5 a positive value forces acceptance of every step.
  long fixed_step_count = 0;

  /// rtol = atol = g, the single-tolerance convention used by gates.
  static SolverConfig with_tolerance(double g);
  static SolverConfig rk4(long steps);
  void validate() const;
};

struct SolveStats {
  long nfe = 0;
  long accepted_steps = 0;
  long rejected_steps = 0;

  SolveStats& operator+=(const SolveStats& o) {
    nfe += o.nfe;
    accepted_steps += o.accepted_steps;
    rejected_steps += o.rejected_steps;
    return *this;
  }
};

/// Solver gave up (step budget exhausted or step size underflow). Carries the
/// partial accounting and, when raised from a flow, the layer index.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, SolveStats stats, int layer = -1)
      : Error(what), stats_(stats), layer_(layer) {}
  const SolveStats& stats() const { return stats_; }
  int layer() const { return layer_; }

 private:
  SolveStats stats_;
  int layer_;
};

/// Dormand-Prince 5(4) coefficients.
struct ButcherTableau {
  std::array<double, 7> c;
  std::array<std::array<double, 7>, 7> a;
  std::array<double, 7> b;      // 5th order (propagated)
  std::array<double, 7> b_hat;  // embedded 4th order
};

const ButcherTableau& dormand_prince();

/// Right-hand side f(y, t). Calls must record on the same tape as y.
using Dynamics = std::function<Var(const Var& y, double t)>;

struct SolveResult {
  Var y;
  SolveStats stats;
};

struct GridSolveResult {
  std::vector<Var> ys;  // one state per requested time, ys[0] is y0
  SolveStats stats;
};

/// Integrates y' = f(y, t) from t0 to t1 (t0 < t1). Accepted steps are recorded
/// on the tape, so the result is differentiable w.r.t. y0 and parameters;
/// rejected attempts stay on the tape unreachable and only cost NFE.
SolveResult integrate(const Dynamics& f, const Var& y0, double t0, double t1, const SolverConfig& cfg);

/// Integrates through strictly increasing output times, carrying the step
/// size and the FSAL stage across outputs. Steps are clipped to land on each
/// requested time.
GridSolveResult integrate_grid(const Dynamics& f, const Var& y0, std::span<const double> times,
                               const SolverConfig& cfg);

/// sqrt(mean_i (err_i / (atol + rtol * max(|y0_i|, |y1_i|)))^2)
double error_norm(std::span<const double> err, std::span<const double> y0, std::span<const double> y1, double atol,
                  double rtol);

/// h * clamp(safety * err_norm^(-1/5), min_factor, max_factor).
double next_step_size(double h, double err_norm, const SolverConfig& cfg);

struct InitialStep {
  double h = 0.0;
  Var f0;
  long nfe = 0;
};

/// Hairer's starting step heuristic refined by one Euler trial step, capped to
/// (0, t1 - t0]. A vanishing derivative falls back to (t1 - t0) / 100.
InitialStep initial_step(const Dynamics& f, const Var& y0, double t0, double t1, const SolverConfig& cfg);
double initial_step_size(const Dynamics& f, const Var& y0, double t0, double t1, const SolverConfig& cfg);

}  // namespace infocnf
