#include <doctest.h>

#include <cmath>
#include <numbers>

#include "infocnf/odesolve.hpp"

using namespace infocnf;

namespace {

Dynamics linear(double a) {
  return [a](const Var& y, double) { return scale(y, a); };
}

}  // namespace

TEST_SUITE("odesolve") {
  TEST_CASE("exponential growth") {
    Tape tape;
    const auto r = integrate(linear(1.0), tape.constant(Tensor::scalar(1.0)), 0.0, 1.0, SolverConfig::with_tolerance(1e-8));
    CHECK(std::abs(r.y.value().item() - std::numbers::e) <= 1e-7);
    CHECK(r.stats.nfe > 0);
  }

  TEST_CASE("constant solution") {
    Tape tape;
    const Tensor y0 = Tensor::matrix(1, 3, {1.5, -2.0, 0.25});
    const auto r = integrate(linear(0.0), tape.constant(y0), 0.0, 1.0, SolverConfig::with_tolerance(1e-6));
    CHECK(r.y.value() == y0);
    CHECK(r.stats.rejected_steps == 0);
    CHECK(r.stats.accepted_steps <= 3);  // h0 = 1/100, then growth by the max factor
  }

  TEST_CASE("harmonic oscillator returns to its start") {
    const Dynamics f = [](const Var& y, double) {
      return concat_cols(slice_cols(y, 1, 2), scale(slice_cols(y, 0, 1), -1.0));
    };
    Tape tape;
    const auto r = integrate(f, tape.constant(Tensor::matrix(1, 2, {1.0, 0.0})), 0.0, 2 * std::numbers::pi,
                             SolverConfig::with_tolerance(1e-10));
    CHECK(std::abs(r.y.value()[0] - 1.0) <= 1e-8);
    CHECK(std::abs(r.y.value()[1]) <= 1e-8);
  }

  TEST_CASE("error norm") {
    const std::vector<double> zero(4, 0.0), y(4, 0.0), err(4, 1e-6);
    CHECK(error_norm(zero, y, y, 1e-6, 1e-3) == 0.0);
    CHECK(error_norm(err, y, y, 1e-6, 0.37) == doctest::Approx(1.0).epsilon(1e-15));
  }

  TEST_CASE("step size update") {
    SolverConfig cfg;
    CHECK(next_step_size(0.1, 1.0, cfg) == doctest::Approx(0.09).epsilon(1e-15));
    CHECK(next_step_size(0.1, 1e10, cfg) == doctest::Approx(0.02).epsilon(1e-15));
    CHECK(next_step_size(0.1, std::pow(0.9 / 2.0, 5), cfg) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(next_step_size(0.1, 0.0, cfg) == doctest::Approx(1.0).epsilon(1e-15));
  }

  TEST_CASE("initial step heuristic") {
    const SolverConfig cfg = SolverConfig::with_tolerance(1e-6);
    Tape tape;
    const Var y0 = tape.constant(Tensor::scalar(1.0));
    CHECK(initial_step_size(linear(0.0), y0, 0.0, 2.0, cfg) == doctest::Approx(0.02));
    const double h = initial_step_size(linear(1.0), y0, 0.0, 1.0, cfg);
    CHECK(h > 0.0);
    CHECK(h <= 1.0);
    CHECK(initial_step_size(linear(-50.0), y0, 0.0, 1.0, cfg) < initial_step_size(linear(-0.5), y0, 0.0, 1.0, cfg));
  }

  TEST_CASE("fixed-step rk4 costs four evaluations per step") {
    Tape tape;
    const auto r = integrate(linear(1.0), tape.constant(Tensor::scalar(1.0)), 0.0, 1.0, SolverConfig::rk4(10));
    CHECK(r.stats.nfe == 40);
    CHECK(r.stats.accepted_steps == 10);
    CHECK(std::abs(r.y.value().item() - std::numbers::e) < 1e-5);
  }

  TEST_CASE("step budget raises a divergence error") {
    SolverConfig cfg = SolverConfig::with_tolerance(1e-12);
    cfg.max_steps = 3;
    Tape tape;
    CHECK_THROWS_AS(integrate(linear(5.0), tape.constant(Tensor::scalar(1.0)), 0.0, 5.0, cfg), DivergenceError);
  }

  TEST_CASE("grid output hits every requested time") {
    const std::vector<double> times{0.0, 0.3, 0.9, 1.0};
    Tape tape;
    const auto r = integrate_grid(linear(-1.0), tape.constant(Tensor::scalar(2.0)), times,
                                  SolverConfig::with_tolerance(1e-9));
    REQUIRE(r.ys.size() == times.size());
    for (std::size_t k = 0; k < times.size(); ++k) {
      CHECK(std::abs(r.ys[k].value().item() - 2.0 * std::exp(-times[k])) < 1e-8);
    }
  }

  TEST_CASE("tighter tolerance never costs fewer evaluations") {
    long prev = 0;
    for (double tol : {1e-3, 1e-5, 1e-7, 1e-9}) {
      Tape tape;
      const auto r = integrate(linear(1.5), tape.constant(Tensor::scalar(1.0)), 0.0, 1.0, SolverConfig::with_tolerance(tol));
      CHECK(r.stats.nfe >= prev);
      prev = r.stats.nfe;
    }
  }

  TEST_CASE("solver config validation") {
    SolverConfig cfg;
    cfg.method = SolverMethod::rk4_fixed;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK(parse_solver_method("dopri5") == SolverMethod::dopri5);
    CHECK_THROWS(parse_solver_method("euler"));
  }
}
