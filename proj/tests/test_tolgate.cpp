#include <doctest.h>

#include <cmath>

#include "infocnf/tolgate.hpp"

using namespace infocnf;

namespace {

// Plain values of one draw; the tape does not outlive the helper.
struct Drawn {
  double mu, sigma, pre_clamp, tolerance, log_prob;
};

Drawn draw_with(const GateConfig& cfg, std::uint64_t seed = 1) {
  ParamStore store;
  GatePolicy gate(store, 2, 1, cfg);
  Rng rng(seed);
  gate.init(store, rng);
  Tape tape(&store);
  const GateDraw d = gate.sample(tape, 0, Tensor::matrix(1, 2, {0.3, -0.4}), rng);
  return {d.mu, d.sigma, d.pre_clamp, d.tolerance, d.log_prob.value().item()};
}

}  // namespace

TEST_SUITE("tolgate") {
  TEST_CASE("vanishing sigma returns the mean tolerance") {
    GateConfig cfg;
    cfg.init_log10_tol = -5.0;
    cfg.init_sigma = 1e-300;
    const Drawn d = draw_with(cfg);
    CHECK(d.tolerance == doctest::Approx(1e-5).epsilon(1e-12));
  }

  TEST_CASE("samples below the range clamp to 1e-8") {
    GateConfig cfg;
    cfg.init_log10_tol = -9.3;
    cfg.init_sigma = 1e-300;
    const Drawn d = draw_with(cfg);
    CHECK(d.pre_clamp == doctest::Approx(-9.3));
    CHECK(d.tolerance == doctest::Approx(1e-8).epsilon(1e-14));
    CHECK(clamp_log10_tolerance(0.5, cfg) == -1.0);
    CHECK(clamp_log10_tolerance(-3.0, cfg) == -3.0);
  }

  TEST_CASE("sampling is seeded") {
    const Drawn a = draw_with(GateConfig{}, 9), b = draw_with(GateConfig{}, 9);
    CHECK(a.pre_clamp == b.pre_clamp);
    CHECK(a.log_prob == b.log_prob);
  }

  TEST_CASE("log probability of the draw") {
    const Drawn d = draw_with(GateConfig{}, 4);
    const double u = (d.pre_clamp - d.mu) / d.sigma;
    const double expected = -0.5 * u * u - std::log(d.sigma) - 0.5 * std::log(2 * M_PI);
    CHECK(d.log_prob == doctest::Approx(expected).epsilon(1e-13));
  }

  TEST_CASE("returns") {
    const std::vector<double> r1{-10.0};
    CHECK(compute_returns(2.0, r1, 0.1) == std::vector<double>{-3.0});
    const std::vector<double> r2{-100.0, -200.0};
    const auto r = compute_returns(1.0, r2, 0.1);
    CHECK(r[0] == doctest::Approx(-16.0));
    CHECK(r[1] == doctest::Approx(-11.0));
    const std::vector<double> r3{-100.0, -200.0};
    const auto big = compute_returns(1.0, r3, 0.2);
    CHECK(big[0] == doctest::Approx(-31.0));
    CHECK(big[1] == doctest::Approx(-21.0));
  }

  TEST_CASE("alpha calibration") {
    const std::vector<double> rewards{-20.0, -30.0};
    CHECK(calibrate_alpha(4.0, rewards) == doctest::Approx(0.1 * 4.0 * 2 / 50.0));
  }

  TEST_CASE("feature summary") {
    CHECK(gate_feature_summary(Tensor::matrix(3, 2, {1, 2, 1, 2, 1, 2})) == Tensor::matrix(1, 2, {1, 2}));
    CHECK(max_abs(gate_feature_summary(Tensor::matrix(2, 2, {0.5, -1, -0.5, 1}))) == 0.0);
  }

  TEST_CASE("baseline tracks returns") {
    ReturnBaseline b(2, 0.5, true);
    CHECK(b.value(0) == 0.0);
    const std::vector<double> r1{-10.0, -4.0};
    b.update(r1);
    CHECK(b.value(0) == -10.0);
    const std::vector<double> r2{-20.0, -4.0};
    b.update(r2);
    CHECK(b.value(0) == -15.0);
    CHECK(b.value(1) == -4.0);
    ReturnBaseline off(2, 0.5, false);
    off.update(r1);
    CHECK(off.value(0) == 0.0);
  }

  TEST_CASE("surrogate separates loss and policy gradients") {
    ParamStore store;
    const ParamId w = store.add("flow.w", {1, 1}, 1.5);
    GatePolicy gate(store, 2, 1, GateConfig{});
    Rng rng(5);
    gate.init(store, rng);

    Tape t1(&store);
    const Var loss1 = square(t1.param(w));
    Rng r1(6);
    const std::vector<GateDraw> draws{gate.sample(t1, 0, Tensor::matrix(1, 2, {0.1, 0.2}), r1)};
    const std::vector<double> returns{-7.0}, baseline{-2.0};
    const auto g_sur = t1.backward(reinforce_surrogate(loss1, draws, returns, baseline));

    Tape t2(&store);
    const auto g_loss = t2.backward(square(t2.param(w)));
    const std::size_t off = store.entry(w).offset;
    CHECK(g_sur[off] == g_loss[off]);

    const std::vector<double> zero_returns{0.0}, zero_baseline{0.0};
    Tape t3(&store);
    const Var loss3 = square(t3.param(w));
    Rng r3(6);
    const std::vector<GateDraw> draws3{gate.sample(t3, 0, Tensor::matrix(1, 2, {0.1, 0.2}), r3)};
    CHECK(t3.backward(reinforce_surrogate(loss3, draws3, zero_returns, zero_baseline)) == g_loss);
  }
}
