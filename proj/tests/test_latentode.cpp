#include <doctest.h>

#include <cmath>
#include <numbers>

#include "infocnf/latentode.hpp"

using namespace infocnf;

namespace {

SpiralCorpus small_corpus() {
  SpiralSpec spec;
  spec.n_curves = 4;
  spec.n_points = 120;
  spec.window = 20;
  spec.reserve = 10;
  return gen_spiral_corpus(spec, 3);
}

LatentOdeSpec baseline_spec() {
  LatentOdeSpec s;
  s.partitioned = false;
  return s;
}

}  // namespace

TEST_SUITE("latentode") {
  TEST_CASE("zero weights encode to the standard normal") {
    const LatentOdeModel m(baseline_spec());
    const SpiralCorpus c = small_corpus();
    const std::vector<std::size_t> idx{0, 1};
    const SequenceBatch b = window_batch(c, idx);
    Tape tape(&m.params());
    const auto q = m.encode(tape, b.steps);
    CHECK(max_abs(q.mu.value()) == 0.0);
    CHECK(max_abs(q.log_sigma.value()) == 0.0);
  }

  TEST_CASE("encoder is sensitive to observation order") {
    LatentOdeModel m(baseline_spec());
    Rng rng(1);
    m.init_random(rng);
    const SpiralCorpus c = small_corpus();
    const std::vector<std::size_t> idx{0};
    const SequenceBatch b = window_batch(c, idx);
    std::vector<Tensor> reversed(b.steps.rbegin(), b.steps.rend());
    Tape tape(&m.params());
    const Tensor forward = m.encode(tape, b.steps).mu.value();
    const Tensor backward = m.encode(tape, reversed).mu.value();
    const Tensor again = m.encode(tape, b.steps).mu.value();
    CHECK(max_abs_diff(forward, backward) > 1e-6);
    CHECK(forward == again);
  }

  TEST_CASE("KL vanishes when the posterior is the prior") {
    Tape tape;
    const Var mu = tape.constant(Tensor::matrix(1, 3, {0.2, -1, 3}));
    const Var ls = tape.constant(Tensor::matrix(1, 3, {0.1, 0.0, -0.7}));
    CHECK(max_abs(gaussian_kl(mu, ls, mu, ls).value()) == 0.0);
    const Var zero = tape.constant(Tensor::zeros(1, 1));
    const Var one = tape.constant(Tensor::scalar(1.0));
    // KL(N(1, 1) || N(0, 1)) = 1/2.
    CHECK(gaussian_kl(one, zero, zero, zero).value().item() == doctest::Approx(0.5).epsilon(1e-15));
  }

  TEST_CASE("perfect reconstruction gives the Gaussian normalizer per point") {
    const LatentOdeModel m(baseline_spec());
    SequenceBatch b;
    b.times = {0.0, 0.1, 0.2, 0.3};
    b.steps.assign(4, Tensor::zeros(2, 2));
    b.systems.resize(2);
    Tape tape(&m.params());
    const ElboResult r = elbo(tape, m, b, SolverConfig::with_tolerance(1e-6), nullptr);
    const double sigma = m.spec().sigma_obs;
    CHECK(r.recon.value().item() ==
          doctest::Approx(4 * -std::log(2 * std::numbers::pi * sigma * sigma)).epsilon(1e-13));
    CHECK(r.kl.value().item() == 0.0);
  }

  TEST_CASE("untrained extrapolation is finite") {
    LatentOdeModel m(LatentOdeSpec{});
    Rng rng(2);
    m.init_random(rng);
    const SpiralCorpus c = small_corpus();
    const std::vector<std::size_t> idx{0, 1, 2};
    const SequenceBatch prefix = window_batch(c, idx);
    const SequenceBatch future = future_batch(c, idx, 10);
    const Extrapolation e = extrapolate(m, prefix, future.times, SolverConfig::with_tolerance(1e-4), &future);
    REQUIRE(e.points.size() == 10);
    for (const auto& p : e.points) CHECK(p.all_finite());
    CHECK(std::isfinite(e.mse));
  }

  TEST_CASE("future times continue the window grid") {
    const SpiralCorpus c = small_corpus();
    const std::vector<std::size_t> idx{1};
    const SequenceBatch w = window_batch(c, idx), f = future_batch(c, idx, 5);
    const double dt = w.times[1] - w.times[0];
    CHECK(w.times.front() == 0.0);
    CHECK(f.times.front() == doctest::Approx(w.times.back() + dt).epsilon(1e-12));
  }

  TEST_CASE("label features") {
    const std::vector<SpiralSystem> s{{1.08, 0.22, SpiralDirection::clockwise}};
    const Tensor f = spiral_label_features(s);
    CHECK(f == Tensor::matrix(1, 4, {(1.08 - 1.0) / 0.08, (0.22 - 0.25) / 0.03, 1.0, 0.0}));
  }

  TEST_CASE("only the partitioned model carries conditioning parameters") {
    CHECK(LatentOdeModel(baseline_spec()).conditioning_parameter_count() == 0);
    CHECK(LatentOdeModel(LatentOdeSpec{}).conditioning_parameter_count() > 0);
  }

  TEST_CASE("trajectory MSE") {
    const std::vector<Tensor> a{Tensor::matrix(1, 2, {1, 2})}, b{Tensor::matrix(1, 2, {0, 0})};
    CHECK(trajectory_mse(a, b) == 2.5);
  }
}
