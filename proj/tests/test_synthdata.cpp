#include <doctest.h>

#include <cmath>
#include <numbers>

#include "infocnf/errors.hpp"
#include "infocnf/synthdata.hpp"

using namespace infocnf;

TEST_SUITE("synthdata") {
  TEST_CASE("single Gaussian density at the mean") {
    MixtureSpec spec;
    spec.weights = {1.0};
    spec.means = {0.0};
    spec.stddevs = {1.0};
    CHECK(spec.density(0.0) == doctest::Approx(1.0 / std::sqrt(2 * std::numbers::pi)).epsilon(1e-15));
  }

  TEST_CASE("mixture density sums to one") {
    const MixtureSpec spec;
    double area = 0.0;
    const double h = 1e-3;
    for (int i = 0; i < 20000; ++i) area += spec.density(-10.0 + (i + 0.5) * h) * h;
    CHECK(std::abs(area - 1.0) <= 1e-6);
  }

  TEST_CASE("mixture validation") {
    MixtureSpec bad;
    bad.weights = {0.5, 0.6, -0.1};
    CHECK_THROWS_AS(bad.validate(), UsageError);
    MixtureSpec neg;
    neg.stddevs = {0.4, 0.0, 0.4};
    CHECK_THROWS_AS(gen_1d_mixture(neg, 10, 1), UsageError);
    CHECK_THROWS_AS(gen_1d_mixture(MixtureSpec{}, 0, 1), UsageError);
  }

  TEST_CASE("seeded generation") {
    CHECK(gen_1d_mixture(MixtureSpec{}, 100, 7).x == gen_1d_mixture(MixtureSpec{}, 100, 7).x);
    CHECK(!(gen_1d_mixture(MixtureSpec{}, 100, 7).x == gen_1d_mixture(MixtureSpec{}, 100, 8).x));
    const Dataset a = gen_2d_labeled(Labeled2dSpec{}, 3), b = gen_2d_labeled(Labeled2dSpec{}, 3);
    CHECK(a.x == b.x);
    CHECK(a.labels == b.labels);
  }

  TEST_CASE("labels and separation") {
    Labeled2dSpec spec;
    spec.samples_per_class = 250;
    const Dataset d = gen_2d_labeled(spec, 5);
    REQUIRE(d.size() == 1000);
    std::vector<int> counts(4, 0);
    std::size_t nearest_ok = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      ++counts[static_cast<std::size_t>(d.labels[i])];
      int best = -1;
      double best_d = 1e300;
      for (int k = 0; k < 4; ++k) {
        const double dx = d.x.at(i, 0) - spec.means[k][0], dy = d.x.at(i, 1) - spec.means[k][1];
        if (dx * dx + dy * dy < best_d) best_d = dx * dx + dy * dy, best = k;
      }
      nearest_ok += best == d.labels[i];
    }
    for (int c : counts) CHECK(c == 250);
    CHECK(nearest_ok >= 990);
  }

  TEST_CASE("class log density") {
    const Labeled2dSpec spec;
    const double at_mean = spec.class_log_density(0, -2.0, -2.0);
    CHECK(at_mean == doctest::Approx(-std::log(2 * std::numbers::pi * 0.25)).epsilon(1e-14));
  }

  TEST_CASE("spiral formulas") {
    SpiralSystem ccw;
    const auto p0 = gen_spiral(ccw, 1e-12);
    CHECK(p0[0] == doctest::Approx(6.0).epsilon(1e-10));
    CHECK(std::abs(p0[1]) < 1e-10);
    SpiralSystem cw{1.0, 0.25, SpiralDirection::clockwise};
    const auto p = gen_spiral(cw, 50.0);
    CHECK(p[0] == doctest::Approx(-3.7937).epsilon(1e-4));
    CHECK(p[1] == doctest::Approx(-0.3279).epsilon(1e-3));
    CHECK_THROWS_AS(gen_spiral(cw, 0.0), DomainError);
  }

  TEST_CASE("counter-clockwise radius grows with t") {
    const SpiralSystem s;
    double prev = 0.0;
    for (double t = 0.5; t < 18.0; t += 0.5) {
      const auto p = gen_spiral(s, t);
      const double r = std::hypot(p[0] - 5.0, p[1]);
      CHECK(r > prev);
      prev = r;
    }
  }

  TEST_CASE("spiral corpus layout") {
    SpiralSpec spec;
    spec.n_curves = 100;
    const SpiralCorpus c = gen_spiral_corpus(spec, 9);
    REQUIRE(c.curves.size() == 100);
    CHECK(c.times.size() == spec.n_points);
    std::size_t cw = 0;
    for (const auto& curve : c.curves) {
      cw += curve.system.direction == SpiralDirection::clockwise;
      CHECK(curve.window.rows() == spec.window);
      CHECK(curve.window_start + spec.window + spec.reserve <= spec.n_points);
      const auto wt = c.window_times(curve);
      REQUIRE(wt.size() == spec.window);
      for (std::size_t k = 1; k < wt.size(); ++k) {
        CHECK(wt[k] - wt[k - 1] == doctest::Approx(c.times[1] - c.times[0]).epsilon(1e-12));
      }
    }
    CHECK(cw == 50);
  }

  TEST_CASE("odd corpus size is rejected") {
    SpiralSpec spec;
    spec.n_curves = 7;
    CHECK_THROWS_AS(gen_spiral_corpus(spec, 1), UsageError);
  }
}
