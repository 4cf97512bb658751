#include <doctest.h>

#include <cmath>
#include <numbers>

#include "infocnf/condition.hpp"
#include "infocnf/synthdata.hpp"

using namespace infocnf;

namespace {

CnfSpec conditional_spec(std::size_t dim, std::size_t classes, std::size_t d_y) {
  CnfSpec s;
  s.dim = dim;
  s.num_layers = 1;
  s.hidden = {8, 8};
  s.num_classes = classes;
  s.d_y = d_y;
  return s;
}

LossOptions quick_loss(double beta) {
  LossOptions lo;
  lo.beta = beta;
  lo.flow.solver = SolverConfig::with_tolerance(1e-5);
  return lo;
}

}  // namespace

TEST_SUITE("condition") {
  TEST_CASE("log prior at the mean") {
    const CnfModel m = build_cnf_skeleton(conditional_spec(4, 3, 2));
    Tape tape(&m.params);
    const std::vector<int> labels{1};
    const double lp =
        conditional_log_prior(tape, tape.constant(Tensor::zeros(1, 4)), labels, m.partition, m.prior).value().item();
    CHECK(lp == doctest::Approx(-2.0 * std::log(2 * std::numbers::pi)).epsilon(1e-14));
  }

  TEST_CASE("doubling sigma at the mean lowers the log prior by d_y ln 2") {
    CnfModel m = build_cnf_skeleton(conditional_spec(4, 3, 2));
    const std::vector<int> labels{0};
    auto lp = [&]() {
      Tape tape(&m.params);
      return conditional_log_prior(tape, tape.constant(Tensor::zeros(1, 4)), labels, m.partition, m.prior)
          .value()
          .item();
    };
    const double before = lp();
    m.params.set(m.prior.map().bias(), Tensor::matrix(1, 4, {0, 0, std::numbers::ln2, std::numbers::ln2}));
    CHECK(before - lp() == doctest::Approx(2 * std::numbers::ln2).epsilon(1e-14));
  }

  TEST_CASE("beta zero leaves only the NLL") {
    Rng rng(1);
    const CnfModel m = build_cnf_model(conditional_spec(2, 4, 1), rng);
    const Dataset d = gen_2d_labeled(Labeled2dSpec{}, 3).subset(std::vector<std::size_t>{0, 600, 1200, 1900});
    Tape tape(&m.params);
    const CnfLoss l = infocnf_loss(tape, m, d.x, d.labels, quick_loss(0.0));
    CHECK(l.objective.value().item() == l.nll.value().item());
  }

  TEST_CASE("zero-initialized classifier gives ln L cross-entropy") {
    Rng rng(2);
    const CnfModel m = build_cnf_model(conditional_spec(2, 4, 1), rng);
    const Dataset d = gen_2d_labeled(Labeled2dSpec{}, 3).subset(std::vector<std::size_t>{5, 505, 1005, 1505});
    Tape tape(&m.params);
    const CnfLoss l = infocnf_loss(tape, m, d.x, d.labels, quick_loss(1.0));
    CHECK(l.xent.value().item() == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  }

  TEST_CASE("identity flow NLL on standard normal data is the Gaussian entropy") {
    const CnfModel m = build_cnf_skeleton(conditional_spec(2, 2, 1));
    Rng rng(3);
    const std::size_t n = 20000;
    Tensor x = Tensor::zeros(n, 2);
    for (auto& v : x.vec()) v = rng.normal();
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % 2);
    Tape tape(&m.params);
    const CnfLoss l = infocnf_loss(tape, m, x, labels, quick_loss(1.0));
    std::vector<double> per(l.log_px.value().vec());
    double mean = 0.0, var = 0.0;
    for (double v : per) mean -= v / n;
    for (double v : per) var += (-v - mean) * (-v - mean) / (n - 1);
    const double expected = std::log(2 * std::numbers::pi) + 1.0;
    CHECK(std::abs(mean - expected) <= 3.0 * std::sqrt(var / n));
    CHECK(l.nll.value().item() == doctest::Approx(mean).epsilon(1e-12));
  }

  TEST_CASE("full partition: InfoCNF and CCNF losses coincide") {
    Rng rng(4);
    const CnfModel m = build_cnf_model(conditional_spec(2, 4, 2), rng);
    const Dataset d = gen_2d_labeled(Labeled2dSpec{}, 5).subset(std::vector<std::size_t>{1, 2, 700, 1800});
    Tape a(&m.params), b(&m.params);
    CHECK(infocnf_loss(a, m, d.x, d.labels, quick_loss(1.0)).objective.value().item() ==
          ccnf_loss(b, m, d.x, d.labels, quick_loss(1.0)).objective.value().item());
  }

  TEST_CASE("CCNF requires the full partition") {
    Rng rng(5);
    const CnfModel m = build_cnf_model(conditional_spec(2, 2, 1), rng);
    Tape tape(&m.params);
    const std::vector<int> labels{0};
    CHECK_THROWS_AS(ccnf_loss(tape, m, Tensor::zeros(1, 2), labels, quick_loss(1.0)), UsageError);
  }

  TEST_CASE("CCNF conditioning costs more parameters") {
    for (std::size_t dim : {2, 4, 8}) {
      const CnfModel info = build_cnf_skeleton(conditional_spec(dim, 4, dim / 2));
      const CnfModel ccnf = build_cnf_skeleton(conditional_spec(dim, 4, dim));
      CHECK(info.conditioning_parameter_count() < ccnf.conditioning_parameter_count());
    }
    // L = 4, d_y = 1: prior 4 * 2 + 2, classifier 1 * 4 + 4.
    CHECK(build_cnf_skeleton(conditional_spec(2, 4, 1)).conditioning_parameter_count() == 18);
  }

  TEST_CASE("losses are finite on random 2-class data") {
    Rng rng(6);
    Labeled2dSpec spec;
    spec.means = {{-1, 0}, {1, 0}};
    spec.stddevs = {{0.5, 0.5}, {0.5, 0.5}};
    spec.samples_per_class = 8;
    const Dataset d = gen_2d_labeled(spec, 7);
    const CnfModel info = build_cnf_model(conditional_spec(2, 2, 1), rng);
    const CnfModel ccnf = build_cnf_model(conditional_spec(2, 2, 2), rng);
    Tape a(&info.params), b(&ccnf.params);
    CHECK(std::isfinite(infocnf_loss(a, info, d.x, d.labels, quick_loss(1.0)).objective.value().item()));
    CHECK(std::isfinite(ccnf_loss(b, ccnf, d.x, d.labels, quick_loss(1.0)).objective.value().item()));
  }

  TEST_CASE("marginal NLL equals the conditional NLL when classes coincide") {
    Rng rng(8);
    const CnfModel m = build_cnf_model(conditional_spec(2, 3, 1), rng);
    const Tensor x = Tensor::matrix(2, 2, {0.5, -0.5, 1.5, 2.0});
    Tape tape(&m.params);
    const Tensor marg = marginal_nll(tape, m, x, {}, quick_loss(1.0).flow).value();
    const std::vector<int> labels{2, 0};
    const CnfLoss l = infocnf_loss(tape, m, x, labels, quick_loss(1.0));
    for (std::size_t i = 0; i < 2; ++i) CHECK(marg[i] == doctest::Approx(-l.log_px.value()[i]).epsilon(1e-13));
  }

  TEST_CASE("marginal NLL against a hand logsumexp") {
    Rng rng(9);
    CnfModel m = build_cnf_model(conditional_spec(2, 2, 1), rng);
    m.params.set(m.prior.map().weight(), Tensor::matrix(2, 2, {0.8, 0.1, -0.6, -0.2}));
    const Tensor x = Tensor::matrix(1, 2, {0.3, 0.4});
    const FlowOptions fo = quick_loss(1.0).flow;
    Tape tape(&m.params);
    const double marg = marginal_nll(tape, m, x, {}, fo).value().item();
    double lp[2];
    for (int y = 0; y < 2; ++y) {
      const std::vector<int> labels{y};
      lp[y] = infocnf_loss(tape, m, x, labels, quick_loss(1.0)).log_px.value().item();
    }
    const double hi = std::max(lp[0], lp[1]);
    const double expected = -(hi + std::log(0.5 * std::exp(lp[0] - hi) + 0.5 * std::exp(lp[1] - hi)));
    CHECK(marg == doctest::Approx(expected).epsilon(1e-12));
    CHECK(marg <= std::min(-lp[0], -lp[1]) + std::log(2.0) + 1e-12);
  }

  TEST_CASE("conditional sampling is seeded") {
    const CnfModel m = build_cnf_skeleton(conditional_spec(2, 2, 1));
    Rng a(10), b(10);
    CHECK(conditional_sample(m, 1, 50, a, SolverConfig{}) == conditional_sample(m, 1, 50, b, SolverConfig{}));
  }

  TEST_CASE("labels are validated") {
    const std::vector<int> bad{0, 3};
    CHECK_THROWS_AS(one_hot(bad, 3), UsageError);
    const std::vector<int> ok{2, 0};
    const Tensor oh = one_hot(ok, 3);
    CHECK(oh == Tensor::matrix(2, 3, {0, 0, 1, 1, 0, 0}));
  }

  TEST_CASE("partition validation") {
    CHECK_THROWS(LatentPartition{2, 0}.validate());
    CHECK_THROWS(LatentPartition{2, 3}.validate());
    CHECK_NOTHROW(LatentPartition{2, 2}.validate());
    CHECK(LatentPartition{5, 2}.d_u() == 3);
  }

  TEST_CASE("dropout is inert at evaluation and scales survivors in training") {
    ParamStore store;
    Classifier c(store, 4, 2, 0.5);
    store.set(c.map().weight(), Tensor::filled(4, 2, 1.0));
    Tape tape(&store);
    const Var z = tape.constant(Tensor::filled(1, 4, 1.0));
    CHECK(c.logits(tape, z, false, nullptr).value()[0] == 4.0);
    Rng rng(11);
    const double v = c.logits(tape, z, true, &rng).value()[0];
    CHECK(std::fmod(v, 2.0) == 0.0);
  }
}
