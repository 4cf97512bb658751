#include <doctest.h>

#include <cmath>

#include "infocnf/flow.hpp"

using namespace infocnf;

namespace {

// f(z, t) = z W with the time row zeroed.
Mlp linear_net(ParamStore& store, const std::vector<double>& w_without_time, std::size_t d) {
  Mlp f(store, "lin", {d + 1, d}, Activation::identity);
  std::vector<double> w = w_without_time;
  w.resize((d + 1) * d, 0.0);
  store.set(f.weight(0), Tensor::matrix(d + 1, d, w));
  return f;
}

}  // namespace

TEST_SUITE("flow") {
  TEST_CASE("exact trace of a linear map") {
    ParamStore store;
    // A = [[1, 2], [3, 4]] acting on columns is W = A^T in the row convention.
    const Mlp f = linear_net(store, {1, 3, 2, 4}, 2);
    Tape tape(&store);
    const Tensor tr = trace_exact(tape, f, tape.constant(Tensor::matrix(2, 2, {0.1, 0.2, -3, 4})), 0.5).value();
    CHECK(tr[0] == 5.0);
    CHECK(tr[1] == 5.0);
  }

  TEST_CASE("constant dynamics have zero trace") {
    ParamStore store;
    Mlp f(store, "c", {3, 2}, Activation::identity);
    store.set(f.bias(0), Tensor::matrix(1, 2, {0.7, -1.1}));
    Tape tape(&store);
    CHECK(max_abs(trace_exact(tape, f, tape.constant(Tensor::filled(3, 2, 0.4)), 0.2).value()) == 0.0);
  }

  TEST_CASE("hutchinson on a diagonal jacobian is exact") {
    ParamStore store;
    const Mlp f = linear_net(store, {1, 0, 0, 2}, 2);
    Rng rng(3);
    Tape tape(&store);
    const Tensor eps = rademacher_probe(64, 2, rng);
    Tensor neg = eps;
    for (auto& v : neg.vec()) v = -v;
    const Var z = tape.constant(Tensor::filled(64, 2, 0.5));
    const Tensor est = trace_hutchinson(tape, f, z, 0.0, tape.constant(eps)).value();
    const Tensor est_neg = trace_hutchinson(tape, f, z, 0.0, tape.constant(neg)).value();
    for (std::size_t i = 0; i < 64; ++i) CHECK(est[i] == 3.0);
    CHECK(est == est_neg);
  }

  TEST_CASE("probe sign symmetry on a nonlinear network") {
    ParamStore store;
    Mlp f(store, "f", {3, 8, 2}, Activation::softplus);
    Rng rng(4);
    f.init_random(store, rng);
    Tape tape(&store);
    const Tensor eps = rademacher_probe(10, 2, rng);
    Tensor neg = eps;
    for (auto& v : neg.vec()) v = -v;
    const Var z = tape.constant(Tensor::filled(10, 2, -0.3));
    const Tensor a = trace_hutchinson(tape, f, z, 0.1, tape.constant(eps)).value();
    const Tensor b = trace_hutchinson(tape, f, z, 0.1, tape.constant(neg)).value();
    CHECK(max_abs_diff(a, b) <= 1e-15);
  }

  TEST_CASE("identity flow") {
    ParamStore store;
    FlowStack stack(store, 2, 3, {8, 8});
    const Tensor x = Tensor::matrix(2, 2, {0.3, -1, 2, 0.5});
    Tape tape(&store);
    FlowOptions fo;
    const DensityResult d = forward_density(tape, stack, tape.constant(x), fo);
    CHECK(d.z.value() == x);
    CHECK(max_abs(d.delta_logp.value()) == 0.0);
    CHECK(d.stats.size() == 3);
    CHECK(sample_flow(store, stack, x, SolverConfig{}) == x);
  }

  TEST_CASE("constant-trace linear flow") {
    ParamStore store;
    FlowStack stack(store, 2, 1, {}, Activation::identity);
    store.set(stack.layer(0).dynamics.weight(0), Tensor::matrix(3, 2, {1, 3, 2, 4, 0, 0}));
    Tape tape(&store);
    FlowOptions fo;
    fo.solver = SolverConfig::with_tolerance(1e-9);
    const DensityResult d = forward_density(tape, stack, tape.constant(Tensor::matrix(1, 2, {0.01, -0.02})), fo);
    CHECK(d.delta_logp.value().item() == doctest::Approx(-5.0).epsilon(1e-8));
  }

  TEST_CASE("sampling a scalar linear flow") {
    ParamStore store;
    FlowStack stack(store, 1, 1, {}, Activation::identity);
    const double a = 0.7;
    store.set(stack.layer(0).dynamics.weight(0), Tensor::matrix(2, 1, {a, 0.0}));
    const Tensor z = Tensor::column(std::vector<double>{-1.0, 0.5, 2.0});
    const Tensor x = sample_flow(store, stack, z, SolverConfig::with_tolerance(1e-9));
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(x[i] - z[i] * std::exp(-a)) < 1e-8);
  }

  TEST_CASE("round trip through a random flow") {
    ParamStore store;
    FlowStack stack(store, 2, 2, {16, 16});
    Rng rng(5);
    stack.init_random(store, rng);
    Tensor x = Tensor::zeros(20, 2);
    for (auto& v : x.vec()) v = rng.normal();
    const SolverConfig solver = SolverConfig::with_tolerance(1e-6);
    Tape tape(&store);
    FlowOptions fo;
    fo.solver = solver;
    const Tensor z = forward_density(tape, stack, tape.constant(x), fo).z.value();
    const Tensor back = sample_flow(store, stack, z, solver);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(back[i] - x[i]) <= 10 * (1e-6 + 1e-6 * std::abs(x[i])));
  }

  TEST_CASE("hutchinson mode needs a probe stream") {
    ParamStore store;
    FlowStack stack(store, 2, 1, {4});
    Tape tape(&store);
    FlowOptions fo;
    fo.trace = TraceMode::hutchinson;
    CHECK_THROWS_AS(forward_density(tape, stack, tape.constant(Tensor::zeros(2, 2)), fo), UsageError);
  }

  TEST_CASE("standard normal log density") {
    Tape tape;
    const double v = standard_normal_log_density(tape.constant(Tensor::zeros(1, 2))).value().item();
    CHECK(v == doctest::Approx(-std::log(2 * M_PI)).epsilon(1e-15));
  }
}
