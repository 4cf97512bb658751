#include <doctest.h>

#include <cmath>
#include <numbers>

#include "infocnf/errors.hpp"
#include "infocnf/mlp.hpp"

using namespace infocnf;

TEST_SUITE("diffcore") {
  TEST_CASE("primitive values") {
    Tape tape;
    CHECK(softplus(tape.constant(Tensor::scalar(0.0))).value().item() == doctest::Approx(std::numbers::ln2).epsilon(1e-15));
    const std::vector<double> v{0.3, -1.2, 4.5};
    const Tensor out = matmul(tape.constant(Tensor::identity(3)), tape.constant(Tensor::column(v))).value();
    CHECK(out == Tensor::column(v));
    CHECK(logsumexp(tape.constant(Tensor::zeros(1, 2))).value().item() ==
          doctest::Approx(std::numbers::ln2).epsilon(1e-15));
  }

  TEST_CASE("softplus is stable for large arguments") {
    CHECK(softplus_value(800.0) == 800.0);
    CHECK(softplus_value(-800.0) >= 0.0);
    CHECK(std::isfinite(sigmoid_value(-800.0)));
  }

  TEST_CASE("backward on analytic roots") {
    ParamStore store;
    const ParamId theta = store.add("theta", {1, 1}, 3.0);
    Tape tape(&store);
    const auto g = tape.backward(square(tape.param(theta)));
    REQUIRE(g.size() == 1);
    CHECK(g[0] == 6.0);

    ParamStore s4;
    const ParamId p = s4.add("p", {1, 4}, 0.0);
    Tape t4(&s4);
    const auto g4 = t4.backward(sum(softplus(t4.param(p))));
    for (double x : g4) CHECK(x == doctest::Approx(0.5).epsilon(1e-15));
  }

  TEST_CASE("parameters off the path get exactly zero") {
    ParamStore store;
    const ParamId a = store.add("a", {1, 1}, 2.0);
    store.add("unused", {2, 2}, 1.0);
    Tape tape(&store);
    const auto g = tape.backward(mul(tape.param(a), tape.param(a)));
    CHECK(g.size() == 5);
    CHECK(g[0] == 4.0);
    for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] == 0.0);
  }

  TEST_CASE("shape errors name both operands") {
    Tape tape;
    const Var a = tape.constant(Tensor::zeros(2, 3));
    const Var b = tape.constant(Tensor::zeros(2, 3));
    CHECK_THROWS_AS(matmul(a, b), ShapeError);
    try {
      matmul(a, b);
    } catch (const ShapeError& e) {
      CHECK(std::string(e.what()).find("[2, 3]") != std::string::npos);
    }
  }

  TEST_CASE("jvp of a linear map") {
    ParamStore store;
    Mlp f(store, "f", {3, 2}, Activation::identity);
    // Row convention: out = [z, t] W, so W holds A transposed in its first two rows.
    store.set(f.weight(0), Tensor::matrix(3, 2, {1, 3, 2, 4, 0, 0}));
    Tape tape(&store);
    const Var z = tape.constant(Tensor::matrix(1, 2, {0.7, -0.2}));
    const Tensor jv = jvp(tape, f, z, 0.5, tape.constant(Tensor::matrix(1, 2, {1, 0}))).value();
    CHECK(jv[0] == 1.0);
    CHECK(jv[1] == 3.0);
  }

  TEST_CASE("jvp with a zero tangent is zero") {
    ParamStore store;
    Mlp f(store, "f", {3, 8, 2}, Activation::softplus);
    Rng rng(1);
    f.init_random(store, rng);
    Tape tape(&store);
    const Tensor jv = jvp(tape, f, tape.constant(Tensor::filled(4, 2, 0.3)), 0.1, tape.constant(Tensor::zeros(4, 2))).value();
    CHECK(max_abs(jv) == 0.0);
  }

  TEST_CASE("jvp and vjp are dual") {
    ParamStore store;
    Mlp f(store, "f", {4, 10, 3}, Activation::tanh);
    Rng rng(2);
    f.init_random(store, rng);
    Tensor z = Tensor::zeros(2, 3), u = z, v = z;
    for (std::size_t i = 0; i < z.size(); ++i) {
      z[i] = rng.normal();
      u[i] = rng.normal();
      v[i] = rng.normal();
    }
    Tape tape(&store);
    const Tensor jv = jvp(tape, f, tape.constant(z), 0.4, tape.constant(v)).value();
    const Tensor uj = vjp(store, f, z, 0.4, u);
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      a += u[i] * jv[i];
      b += uj[i] * v[i];
    }
    CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
  }

  TEST_CASE("random streams") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng c = Rng(42).split("x"), d = Rng(42).split("y");
    CHECK(c.next_u64() != d.next_u64());
    Rng e(7);
    double s = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const double r = e.rademacher();
      CHECK((r == 1.0 || r == -1.0));
      s += r;
    }
    CHECK(std::abs(s) < 200);
    for (int i = 0; i < 1000; ++i) {
      const double u = e.uniform();
      CHECK((u >= 0.0 && u < 1.0));
    }
  }

  TEST_CASE("parameter store registry") {
    ParamStore store;
    const ParamId a = store.add("cond.a", {2, 3});
    store.add("flow.b", {1, 3});
    CHECK(store.size() == 9);
    CHECK(store.find("cond.a") == a);
    const std::vector<std::string> prefixes{"cond."};
    CHECK(store.count_with_prefix(prefixes) == 6);
    CHECK_THROWS(store.add("cond.a", {1, 1}));
  }
}
