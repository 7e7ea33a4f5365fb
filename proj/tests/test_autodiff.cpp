#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>
#include <numeric>

#include "gradcheck.hpp"
#include "scenecast/autodiff.hpp"
#include "scenecast/error.hpp"

using namespace scenecast;
using namespace scenecast::autodiff;
using scenecast::testing::gradient_error;
using scenecast::testing::random_param;

namespace {

IndexList indices(std::vector<int> v) { return std::make_shared<const std::vector<int>>(std::move(v)); }

}  // namespace

TEST_CASE("x * x at 3 has derivative 6") {
  Parameter x("x", Matrix{{3.0}});
  Tape tape;
  Var v = tape.param(x);
  Var sq = tape.matmul(v, v);
  CHECK(tape.backward(tape.weighted_sum(sq, Matrix{{1.0}})) == 9.0);
  CHECK(x.grad(0, 0) == 6.0);
}

TEST_CASE("matmul chain matches central differences to 1e-6") {
  Rng rng(1);
  std::vector<Parameter> ps = {random_param(rng, 4, 3), random_param(rng, 3, 2), random_param(rng, 2, 5)};
  const double err = gradient_error(ps, [](Tape& t, std::vector<Var>& v) {
    return t.matmul(t.matmul(v[0], v[1]), v[2]);
  }, 2);
  CHECK(err < 1e-6);
}

TEST_CASE("elementwise and broadcast ops pass finite differences") {
  Rng rng(2);
  std::vector<Parameter> ps = {random_param(rng, 3, 4), random_param(rng, 3, 4), random_param(rng, 1, 4)};
  CHECK(gradient_error(ps, [](Tape& t, std::vector<Var>& v) { return t.add(v[0], v[1]); }, 3) < 1e-6);
  CHECK(gradient_error(ps, [](Tape& t, std::vector<Var>& v) { return t.add_row(v[0], v[2]); }, 4) < 1e-6);
  CHECK(gradient_error(ps, [](Tape& t, std::vector<Var>& v) { return t.add_scalar(v[0], 0.7); }, 5) < 1e-6);
  CHECK(gradient_error(ps, [](Tape& t, std::vector<Var>& v) { return t.scale(v[1], -2.5); }, 6) < 1e-6);
}

TEST_CASE("relu passes finite differences away from the kink") {
  Rng rng(3);
  std::vector<Parameter> ps = {random_param(rng, 5, 4, 0.05)};
  CHECK(gradient_error(ps, [](Tape& t, std::vector<Var>& v) { return t.relu(v[0]); }, 7) < 1e-6);
}

TEST_CASE("relu subgradient at exactly zero is zero") {
  Parameter x("x", Matrix{{0.0, 1.0, -1.0}});
  Tape tape;
  tape.backward(tape.weighted_sum(tape.relu(tape.param(x)), Matrix{{1.0, 1.0, 1.0}}));
  CHECK(x.grad == Matrix{{0.0, 1.0, 0.0}});
}

TEST_CASE("layer norm passes finite differences and normalizes rows") {
  Rng rng(4);
  std::vector<Parameter> ps = {random_param(rng, 4, 6), random_param(rng, 1, 6), random_param(rng, 1, 6)};
  CHECK(gradient_error(ps, [](Tape& t, std::vector<Var>& v) { return t.layer_norm(v[0], v[1], v[2]); }, 8) < 1e-6);

  Parameter gain("g", Matrix(1, 6, 1.0)), shift("s", Matrix(1, 6, 0.0));
  Tape tape;
  Var y = tape.layer_norm(tape.param(ps[0]), tape.param(gain), tape.param(shift));
  const Matrix& out = tape.value(y);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    double mean = 0.0, var = 0.0;
    for (double x : out.row(r)) mean += x;
    mean /= 6.0;
    for (double x : out.row(r)) var += (x - mean) * (x - mean);
    var /= 6.0;
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(var - 1.0) < 1e-9);
  }
}

TEST_CASE("gather and softmax aggregation pass finite differences") {
  Rng rng(5);
  const auto dst = indices({0, 0, 1, 2, 2, 2, 0});
  std::vector<Parameter> ps = {random_param(rng, 7, 3), Parameter("t", Matrix{{0.8}})};
  CHECK(gradient_error(ps, [&](Tape& t, std::vector<Var>& v) {
    return t.softmax_aggregate(v[0], v[1], dst, 4);
  }, 9) < 1e-6);

  std::vector<Parameter> g = {random_param(rng, 3, 4)};
  const auto src = indices({2, 0, 0, 1, 2});
  CHECK(gradient_error(g, [&](Tape& t, std::vector<Var>& v) { return t.gather_rows(v[0], src); }, 10) < 1e-6);
}

TEST_CASE("softmax weights sum to one per destination; empty destinations get zero") {
  Parameter temp("t", Matrix{{1.3}});
  Tape tape;
  // Aggregating all-ones messages returns the weight sum.
  Parameter ones("o", Matrix(6, 2, 1.0));
  Var agg = tape.softmax_aggregate(tape.param(ones), tape.param(temp), indices({0, 1, 1, 2, 2, 2}), 4);
  const Matrix& out = tape.value(agg);
  for (std::size_t v = 0; v < 3; ++v) {
    for (std::size_t c = 0; c < 2; ++c) CHECK(std::abs(out(v, c) - 1.0) < 1e-12);
  }
  CHECK(out(3, 0) == 0.0);
  CHECK(out(3, 1) == 0.0);
}

TEST_CASE("dropout: identity in eval mode, mean-preserving in training") {
  Rng rng(7);
  Parameter x = random_param(rng, 200, 50);
  Tape tape;
  Var in = tape.param(x);
  Rng drop(1);
  CHECK(tape.dropout(in, 0.3, drop, false).id == in.id);
  Var out = tape.dropout(in, 0.3, drop, true);
  Parameter ones("o", Matrix(200, 50, 1.0));
  Var o = tape.dropout(tape.param(ones), 0.3, drop, true);
  double sum_out = 0.0;
  for (double v : tape.value(o).data()) sum_out += v;
  CHECK(std::abs(sum_out / (200.0 * 50.0) - 1.0) < 0.03);
  for (std::size_t i = 0; i < tape.value(out).size(); ++i) {
    const double ratio = tape.value(out).data()[i] / x.value.data()[i];
    CHECK((ratio == 0.0 || std::abs(ratio - 1.0 / 0.7) < 1e-12));
  }

  std::vector<Parameter> ps = {random_param(rng, 4, 5)};
  CHECK(gradient_error(ps, [](Tape& t, std::vector<Var>& v) {
    Rng fixed(3);
    return t.dropout(v[0], 0.4, fixed, true);
  }, 11) < 1e-6);
}

TEST_CASE("mse passes finite differences") {
  Rng rng(8);
  Matrix target(3, 4);
  for (auto& x : target.data()) x = rng.uniform();
  std::vector<Parameter> ps = {random_param(rng, 3, 4)};
  CHECK(gradient_error(ps, [&](Tape& t, std::vector<Var>& v) { return t.mse(v[0], target); }, 12) < 1e-6);
}

TEST_CASE("a parameter the loss never touches gets a zero gradient") {
  Parameter used("u", Matrix{{1.0, 2.0}});
  Parameter unused("n", Matrix{{3.0}});
  unused.zero_grad();
  Tape tape;
  tape.param(unused);
  tape.backward(tape.weighted_sum(tape.param(used), Matrix{{1.0, 1.0}}));
  CHECK(unused.grad == Matrix{{0.0}});
  CHECK(used.grad == Matrix{{1.0, 1.0}});
}

TEST_CASE("gradients accumulate when a parameter is used twice") {
  Parameter x("x", Matrix{{2.0}});
  Tape tape;
  Var a = tape.param(x);
  Var b = tape.param(x);
  tape.backward(tape.weighted_sum(tape.add(a, b), Matrix{{1.0}}));
  CHECK(x.grad(0, 0) == 2.0);
}

TEST_CASE("backward needs a scalar loss") {
  Parameter x("x", Matrix{{1.0, 2.0}});
  Tape tape;
  CHECK_THROWS_AS(tape.backward(tape.param(x)), Error);
}

TEST_CASE("non-finite values are rejected") {
  Parameter x("x", Matrix{{1e308}});
  Tape tape;
  CHECK_THROWS_AS(tape.scale(tape.param(x), 10.0), Error);
  Parameter bad("b", Matrix{{std::nan("")}});
  Tape t2;
  CHECK_THROWS_AS(t2.param(bad), Error);
}

TEST_CASE("shape mismatches are errors") {
  Parameter a("a", Matrix(2, 3)), b("b", Matrix(2, 3)), c("c", Matrix(3, 2));
  Tape tape;
  CHECK_THROWS_AS(tape.matmul(tape.param(a), tape.param(b)), Error);
  CHECK_THROWS_AS(tape.add(tape.param(a), tape.param(c)), Error);
}

TEST_CASE("Adam: zero gradient leaves parameters unchanged") {
  Parameter p("p", Matrix{{1.0, -2.0}});
  p.zero_grad();
  std::vector<Parameter*> ps = {&p};
  AdamState s;
  adam_step(ps, s, {});
  CHECK(p.value == Matrix{{1.0, -2.0}});
  CHECK(s.step == 1);
}

TEST_CASE("Adam: first steps match the recurrence by hand") {
  Parameter p("p", Matrix{{0.5}});
  std::vector<Parameter*> ps = {&p};
  AdamState s;
  const AdamConfig cfg{0.01};
  p.grad = Matrix{{0.2}};
  adam_step(ps, s, cfg);
  // m = 0.1 * 0.2 = 0.02, v = 0.001 * 0.04; m̂ = 0.2, v̂ = 0.04; step = 0.01 * 0.2 / (0.2 + 1e-8).
  const double first = 0.5 - 0.01 * 0.2 / (0.2 + 1e-8);
  CHECK(p.value(0, 0) == doctest::Approx(first).epsilon(1e-14));
  p.grad = Matrix{{-0.4}};
  adam_step(ps, s, cfg);
  const double m = 0.9 * 0.02 + 0.1 * -0.4;
  const double v = 0.999 * 0.00004 + 0.001 * 0.16;
  const double mhat = m / (1 - 0.81);
  const double vhat = v / (1 - 0.999 * 0.999);
  CHECK(p.value(0, 0) == doctest::Approx(first - 0.01 * mhat / (std::sqrt(vhat) + 1e-8)).epsilon(1e-14));
}

TEST_CASE("identical runs give identical parameters") {
  auto run = [] {
    Rng rng(42);
    Parameter w = random_param(rng, 3, 3);
    Matrix target(2, 3, 0.5);
    Parameter x = random_param(rng, 2, 3);
    std::vector<Parameter*> ps = {&w};
    AdamState s;
    for (int i = 0; i < 20; ++i) {
      w.zero_grad();
      Tape tape;
      Rng drop(i);
      Var h = tape.dropout(tape.matmul(tape.param(x), tape.param(w)), 0.2, drop, true);
      tape.backward(tape.mse(h, target));
      adam_step(ps, s, {});
    }
    return w.value;
  };
  CHECK(run() == run());
}

TEST_CASE("checkpoint JSON round trip") {
  Rng rng(9);
  Parameter a = random_param(rng, 2, 3);
  a.name = "a";
  Parameter b = random_param(rng, 1, 4);
  b.name = "b";
  std::vector<const Parameter*> cps = {&a, &b};
  auto j = nlohmann::json::parse(parameters_to_json(cps).dump());
  Parameter a2("a", Matrix(2, 3)), b2("b", Matrix(1, 4));
  std::vector<Parameter*> ps = {&a2, &b2};
  parameters_from_json(j, ps);
  CHECK(a2.value == a.value);
  CHECK(b2.value == b.value);
  Parameter wrong("a", Matrix(3, 2));
  std::vector<Parameter*> bad = {&wrong};
  CHECK_THROWS(parameters_from_json(j, bad));
}
