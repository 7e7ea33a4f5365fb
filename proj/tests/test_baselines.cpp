#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "oracles.hpp"
#include "scenecast/baselines.hpp"
#include "scenecast/error.hpp"

using namespace scenecast;
using namespace scenecast::baselines;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
  Matrix m(r, c);
  for (auto& x : m.data()) x = rng.uniform(-1.0, 1.0);
  return m;
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

double mse_of(const std::vector<double>& pred, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (pred[i] - y[i]) * (pred[i] - y[i]);
  return s / static_cast<double>(y.size());
}

}  // namespace

TEST_CASE("naive predicts the per-FSA training mean") {
  FeatureTable t;
  t.fsas = {"T2A", "T2B"};
  Matrix y1(2, kDimensionCount, 2.0), y2(2, kDimensionCount, 4.0);
  y2(1, 0) = 5.0;
  t.by_year[2014] = y1;
  t.by_year[2015] = y2;
  const std::vector<int> years = {2014, 2015};
  const std::vector<std::string> test = {"T2B", "T2A"};
  Matrix p = naive_fit_predict(t, years, test);
  CHECK(p(1, 3) == 3.0);
  CHECK(p(0, 0) == 3.5);
  CHECK(p(0, 1) == 3.0);
}

TEST_CASE("training pairs stack consecutive years") {
  FeatureTable t;
  t.fsas = {"T2A", "T2B", "T2C"};
  for (int y = 2012; y <= 2014; ++y) t.by_year[y] = Matrix(3, kDimensionCount, static_cast<double>(y - 2011));
  PairData d = training_pairs(t, std::vector<int>{2012, 2013, 2014});
  CHECK(d.inputs.rows() == 6);
  CHECK(d.targets.rows() == 6);
  CHECK(d.inputs(0, 0) == 1.0);
  CHECK(d.targets(0, 0) == 2.0);
  CHECK(d.inputs(5, 0) == 2.0);
  CHECK(d.targets(5, 0) == 3.0);
}

TEST_CASE("lasso with lambda 0 matches the normal equations") {
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 30 + rng.index(20), d = 2 + rng.index(5);
    Matrix x = random_matrix(rng, n, d);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = 0.5 + rng.uniform(-0.1, 0.1);
      for (std::size_t j = 0; j < d; ++j) y[i] += (static_cast<double>(j) - 1.5) * x(i, j);
    }
    const auto want = oracle::normal_equations(x, y);
    const LassoFit fit = lasso_fit(x, y, 0.0, 1e-12);
    CHECK(std::abs(fit.intercept - want[0]) < 1e-6);
    for (std::size_t j = 0; j < d; ++j) CHECK(std::abs(fit.weights[j] - want[j + 1]) < 1e-6);
  }
}

TEST_CASE("lasso at or above lambda_max zeroes every weight") {
  Rng rng(2);
  Matrix x = random_matrix(rng, 40, 6);
  std::vector<double> y(40);
  for (std::size_t i = 0; i < 40; ++i) y[i] = x(i, 0) - 2.0 * x(i, 3) + rng.uniform(-0.2, 0.2);
  const double top = lasso_lambda_max(x, y);
  CHECK(top > 0.0);
  for (double lambda : {top, 1.5 * top, 100.0 * top}) {
    const LassoFit fit = lasso_fit(x, y, lambda);
    for (double w : fit.weights) CHECK(w == 0.0);
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / 40.0;
    CHECK(fit.intercept == doctest::Approx(mean).epsilon(1e-14));
  }
  // Just below the threshold something enters.
  const LassoFit fit = lasso_fit(x, y, 0.99 * top);
  CHECK(std::any_of(fit.weights.begin(), fit.weights.end(), [](double w) { return w != 0.0; }));

  // Exactly at the threshold, across many shapes, rounding must not let a weight in.
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 5 + rng.index(90), d = 1 + rng.index(12);
    Matrix xs = random_matrix(rng, n, d);
    std::vector<double> ys(n);
    for (auto& v : ys) v = rng.uniform(-3.0, 3.0);
    for (double w : lasso_fit(xs, ys, lasso_lambda_max(xs, ys)).weights) CHECK(w == 0.0);
  }
}

TEST_CASE("lasso objective never increases across sweeps") {
  Rng rng(3);
  Matrix x = random_matrix(rng, 50, 8);
  for (std::size_t i = 0; i < 50; ++i) x(i, 1) = x(i, 0) + 0.1 * x(i, 1);  // correlated pair
  std::vector<double> y(50);
  for (std::size_t i = 0; i < 50; ++i) y[i] = x(i, 0) + x(i, 2) + rng.uniform(-0.3, 0.3);
  const LassoFit fit = lasso_fit(x, y, 0.05);
  REQUIRE(fit.objective_trace.size() >= 2);
  for (std::size_t k = 1; k < fit.objective_trace.size(); ++k) {
    CHECK(fit.objective_trace[k] <= fit.objective_trace[k - 1] + 1e-15);
  }
}

TEST_CASE("one-feature lasso is a soft threshold") {
  Matrix x(4, 1, std::vector<double>{1, 2, 3, 4});
  const std::vector<double> y = {1, 3, 2, 6};
  // Population sd of x, and (1/n) Σ z (y - ȳ) with z standardized.
  const double sd = std::sqrt(1.25);
  const double rho = 1.75 / sd;
  for (double lambda : {0.0, 0.5, 1.0, 2.0}) {
    const LassoFit fit = lasso_fit(x, y, lambda);
    const double beta = std::max(0.0, rho - lambda);
    CHECK(fit.weights[0] == doctest::Approx(beta / sd).epsilon(1e-12));
    CHECK(fit.intercept == doctest::Approx(3.0 - 2.5 * beta / sd).epsilon(1e-12));
  }
  CHECK_THROWS_AS(lasso_fit(x, y, -1.0), Error);
}

TEST_CASE("a constant column gets weight zero") {
  Rng rng(4);
  Matrix x = random_matrix(rng, 20, 3);
  for (std::size_t i = 0; i < 20; ++i) x(i, 1) = 7.0;
  std::vector<double> y(20);
  for (std::size_t i = 0; i < 20; ++i) y[i] = x(i, 0);
  CHECK(lasso_fit(x, y, 0.0).weights[1] == 0.0);
}

TEST_CASE("trees and forests on a constant target predict the constant") {
  Rng rng(5);
  Matrix x = random_matrix(rng, 30, 4);
  std::vector<double> y(30, 2.75);
  RandomForest f;
  f.fit(x, y, ForestParams{.trees = 10}, 1);
  for (int k = 0; k < 5; ++k) {
    Matrix probe = random_matrix(rng, 1, 4);
    CHECK(f.predict(probe.row(0)) == 2.75);
  }
}

TEST_CASE("an unbootstrapped full-depth tree fits its training data exactly") {
  Rng rng(6);
  Matrix x = random_matrix(rng, 60, 3);
  std::vector<double> y(60);
  for (std::size_t i = 0; i < 60; ++i) y[i] = std::sin(3 * x(i, 0)) + x(i, 1) * x(i, 2);
  RegressionTree tree;
  Rng tree_rng(1);
  const auto rows = all_rows(60);
  tree.fit(x, y, rows, TreeParams{}, tree_rng);
  for (std::size_t i = 0; i < 60; ++i) CHECK(tree.predict(x.row(i)) == y[i]);

  RandomForest single;
  single.fit(x, y, ForestParams{.trees = 1, .bootstrap = false, .max_features = 3}, 2);
  for (std::size_t i = 0; i < 60; ++i) CHECK(single.predict(x.row(i)) == y[i]);
}

TEST_CASE("forest beats the mean on y = x^2 and stays within the target range") {
  Rng rng(7);
  Matrix x(200, 1), probe(100, 1);
  std::vector<double> y(200), truth(100);
  for (std::size_t i = 0; i < 200; ++i) {
    x(i, 0) = rng.uniform(-2.0, 2.0);
    y[i] = x(i, 0) * x(i, 0);
  }
  for (std::size_t i = 0; i < 100; ++i) {
    probe(i, 0) = rng.uniform(-3.0, 3.0);
    truth[i] = std::min(4.0, probe(i, 0) * probe(i, 0));
  }
  RandomForest f;
  f.fit(x, y, ForestParams{.trees = 50}, 3);
  const double lo = *std::min_element(y.begin(), y.end());
  const double hi = *std::max_element(y.begin(), y.end());
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / 200.0;
  std::vector<double> pred(100), flat(100, mean);
  for (std::size_t i = 0; i < 100; ++i) {
    pred[i] = f.predict(probe.row(i));
    CHECK(pred[i] >= lo);
    CHECK(pred[i] <= hi);
  }
  CHECK(mse_of(pred, truth) < 0.25 * mse_of(flat, truth));
}

TEST_CASE("forests are deterministic per seed") {
  Rng rng(8);
  Matrix x = random_matrix(rng, 50, 5);
  std::vector<double> y(50);
  for (std::size_t i = 0; i < 50; ++i) y[i] = x(i, 0) + rng.uniform();
  RandomForest a, b;
  a.fit(x, y, ForestParams{.trees = 20}, 9);
  b.fit(x, y, ForestParams{.trees = 20}, 9);
  for (std::size_t i = 0; i < 50; ++i) CHECK(a.predict(x.row(i)) == b.predict(x.row(i)));
}

TEST_CASE("boosting training loss never increases") {
  Rng rng(9);
  Matrix x = random_matrix(rng, 80, 3);
  std::vector<double> y(80);
  for (std::size_t i = 0; i < 80; ++i) y[i] = std::cos(2 * x(i, 0)) + x(i, 1) + rng.uniform(-0.1, 0.1);
  BoostedTrees b;
  b.fit(x, y, BoostParams{.rounds = 60, .shrinkage = 0.2, .max_depth = 2}, 1);
  const auto& trace = b.loss_trace();
  REQUIRE(trace.size() == 61);
  for (std::size_t k = 1; k < trace.size(); ++k) CHECK(trace[k] <= trace[k - 1] + 1e-12);
  CHECK(trace.back() < 0.5 * trace.front());

  std::vector<double> pred(80);
  for (std::size_t i = 0; i < 80; ++i) pred[i] = b.predict(x.row(i));
  CHECK(mse_of(pred, y) == doctest::Approx(trace.back()).epsilon(1e-9));
}

TEST_CASE("multi-output model fits one regressor per column") {
  Rng rng(10);
  Matrix x = random_matrix(rng, 40, 3);
  Matrix y(40, 2);
  for (std::size_t i = 0; i < 40; ++i) {
    y(i, 0) = 2.0 * x(i, 0) + 1.0;
    y(i, 1) = -x(i, 2);
  }
  BaselineModel m = BaselineModel::fit(ModelKind::Lasso, Hyperparams{}, x, y, 1);
  Matrix p = m.predict(x);
  CHECK(p.cols() == 2);
  for (std::size_t i = 0; i < 40; ++i) {
    CHECK(p(i, 0) == doctest::Approx(y(i, 0)).epsilon(1e-6));
    CHECK(p(i, 1) == doctest::Approx(y(i, 1)).epsilon(1e-6));
  }
}

TEST_CASE("folds partition the rows and are deterministic per seed") {
  auto a = make_folds(23, 5, 4);
  auto b = make_folds(23, 5, 4);
  CHECK(a == b);
  CHECK(a.size() == 5);
  std::multiset<std::size_t> seen;
  for (const auto& f : a) {
    CHECK(f.size() >= 4);
    CHECK(f.size() <= 5);
    seen.insert(f.begin(), f.end());
  }
  CHECK(seen.size() == 23);
  CHECK(std::set<std::size_t>(seen.begin(), seen.end()).size() == 23);
  CHECK(make_folds(23, 5, 5) != a);
}

TEST_CASE("grid search: single point, ties to the first point, best is the minimum") {
  Rng rng(11);
  Matrix x = random_matrix(rng, 40, 4);
  Matrix y(40, 1);
  for (std::size_t i = 0; i < 40; ++i) y(i, 0) = x(i, 0) + rng.uniform(-0.5, 0.5);

  std::vector<Hyperparams> one(1);
  one[0].lambda = 0.1;
  CvResult r = grid_search_cv(ModelKind::Lasso, one, x, y, 5, 1);
  CHECK(r.best_index == 0);
  CHECK(r.best.lambda == 0.1);

  std::vector<Hyperparams> tied(3);
  tied[0].lambda = 100.0;
  tied[1].lambda = 200.0;
  tied[2].lambda = 0.0;
  r = grid_search_cv(ModelKind::Lasso, tied, x, y, 5, 1);
  CHECK(r.mean_rmse[0] == r.mean_rmse[1]);  // both past lambda_max
  CHECK(r.best_index == 2);

  tied.pop_back();
  r = grid_search_cv(ModelKind::Lasso, tied, x, y, 5, 1);
  CHECK(r.best_index == 0);

  r = grid_search_cv(ModelKind::Lasso, default_grid(ModelKind::Lasso), x, y, 5, 2);
  CHECK(r.mean_rmse[r.best_index] == *std::min_element(r.mean_rmse.begin(), r.mean_rmse.end()));
}

TEST_CASE("model kind names round trip") {
  for (ModelKind k : {ModelKind::Naive, ModelKind::Lasso, ModelKind::Forest, ModelKind::Boosted}) {
    CHECK(kind_from_name(kind_name(k)) == k);
  }
  CHECK_THROWS(kind_from_name("svm"));
}
