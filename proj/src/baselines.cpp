#include "scenecast/baselines.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

#include "scenecast/error.hpp"

namespace scenecast::baselines {

using nlohmann::json;

FeatureTable FeatureTable::build(const scenes::SceneTable& scene_table,
                                 const ingest::CensusTables* census,
                                 std::span<const std::string> fsas, std::span<const int> years) {
  FeatureTable t;
  t.city = scene_table.city;
  t.fsas.assign(fsas.begin(), fsas.end());
  const std::size_t width = kDimensionCount + (census ? kCensusWidth : 0);
  for (int y : years) {
    Matrix m(fsas.size(), width);
    for (std::size_t r = 0; r < fsas.size(); ++r) {
      const auto& cell = scene_table.cell(y, fsas[r]);
      for (std::size_t d = 0; d < kDimensionCount; ++d) m(r, d) = cell.dims[d];
      if (census) {
        const auto& row = census->for_year(y, fsas[r]);
        for (std::size_t d = 0; d < kCensusWidth; ++d) m(r, kDimensionCount + d) = row[d];
      }
    }
    t.by_year[y] = std::move(m);
  }
  return t;
}

const Matrix& FeatureTable::year(int y) const {
  auto it = by_year.find(y);
  if (it == by_year.end()) throw DataError("no features for year " + std::to_string(y));
  return it->second;
}

PairData training_pairs(const FeatureTable& table, std::span<const int> training_years) {
  std::vector<int> years(training_years.begin(), training_years.end());
  std::sort(years.begin(), years.end());
  std::vector<std::pair<const Matrix*, const Matrix*>> pairs;
  for (std::size_t i = 0; i + 1 < years.size(); ++i) {
    if (years[i + 1] == years[i] + 1) pairs.emplace_back(&table.year(years[i]), &table.year(years[i + 1]));
  }
  if (pairs.empty()) throw Error("training years contain no consecutive pair");
  const std::size_t n = table.fsas.size();
  const std::size_t width = pairs.front().first->cols();
  PairData data{Matrix(n * pairs.size(), width), Matrix(n * pairs.size(), kDimensionCount)};
  std::size_t row = 0;
  for (const auto& [in, out] : pairs) {
    for (std::size_t r = 0; r < n; ++r, ++row) {
      std::copy(in->row(r).begin(), in->row(r).end(), data.inputs.row(row).begin());
      for (std::size_t d = 0; d < kDimensionCount; ++d) data.targets(row, d) = (*out)(r, d);
    }
  }
  return data;
}

Matrix naive_fit_predict(const FeatureTable& table, std::span<const int> training_years,
                         std::span<const std::string> test_fsas) {
  if (training_years.empty()) throw Error("naive baseline needs at least one training year");
  Matrix pred(test_fsas.size(), kDimensionCount);
  for (std::size_t r = 0; r < test_fsas.size(); ++r) {
    auto it = std::find(table.fsas.begin(), table.fsas.end(), test_fsas[r]);
    if (it == table.fsas.end()) {
      throw DataError("FSA " + test_fsas[r] + " is missing from the training features");
    }
    const std::size_t src = static_cast<std::size_t>(it - table.fsas.begin());
    for (int y : training_years) {
      const Matrix& m = table.year(y);
      for (std::size_t d = 0; d < kDimensionCount; ++d) pred(r, d) += m(src, d);
    }
    for (std::size_t d = 0; d < kDimensionCount; ++d) {
      pred(r, d) /= static_cast<double>(training_years.size());
    }
  }
  return pred;
}

namespace {

struct Standardized {
  Matrix z;
  std::vector<double> mean;
  std::vector<double> scale;  // 0 for constant columns
  std::vector<double> centered_y;
  double y_mean = 0.0;
};

Standardized standardize(const Matrix& x, std::span<const double> y) {
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  if (y.size() != n) throw Error("lasso: X has " + std::to_string(n) + " rows but y has " + std::to_string(y.size()));
  if (n < 2) throw Error("lasso needs at least two rows");
  for (double v : x.data()) {
    if (!std::isfinite(v)) throw Error("lasso: non-finite feature value");
  }
  for (double v : y) {
    if (!std::isfinite(v)) throw Error("lasso: non-finite target value");
  }
  Standardized s;
  s.z = Matrix(n, p);
  s.mean.assign(p, 0.0);
  s.scale.assign(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += x(i, j);
    m /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (x(i, j) - m) * (x(i, j) - m);
    var /= static_cast<double>(n);
    s.mean[j] = m;
    if (var > 1e-24) {
      s.scale[j] = std::sqrt(var);
      for (std::size_t i = 0; i < n; ++i) s.z(i, j) = (x(i, j) - m) / s.scale[j];
    }
  }
  s.y_mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  s.centered_y.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.centered_y[i] = y[i] - s.y_mean;
  return s;
}

double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

double column_dot(const Matrix& z, std::size_t j, std::span<const double> r) {
  double s = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i) s += z(i, j) * r[i];
  return s;
}

}  // namespace

double LassoFit::predict(std::span<const double> x) const {
  double s = intercept;
  for (std::size_t j = 0; j < weights.size(); ++j) s += weights[j] * x[j];
  return s;
}

double lasso_lambda_max(const Matrix& x, std::span<const double> y) {
  const Standardized s = standardize(x, y);
  const double n = static_cast<double>(x.rows());
  double best = 0.0;
  for (std::size_t j = 0; j < x.cols(); ++j) {
    if (s.scale[j] == 0.0) continue;
    best = std::max(best, std::abs(column_dot(s.z, j, s.centered_y) / n));
  }
  return best;
}

LassoFit lasso_fit(const Matrix& x, std::span<const double> y, double lambda, double tol,
                   int max_sweeps) {
  if (!(lambda >= 0.0)) throw Error("lasso: lambda must be >= 0");
  const Standardized s = standardize(x, y);
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> beta(p, 0.0);
  std::vector<double> resid = s.centered_y;

  auto objective = [&] {
    double rss = 0.0;
    for (double r : resid) rss += r * r;
    double l1 = 0.0;
    for (double b : beta) l1 += std::abs(b);
    return 0.5 * inv_n * rss + lambda * l1;
  };

  LassoFit fit;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      if (s.scale[j] == 0.0) continue;
      // Columns of Z have (1/n)||Z_j||² = 1. Same rounding as lasso_lambda_max,
      // so lambda = lambda_max keeps every coefficient at exactly zero.
      const double rho = column_dot(s.z, j, resid) / static_cast<double>(n) + beta[j];
      const double updated = soft_threshold(rho, lambda);
      const double delta = updated - beta[j];
      if (delta != 0.0) {
        for (std::size_t i = 0; i < n; ++i) resid[i] -= delta * s.z(i, j);
        beta[j] = updated;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    fit.sweeps = sweep + 1;
    fit.objective_trace.push_back(objective());
    if (max_change < tol) break;
  }

  fit.weights.assign(p, 0.0);
  fit.intercept = s.y_mean;
  for (std::size_t j = 0; j < p; ++j) {
    if (s.scale[j] == 0.0) continue;
    fit.weights[j] = beta[j] / s.scale[j];
    fit.intercept -= fit.weights[j] * s.mean[j];
  }
  return fit;
}

void RegressionTree::fit(const Matrix& x, std::span<const double> y,
                         std::span<const std::size_t> rows, const TreeParams& params, Rng& rng) {
  if (rows.empty()) throw Error("cannot fit a tree on an empty training set");
  if (params.min_leaf < 1) throw Error("min_leaf must be >= 1");
  nodes_.clear();
  std::vector<std::size_t> work(rows.begin(), rows.end());
  grow(x, y, work, 0, work.size(), 0, params, rng);
}

int RegressionTree::grow(const Matrix& x, std::span<const double> y,
                         std::vector<std::size_t>& rows, std::size_t begin, std::size_t end,
                         int depth, const TreeParams& params, Rng& rng) {
  const std::size_t count = end - begin;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    sum += y[rows[i]];
    sum_sq += y[rows[i]] * y[rows[i]];
  }
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{-1, 0.0, sum / static_cast<double>(count), -1, -1});

  const bool depth_ok = params.max_depth < 0 || depth < params.max_depth;
  const double node_sse = sum_sq - sum * sum / static_cast<double>(count);
  if (!depth_ok || count < 2 * params.min_leaf || node_sse <= 1e-12 * std::max(1.0, sum_sq)) {
    return id;
  }

  const std::size_t p = x.cols();
  const std::size_t wanted = params.max_features == 0 ? p : std::min(params.max_features, p);
  std::vector<std::size_t> features(p);
  std::iota(features.begin(), features.end(), 0);
  rng.shuffle(features.begin(), features.end());

  int best_feature = -1;
  double best_threshold = 0.0;
  double best_score = sum * sum / static_cast<double>(count);  // gain relative to no split
  std::vector<std::pair<double, double>> sorted(count);
  for (std::size_t f = 0; f < p; ++f) {
    if (f >= wanted && best_feature >= 0) break;
    const std::size_t feat = features[f];
    for (std::size_t i = 0; i < count; ++i) {
      sorted[i] = {x(rows[begin + i], feat), y[rows[begin + i]]};
    }
    std::sort(sorted.begin(), sorted.end());
    double left_sum = 0.0;
    for (std::size_t i = 0; i + 1 < count; ++i) {
      left_sum += sorted[i].second;
      const std::size_t nl = i + 1;
      const std::size_t nr = count - nl;
      if (nl < params.min_leaf || nr < params.min_leaf) continue;
      if (sorted[i].first == sorted[i + 1].first) continue;
      const double right_sum = sum - left_sum;
      const double score = left_sum * left_sum / static_cast<double>(nl) +
                           right_sum * right_sum / static_cast<double>(nr);
      if (score > best_score + 1e-12 * std::max(1.0, std::abs(best_score))) {
        best_score = score;
        best_feature = static_cast<int>(feat);
        best_threshold = 0.5 * (sorted[i].first + sorted[i + 1].first);
        if (best_threshold >= sorted[i + 1].first) best_threshold = sorted[i].first;
      }
    }
  }
  if (best_feature < 0) return id;

  auto mid_it = std::partition(rows.begin() + static_cast<std::ptrdiff_t>(begin),
                               rows.begin() + static_cast<std::ptrdiff_t>(end),
                               [&](std::size_t r) { return x(r, best_feature) <= best_threshold; });
  const std::size_t mid = static_cast<std::size_t>(mid_it - rows.begin());
  nodes_[id].feature = best_feature;
  nodes_[id].threshold = best_threshold;
  const int left = grow(x, y, rows, begin, mid, depth + 1, params, rng);
  const int right = grow(x, y, rows, mid, end, depth + 1, params, rng);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

double RegressionTree::predict(std::span<const double> x) const {
  int id = 0;
  while (nodes_[id].feature >= 0) {
    id = x[nodes_[id].feature] <= nodes_[id].threshold ? nodes_[id].left : nodes_[id].right;
  }
  return nodes_[id].value;
}

json RegressionTree::to_json() const {
  json arr = json::array();
  for (const auto& n : nodes_) {
    arr.push_back({{"feature", n.feature},
                   {"threshold", n.threshold},
                   {"value", n.value},
                   {"left", n.left},
                   {"right", n.right}});
  }
  return arr;
}

void RandomForest::fit(const Matrix& x, std::span<const double> y, const ForestParams& params,
                       std::uint64_t seed) {
  const std::size_t n = x.rows();
  if (n == 0) throw Error("cannot fit a forest on an empty training set");
  if (n < params.min_leaf) throw Error("fewer rows than min_leaf");
  if (params.trees < 1) throw Error("forest needs at least one tree");
  TreeParams tp;
  tp.max_depth = params.max_depth;
  tp.min_leaf = params.min_leaf;
  tp.max_features = params.max_features
                        ? params.max_features
                        : std::max<std::size_t>(1, static_cast<std::size_t>(
                                                       std::floor(std::sqrt(static_cast<double>(x.cols())))));
  Rng rng(seed);
  trees_.assign(static_cast<std::size_t>(params.trees), RegressionTree{});
  std::vector<std::size_t> rows(n);
  for (auto& tree : trees_) {
    if (params.bootstrap) {
      for (auto& r : rows) r = rng.index(n);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    tree.fit(x, y, rows, tp, rng);
  }
}

double RandomForest::predict(std::span<const double> x) const {
  double s = 0.0;
  for (const auto& t : trees_) s += t.predict(x);
  return s / static_cast<double>(trees_.size());
}

void BoostedTrees::fit(const Matrix& x, std::span<const double> y, const BoostParams& params,
                       std::uint64_t seed) {
  const std::size_t n = x.rows();
  if (n == 0) throw Error("cannot fit boosting on an empty training set");
  if (!(params.shrinkage > 0.0)) throw Error("shrinkage must be positive");
  shrinkage_ = params.shrinkage;
  base_ = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  std::vector<double> fitted(n, base_);
  std::vector<double> resid(n);
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  TreeParams tp{params.max_depth, params.min_leaf, 0};
  Rng rng(seed);
  auto mse = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += (y[i] - fitted[i]) * (y[i] - fitted[i]);
    return s / static_cast<double>(n);
  };
  trees_.clear();
  loss_trace_.assign(1, mse());
  for (int round = 0; round < params.rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) resid[i] = y[i] - fitted[i];
    RegressionTree tree;
    tree.fit(x, resid, rows, tp, rng);
    for (std::size_t i = 0; i < n; ++i) fitted[i] += shrinkage_ * tree.predict(x.row(i));
    trees_.push_back(std::move(tree));
    loss_trace_.push_back(mse());
  }
}

double BoostedTrees::predict(std::span<const double> x) const {
  double s = base_;
  for (const auto& t : trees_) s += shrinkage_ * t.predict(x);
  return s;
}

std::string_view kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Naive:
      return "Naive";
    case ModelKind::Lasso:
      return "Lasso";
    case ModelKind::Forest:
      return "Random Forest";
    case ModelKind::Boosted:
      return "Boosted Trees";
  }
  return "?";
}

ModelKind kind_from_name(std::string_view name) {
  std::string k;
  for (char c : name) {
    if (c != ' ' && c != '_' && c != '-') k.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (k == "naive") return ModelKind::Naive;
  if (k == "lasso") return ModelKind::Lasso;
  if (k == "forest" || k == "randomforest" || k == "rf") return ModelKind::Forest;
  if (k == "boosted" || k == "boostedtrees" || k == "gbt" || k == "xgboost") return ModelKind::Boosted;
  throw Error("unknown baseline model '" + std::string(name) + "'");
}

std::string Hyperparams::label(ModelKind kind) const {
  switch (kind) {
    case ModelKind::Naive:
      return "-";
    case ModelKind::Lasso:
      return "lambda=" + std::to_string(lambda);
    case ModelKind::Forest:
      return "trees=" + std::to_string(trees) + ";depth=" +
             (max_depth < 0 ? std::string("inf") : std::to_string(max_depth));
    case ModelKind::Boosted:
      return "rounds=" + std::to_string(rounds) + ";shrinkage=" + std::to_string(shrinkage);
  }
  return {};
}

std::vector<Hyperparams> default_grid(ModelKind kind) {
  std::vector<Hyperparams> grid;
  switch (kind) {
    case ModelKind::Naive:
      grid.emplace_back();
      break;
    case ModelKind::Lasso:
      for (int i = 0; i < 7; ++i) {
        Hyperparams h;
        h.lambda = std::pow(10.0, -4.0 + 4.0 * i / 6.0);
        grid.push_back(h);
      }
      break;
    case ModelKind::Forest:
      for (int trees : {100, 300}) {
        for (int depth : {3, 6, -1}) {
          Hyperparams h;
          h.trees = trees;
          h.max_depth = depth;
          grid.push_back(h);
        }
      }
      break;
    case ModelKind::Boosted:
      for (int rounds : {100, 300}) {
        for (double shrinkage : {0.05, 0.1}) {
          Hyperparams h;
          h.rounds = rounds;
          h.shrinkage = shrinkage;
          h.max_depth = 3;
          grid.push_back(h);
        }
      }
      break;
  }
  return grid;
}

BaselineModel BaselineModel::fit(ModelKind kind, const Hyperparams& params, const Matrix& x,
                                 const Matrix& y, std::uint64_t seed) {
  if (kind == ModelKind::Naive) throw Error("the naive baseline is not a feature regressor");
  if (x.rows() != y.rows()) throw Error("inputs and targets have different row counts");
  if (x.rows() == 0) throw Error("empty training set");
  BaselineModel m;
  m.kind = kind;
  m.params = params;
  std::vector<double> column(y.rows());
  for (std::size_t d = 0; d < y.cols(); ++d) {
    for (std::size_t i = 0; i < y.rows(); ++i) column[i] = y(i, d);
    const std::uint64_t s = derive_seed(seed, "dim=" + std::to_string(d));
    switch (kind) {
      case ModelKind::Lasso:
        m.lasso_.push_back(lasso_fit(x, column, params.lambda));
        break;
      case ModelKind::Forest: {
        RandomForest f;
        f.fit(x, column, ForestParams{params.trees, params.max_depth, params.min_leaf, true, 0}, s);
        m.forest_.push_back(std::move(f));
        break;
      }
      case ModelKind::Boosted: {
        BoostedTrees b;
        b.fit(x, column, BoostParams{params.rounds, params.shrinkage, params.max_depth < 0 ? 3 : params.max_depth, params.min_leaf}, s);
        m.boosted_.push_back(std::move(b));
        break;
      }
      case ModelKind::Naive:
        break;
    }
  }
  return m;
}

Matrix BaselineModel::predict(const Matrix& x) const {
  const std::size_t outputs = lasso_.size() + forest_.size() + boosted_.size();
  Matrix out(x.rows(), outputs);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto row = x.row(i);
    for (std::size_t d = 0; d < outputs; ++d) {
      switch (kind) {
        case ModelKind::Lasso:
          out(i, d) = lasso_[d].predict(row);
          break;
        case ModelKind::Forest:
          out(i, d) = forest_[d].predict(row);
          break;
        case ModelKind::Boosted:
          out(i, d) = boosted_[d].predict(row);
          break;
        case ModelKind::Naive:
          break;
      }
    }
  }
  return out;
}

json BaselineModel::to_json() const {
  json j;
  j["kind"] = kind_name(kind);
  j["params"] = params.label(kind);
  if (kind == ModelKind::Lasso) {
    json dims = json::array();
    for (const auto& f : lasso_) dims.push_back({{"weights", f.weights}, {"intercept", f.intercept}});
    j["dimensions"] = dims;
  } else {
    j["dimensions"] = forest_.size() + boosted_.size();
  }
  return j;
}

std::vector<std::vector<std::size_t>> make_folds(std::size_t rows, int folds, std::uint64_t seed) {
  if (folds < 2) throw Error("cross-validation needs at least two folds");
  if (rows < static_cast<std::size_t>(folds)) {
    throw Error("cross-validation needs at least as many rows as folds");
  }
  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(folds));
  for (std::size_t i = 0; i < rows; ++i) out[i % out.size()].push_back(order[i]);
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

CvResult grid_search_cv(ModelKind kind, std::span<const Hyperparams> grid, const Matrix& x,
                        const Matrix& y, int folds, std::uint64_t seed) {
  if (grid.empty()) throw Error("empty hyperparameter grid");
  const auto fold_rows = make_folds(x.rows(), folds, seed);
  auto take = [](const Matrix& m, const std::vector<std::size_t>& rows) {
    Matrix out(rows.size(), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::copy(m.row(rows[i]).begin(), m.row(rows[i]).end(), out.row(i).begin());
    }
    return out;
  };
  CvResult res;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double total = 0.0;
    for (std::size_t f = 0; f < fold_rows.size(); ++f) {
      std::vector<std::size_t> train_rows;
      for (std::size_t o = 0; o < fold_rows.size(); ++o) {
        if (o != f) train_rows.insert(train_rows.end(), fold_rows[o].begin(), fold_rows[o].end());
      }
      std::sort(train_rows.begin(), train_rows.end());
      const auto model = BaselineModel::fit(kind, grid[g], take(x, train_rows), take(y, train_rows),
                                            derive_seed(seed, "cv/fold=" + std::to_string(f)));
      const Matrix pred = model.predict(take(x, fold_rows[f]));
      const Matrix truth = take(y, fold_rows[f]);
      double sq = 0.0;
      for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred.data()[i] - truth.data()[i];
        sq += d * d;
      }
      total += std::sqrt(sq / static_cast<double>(pred.size()));
    }
    res.mean_rmse.push_back(total / static_cast<double>(fold_rows.size()));
    if (res.mean_rmse[g] < res.mean_rmse[res.best_index]) res.best_index = g;
  }
  res.best = grid[res.best_index];
  return res;
}

}  // namespace scenecast::baselines
