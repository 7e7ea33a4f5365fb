#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "scenecast/ingest.hpp"
#include "scenecast/matrix.hpp"
#include "scenecast/scenes.hpp"
#include "scenecast/seeding.hpp"

namespace scenecast::baselines {

/// Per-year FSA features [T | D] with rows aligned to `fsas`.
struct FeatureTable {
  std::string city;
  std::vector<std::string> fsas;
  std::map<int, Matrix> by_year;

  /// census == nullptr gives the 15-wide scene-only table.
  static FeatureTable build(const scenes::SceneTable& scene_table,
                            const ingest::CensusTables* census,
                            std::span<const std::string> fsas, std::span<const int> years);
  const Matrix& year(int y) const;
};

/// Stacked supervised pairs: rows of H(y) as inputs, T(y + 1) as targets,
/// for every consecutive pair within `training_years`.
struct PairData {
  Matrix inputs;
  Matrix targets;
};
PairData training_pairs(const FeatureTable& table, std::span<const int> training_years);

/// Per-FSA mean of the scene block over the training years.
Matrix naive_fit_predict(const FeatureTable& table, std::span<const int> training_years,
                         std::span<const std::string> test_fsas);

struct LassoFit {
  std::vector<double> weights;  // on the original feature scale
  double intercept = 0.0;
  int sweeps = 0;
  /// Standardized objective after each coordinate sweep.
  std::vector<double> objective_trace;

  double predict(std::span<const double> x) const;
};

/// Coordinate descent with soft-thresholding on internally standardized
/// features: minimizes (1/2n)||y - ȳ - Zβ||² + λ||β||₁ until the largest
/// coefficient change in a sweep is below `tol`.
LassoFit lasso_fit(const Matrix& x, std::span<const double> y, double lambda, double tol = 1e-8,
                   int max_sweeps = 100000);

/// Smallest λ at which every standardized coefficient is zero:
/// max_j |Z_jᵀ(y - ȳ)| / n.
double lasso_lambda_max(const Matrix& x, std::span<const double> y);

struct TreeParams {
  int max_depth = -1;  // < 0: unlimited
  std::size_t min_leaf = 1;
  std::size_t max_features = 0;  // 0: all features
};

/// CART regression tree with variance-reduction splits. When fewer than
/// max_features sampled features give a valid split, further features are
/// tried before the node becomes a leaf.
class RegressionTree {
 public:
  void fit(const Matrix& x, std::span<const double> y, std::span<const std::size_t> rows,
           const TreeParams& params, Rng& rng);
  double predict(std::span<const double> x) const;
  std::size_t node_count() const { return nodes_.size(); }

  nlohmann::json to_json() const;

 private:
  struct Node {
    int feature = -1;  // -1: leaf
    double threshold = 0.0;
    double value = 0.0;
    int left = -1;
    int right = -1;
  };
  int grow(const Matrix& x, std::span<const double> y, std::vector<std::size_t>& rows,
           std::size_t begin, std::size_t end, int depth, const TreeParams& params, Rng& rng);
  std::vector<Node> nodes_;
};

struct ForestParams {
  int trees = 100;
  int max_depth = -1;
  std::size_t min_leaf = 1;
  bool bootstrap = true;
  std::size_t max_features = 0;  // 0: floor(sqrt(d))
};

class RandomForest {
 public:
  void fit(const Matrix& x, std::span<const double> y, const ForestParams& params,
           std::uint64_t seed);
  double predict(std::span<const double> x) const;
  std::size_t size() const { return trees_.size(); }

 private:
  std::vector<RegressionTree> trees_;
};

struct BoostParams {
  int rounds = 100;
  double shrinkage = 0.1;
  int max_depth = 3;
  std::size_t min_leaf = 1;
};

/// Squared-error gradient boosting: each round fits a tree to the residuals.
class BoostedTrees {
 public:
  void fit(const Matrix& x, std::span<const double> y, const BoostParams& params,
           std::uint64_t seed);
  double predict(std::span<const double> x) const;
  /// Training MSE after initialization and after each round.
  const std::vector<double>& loss_trace() const { return loss_trace_; }

 private:
  double base_ = 0.0;
  double shrinkage_ = 0.1;
  std::vector<RegressionTree> trees_;
  std::vector<double> loss_trace_;
};

enum class ModelKind { Naive, Lasso, Forest, Boosted };

std::string_view kind_name(ModelKind kind);
ModelKind kind_from_name(std::string_view name);

/// Union of the tunable settings of every regressor kind.
struct Hyperparams {
  double lambda = 0.0;
  int trees = 100;
  int max_depth = -1;
  std::size_t min_leaf = 1;
  int rounds = 100;
  double shrinkage = 0.1;

  std::string label(ModelKind kind) const;
};

std::vector<Hyperparams> default_grid(ModelKind kind);

/// One independent single-output regressor per target column.
class BaselineModel {
 public:
  ModelKind kind = ModelKind::Lasso;
  Hyperparams params;

  static BaselineModel fit(ModelKind kind, const Hyperparams& params, const Matrix& x,
                           const Matrix& y, std::uint64_t seed);
  Matrix predict(const Matrix& x) const;
  nlohmann::json to_json() const;

 private:
  std::vector<LassoFit> lasso_;
  std::vector<RandomForest> forest_;
  std::vector<BoostedTrees> boosted_;
};

/// Row indices per fold, from a seeded shuffle.
std::vector<std::vector<std::size_t>> make_folds(std::size_t rows, int folds, std::uint64_t seed);

struct CvResult {
  std::size_t best_index = 0;
  Hyperparams best;
  std::vector<double> mean_rmse;  // per grid point, in grid order
};

/// Exhaustive grid search minimizing mean fold RMSE (ties → first in grid).
CvResult grid_search_cv(ModelKind kind, std::span<const Hyperparams> grid, const Matrix& x,
                        const Matrix& y, int folds, std::uint64_t seed);

}  // namespace scenecast::baselines
