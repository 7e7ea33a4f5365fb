#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "scenecast/matrix.hpp"
#include "scenecast/seeding.hpp"

namespace scenecast::autodiff {

/// Row-wise normalization epsilon. Small enough that normalized rows have
/// unit variance to ~1e-10 for rows with variance of order one.
inline constexpr double kLayerNormEps = 1e-10;

/// A trainable matrix. Lives outside any tape; gradients accumulate into
/// `grad` on every backward pass until zero_grad().
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}
  void zero_grad() { grad.fill(0.0); }
};

/// Handle to a node on a Tape.
struct Var {
  int id = -1;
};

using IndexList = std::shared_ptr<const std::vector<int>>;

/// Reverse-mode tape over dense matrices. Forward ops append nodes in
/// topological order; backward() walks them once in reverse. Every forward
/// result is checked for NaN/Inf.
class Tape {
 public:
  Var constant(Matrix value);
  /// Records `p` by reference: its value must not change until backward(),
  /// which adds straight into p.grad.
  Var param(Parameter& p);

  const Matrix& value(Var v) const {
    const Node& n = nodes_[v.id];
    return n.param ? n.param->value : n.value;
  }
  std::size_t size() const { return nodes_.size(); }

  Var add(Var a, Var b);
  /// a (n×c) + bias (1×c) broadcast over rows.
  Var add_row(Var a, Var bias);
  Var add_scalar(Var a, double c);
  Var scale(Var a, double s);
  Var matmul(Var a, Var b);
  /// max(x, 0); the subgradient at exactly 0 is 0.
  Var relu(Var a);
  /// Row-wise (x - mean) / sqrt(var + eps), then * gain + shift (both 1×c).
  Var layer_norm(Var x, Var gain, Var shift, double eps = kLayerNormEps);
  /// Inverted dropout. Identity (same Var) when !training or p == 0.
  Var dropout(Var x, double p, Rng& rng, bool training);
  /// Row gather: out[r] = a[index[r]].
  Var gather_rows(Var a, IndexList index);
  /// Per-channel softmax aggregation of edge messages into `vertices` rows:
  /// out[v][c] = sum over edges e into v of softmax_e(t * m[e][c]) * m[e][c],
  /// where t is the 1×1 `temperature`. Vertices with no edges get 0.
  Var softmax_aggregate(Var messages, Var temperature, IndexList destination,
                        std::size_t vertices);
  /// mean((pred - target)^2) as a 1×1 node.
  Var mse(Var pred, const Matrix& target);
  /// sum(a ⊙ weights) as a 1×1 node.
  Var weighted_sum(Var a, const Matrix& weights);

  /// Accumulates d(loss)/d(parameter) into every Parameter reached, then
  /// clears the tape. Returns the loss value. Throws unless loss is 1×1.
  double backward(Var loss);

  /// Drops every node; their buffers are kept for reuse by later ops.
  void clear();

 private:
  enum class Op {
    Leaf,
    Param,
    Add,
    AddRow,
    AddScalar,
    Scale,
    MatMul,
    Relu,
    LayerNorm,
    Dropout,
    Gather,
    SoftmaxAggregate,
    Mse,
    WeightedSum,
  };

  struct Node {
    Op op = Op::Leaf;
    int a = -1;
    int b = -1;
    int c = -1;
    double scalar = 0.0;
    bool needs_grad = false;
    Matrix value;
    Matrix grad;
    Matrix saved;                   // op-specific intermediate (x̂, mask, weights, target)
    std::vector<double> saved_row;  // op-specific per-row data (inverse std)
    IndexList index;
    std::size_t count = 0;
    Parameter* param = nullptr;
  };

  Var push(Node node, const char* op_name);
  bool needs(int id) const { return nodes_[id].needs_grad; }
  Matrix& grad_of(int id);
  void backprop(Node& node);

  Matrix fresh(std::size_t rows, std::size_t cols, bool zero = true);
  Matrix copy_of(const Matrix& m);
  void recycle(Matrix& m);

  std::vector<Node> nodes_;
  std::multimap<std::size_t, std::vector<double>> pool_;  // capacity → spare buffer
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moment estimates plus the step counter.
struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update using each parameter's accumulated grad.
/// State is lazily sized on the first call.
void adam_step(std::span<Parameter* const> params, AdamState& state, const AdamConfig& config);

/// Checkpoint form: [{name, rows, cols, values}] with row-major values.
nlohmann::ordered_json parameters_to_json(std::span<const Parameter* const> params);
/// Loads values into existing parameters, matching by name and shape.
void parameters_from_json(const nlohmann::json& j, std::span<Parameter* const> params);

}  // namespace scenecast::autodiff
