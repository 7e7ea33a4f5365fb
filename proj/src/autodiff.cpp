#include "scenecast/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <Eigen/Core>

#include "scenecast/error.hpp"

namespace scenecast::autodiff {

namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<RowMajor> view(Matrix& m) {
  return {m.data().data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}

Eigen::Map<const RowMajor> view(const Matrix& m) {
  return {m.data().data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}

// x - x is NaN exactly when x is NaN or infinite.
bool all_finite(const std::vector<double>& xs) {
  double acc = 0.0;
  for (double x : xs) acc += x - x;
  return acc == 0.0;
}

}  // namespace

Var Tape::push(Node node, const char* op_name) {
  if (!all_finite(node.value.data())) {
    throw Error(std::string("non-finite value produced by ") + op_name);
  }
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Matrix& Tape::grad_of(int id) {
  Node& n = nodes_[id];
  if (n.param) return n.param->grad;
  if (n.grad.size() != n.value.size() || n.grad.rows() != n.value.rows()) {
    n.grad = fresh(n.value.rows(), n.value.cols());
  }
  return n.grad;
}

Matrix Tape::fresh(std::size_t rows, std::size_t cols, bool zero) {
  const std::size_t n = rows * cols;
  std::vector<double> buf;
  auto it = pool_.lower_bound(n);
  if (it != pool_.end()) {
    buf = std::move(it->second);
    pool_.erase(it);
  }
  if (zero) {
    buf.assign(n, 0.0);
  } else {
    buf.resize(n);
  }
  return Matrix(rows, cols, std::move(buf));
}

Matrix Tape::copy_of(const Matrix& m) {
  Matrix out = fresh(m.rows(), m.cols(), false);
  std::copy(m.data().begin(), m.data().end(), out.data().begin());
  return out;
}

void Tape::recycle(Matrix& m) {
  if (m.data().capacity() > 0) {
    const std::size_t cap = m.data().capacity();
    pool_.emplace(cap, std::move(m.data()));
  }
}

void Tape::clear() {
  for (auto& n : nodes_) {
    for (Matrix* m : {&n.value, &n.grad, &n.saved}) recycle(*m);
  }
  // Buffers handed in from outside (constants) would otherwise pile up.
  const std::size_t limit = 3 * nodes_.size() + 64;
  while (pool_.size() > limit) pool_.erase(pool_.begin());
  nodes_.clear();
}

Var Tape::constant(Matrix value) {
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(value);
  return push(std::move(n), "constant");
}

Var Tape::param(Parameter& p) {
  if (!all_finite(p.value.data())) throw Error("non-finite value in parameter " + p.name);
  if (!p.grad.same_shape(p.value)) p.grad = Matrix(p.value.rows(), p.value.cols());
  Node n;
  n.op = Op::Param;
  n.param = &p;
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::add(Var a, Var b) {
  const Matrix& x = value(a);
  const Matrix& y = value(b);
  if (!x.same_shape(y)) throw Error("add: shape mismatch " + shape(x) + " vs " + shape(y));
  Node n;
  n.op = Op::Add;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = needs(a.id) || needs(b.id);
  n.value = copy_of(x);
  auto& out = n.value.data();
  const auto& yd = y.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += yd[i];
  return push(std::move(n), "add");
}

Var Tape::add_row(Var a, Var bias) {
  const Matrix& x = value(a);
  const Matrix& b = value(bias);
  if (b.rows() != 1 || b.cols() != x.cols()) {
    throw Error("add_row: bias " + shape(b) + " does not fit " + shape(x));
  }
  Node n;
  n.op = Op::AddRow;
  n.a = a.id;
  n.b = bias.id;
  n.needs_grad = needs(a.id) || needs(bias.id);
  n.value = copy_of(x);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = n.value.row(r);
    for (std::size_t c = 0; c < x.cols(); ++c) row[c] += b(0, c);
  }
  return push(std::move(n), "add_row");
}

Var Tape::add_scalar(Var a, double c) {
  Node n;
  n.op = Op::AddScalar;
  n.a = a.id;
  n.scalar = c;
  n.needs_grad = needs(a.id);
  n.value = copy_of(value(a));
  for (auto& v : n.value.data()) v += c;
  return push(std::move(n), "add_scalar");
}

Var Tape::scale(Var a, double s) {
  Node n;
  n.op = Op::Scale;
  n.a = a.id;
  n.scalar = s;
  n.needs_grad = needs(a.id);
  n.value = copy_of(value(a));
  for (auto& v : n.value.data()) v *= s;
  return push(std::move(n), "scale");
}

Var Tape::matmul(Var a, Var b) {
  const Matrix& x = value(a);
  const Matrix& y = value(b);
  if (x.cols() != y.rows()) throw Error("matmul: shape mismatch " + shape(x) + " * " + shape(y));
  Node n;
  n.op = Op::MatMul;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = needs(a.id) || needs(b.id);
  n.value = fresh(x.rows(), y.cols(), false);
  view(n.value).noalias() = view(x) * view(y);
  return push(std::move(n), "matmul");
}

Var Tape::relu(Var a) {
  Node n;
  n.op = Op::Relu;
  n.a = a.id;
  n.needs_grad = needs(a.id);
  n.value = copy_of(value(a));
  for (auto& v : n.value.data()) v = v > 0.0 ? v : 0.0;
  return push(std::move(n), "relu");
}

Var Tape::layer_norm(Var x, Var gain, Var shift, double eps) {
  const Matrix& in = value(x);
  const Matrix& g = value(gain);
  const Matrix& s = value(shift);
  if (g.rows() != 1 || g.cols() != in.cols() || !s.same_shape(g)) {
    throw Error("layer_norm: gain/shift must be 1x" + std::to_string(in.cols()));
  }
  Node n;
  n.op = Op::LayerNorm;
  n.a = x.id;
  n.b = gain.id;
  n.c = shift.id;
  n.needs_grad = needs(x.id) || needs(gain.id) || needs(shift.id);
  const std::size_t rows = in.rows();
  const std::size_t cols = in.cols();
  n.saved = fresh(rows, cols);
  n.saved_row.resize(rows);
  n.value = fresh(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    auto xr = in.row(r);
    double mean = 0.0;
    for (double v : xr) mean += v;
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (double v : xr) var += (v - mean) * (v - mean);
    var /= static_cast<double>(cols);
    const double inv_std = 1.0 / std::sqrt(var + eps);
    n.saved_row[r] = inv_std;
    for (std::size_t c = 0; c < cols; ++c) {
      const double xhat = (xr[c] - mean) * inv_std;
      n.saved(r, c) = xhat;
      n.value(r, c) = xhat * g(0, c) + s(0, c);
    }
  }
  return push(std::move(n), "layer_norm");
}

Var Tape::dropout(Var x, double p, Rng& rng, bool training) {
  if (!(p >= 0.0 && p < 1.0)) throw Error("dropout: p must be in [0, 1)");
  if (!training || p == 0.0) return x;
  Node n;
  n.op = Op::Dropout;
  n.a = x.id;
  n.needs_grad = needs(x.id);
  const Matrix& in = value(x);
  n.saved = fresh(in.rows(), in.cols());
  n.value = copy_of(in);
  const double keep_scale = 1.0 / (1.0 - p);
  auto& mask = n.saved.data();
  auto& out = n.value.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = rng.uniform() < p ? 0.0 : keep_scale;
    out[i] *= mask[i];
  }
  return push(std::move(n), "dropout");
}

Var Tape::gather_rows(Var a, IndexList index) {
  const Matrix& in = value(a);
  Node n;
  n.op = Op::Gather;
  n.a = a.id;
  n.needs_grad = needs(a.id);
  n.value = fresh(index->size(), in.cols());
  for (std::size_t r = 0; r < index->size(); ++r) {
    const int src = (*index)[r];
    if (src < 0 || static_cast<std::size_t>(src) >= in.rows()) throw Error("gather_rows: index out of range");
    std::copy(in.row(src).begin(), in.row(src).end(), n.value.row(r).begin());
  }
  n.index = std::move(index);
  return push(std::move(n), "gather_rows");
}

Var Tape::softmax_aggregate(Var messages, Var temperature, IndexList destination,
                            std::size_t vertices) {
  const Matrix& m = value(messages);
  const Matrix& t = value(temperature);
  if (t.rows() != 1 || t.cols() != 1) throw Error("softmax_aggregate: temperature must be 1x1");
  if (destination->size() != m.rows()) throw Error("softmax_aggregate: one destination per message");
  const double beta = t(0, 0);
  const std::size_t edges = m.rows();
  const std::size_t width = m.cols();

  Node n;
  n.op = Op::SoftmaxAggregate;
  n.a = messages.id;
  n.b = temperature.id;
  n.needs_grad = needs(messages.id) || needs(temperature.id);
  n.count = vertices;
  n.value = fresh(vertices, width);
  n.saved = fresh(edges, width);  // softmax weights

  // Per destination, per channel max for a stable exp.
  Matrix max_score(vertices, width, -std::numeric_limits<double>::infinity());
  for (std::size_t e = 0; e < edges; ++e) {
    const int v = (*destination)[e];
    if (v < 0 || static_cast<std::size_t>(v) >= vertices) throw Error("softmax_aggregate: bad destination");
    for (std::size_t c = 0; c < width; ++c) {
      max_score(v, c) = std::max(max_score(v, c), beta * m(e, c));
    }
  }
  Matrix denom(vertices, width);
  for (std::size_t e = 0; e < edges; ++e) {
    const int v = (*destination)[e];
    for (std::size_t c = 0; c < width; ++c) {
      const double w = std::exp(beta * m(e, c) - max_score(v, c));
      n.saved(e, c) = w;
      denom(v, c) += w;
    }
  }
  for (std::size_t e = 0; e < edges; ++e) {
    const int v = (*destination)[e];
    for (std::size_t c = 0; c < width; ++c) {
      const double w = n.saved(e, c) / denom(v, c);
      n.saved(e, c) = w;
      n.value(v, c) += w * m(e, c);
    }
  }
  n.index = std::move(destination);
  return push(std::move(n), "softmax_aggregate");
}

Var Tape::mse(Var pred, const Matrix& target) {
  const Matrix& p = value(pred);
  if (!p.same_shape(target)) throw Error("mse: shape mismatch " + shape(p) + " vs " + shape(target));
  if (p.empty()) throw Error("mse: empty input");
  Node n;
  n.op = Op::Mse;
  n.a = pred.id;
  n.needs_grad = needs(pred.id);
  n.saved = copy_of(target);
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p.data()[i] - target.data()[i];
    s += d * d;
  }
  n.value = Matrix(1, 1, s / static_cast<double>(p.size()));
  return push(std::move(n), "mse");
}

Var Tape::weighted_sum(Var a, const Matrix& weights) {
  const Matrix& x = value(a);
  if (!x.same_shape(weights)) throw Error("weighted_sum: shape mismatch");
  Node n;
  n.op = Op::WeightedSum;
  n.a = a.id;
  n.needs_grad = needs(a.id);
  n.saved = weights;
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x.data()[i] * weights.data()[i];
  n.value = Matrix(1, 1, s);
  return push(std::move(n), "weighted_sum");
}

double Tape::backward(Var loss) {
  if (loss.id < 0 || static_cast<std::size_t>(loss.id) >= nodes_.size()) throw Error("backward: bad loss");
  const Matrix& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1) throw Error("backward: loss must be a scalar, got " + shape(lv));
  const double result = lv(0, 0);
  if (needs(loss.id)) {
    grad_of(loss.id)(0, 0) = 1.0;
    for (int id = loss.id; id >= 0; --id) {
      Node& node = nodes_[id];
      if (!node.needs_grad || node.op == Op::Param || node.grad.empty()) continue;
      backprop(node);
    }
  }
  clear();
  return result;
}

void Tape::backprop(Node& node) {
  const Matrix& dy = node.grad;
  switch (node.op) {
    case Op::Leaf:
    case Op::Param:
      return;
    case Op::Add: {
      for (int id : {node.a, node.b}) {
        if (!needs(id)) continue;
        auto& g = grad_of(id).data();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += dy.data()[i];
      }
      return;
    }
    case Op::AddRow: {
      if (needs(node.a)) {
        auto& g = grad_of(node.a).data();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += dy.data()[i];
      }
      if (needs(node.b)) {
        Matrix& gb = grad_of(node.b);
        for (std::size_t r = 0; r < dy.rows(); ++r) {
          for (std::size_t c = 0; c < dy.cols(); ++c) gb(0, c) += dy(r, c);
        }
      }
      return;
    }
    case Op::AddScalar:
    case Op::Scale: {
      const double f = node.op == Op::Scale ? node.scalar : 1.0;
      auto& g = grad_of(node.a).data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += f * dy.data()[i];
      return;
    }
    case Op::MatMul: {
      const Matrix& x = value(Var{node.a});
      const Matrix& y = value(Var{node.b});
      if (needs(node.a)) view(grad_of(node.a)).noalias() += view(dy) * view(y).transpose();
      if (needs(node.b)) view(grad_of(node.b)).noalias() += view(x).transpose() * view(dy);
      return;
    }
    case Op::Relu: {
      const auto& out = node.value.data();
      auto& g = grad_of(node.a).data();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (out[i] > 0.0) g[i] += dy.data()[i];
      }
      return;
    }
    case Op::LayerNorm: {
      const Matrix& xhat = node.saved;
      const Matrix& gain = value(Var{node.b});
      const std::size_t rows = xhat.rows();
      const std::size_t cols = xhat.cols();
      if (needs(node.b) || needs(node.c)) {
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) {
            if (needs(node.b)) grad_of(node.b)(0, c) += dy(r, c) * xhat(r, c);
            if (needs(node.c)) grad_of(node.c)(0, c) += dy(r, c);
          }
        }
      }
      if (needs(node.a)) {
        Matrix& gx = grad_of(node.a);
        const double inv_n = 1.0 / static_cast<double>(cols);
        for (std::size_t r = 0; r < rows; ++r) {
          double sum_d = 0.0;
          double sum_dx = 0.0;
          for (std::size_t c = 0; c < cols; ++c) {
            const double d = dy(r, c) * gain(0, c);
            sum_d += d;
            sum_dx += d * xhat(r, c);
          }
          const double inv_std = node.saved_row[r];
          for (std::size_t c = 0; c < cols; ++c) {
            const double d = dy(r, c) * gain(0, c);
            gx(r, c) += inv_std * (d - inv_n * sum_d - xhat(r, c) * inv_n * sum_dx);
          }
        }
      }
      return;
    }
    case Op::Dropout: {
      auto& g = grad_of(node.a).data();
      const auto& mask = node.saved.data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += mask[i] * dy.data()[i];
      return;
    }
    case Op::Gather: {
      Matrix& g = grad_of(node.a);
      const auto& idx = *node.index;
      for (std::size_t r = 0; r < idx.size(); ++r) {
        auto gr = g.row(idx[r]);
        auto dr = dy.row(r);
        for (std::size_t c = 0; c < gr.size(); ++c) gr[c] += dr[c];
      }
      return;
    }
    case Op::SoftmaxAggregate: {
      // out_v = sum_e w_e m_e with w = softmax(beta m):
      //   d out_v / d m_e  = w_e (1 + beta (m_e - out_v))
      //   d out_v / d beta = sum_e w_e m_e (m_e - out_v)
      const Matrix& m = value(Var{node.a});
      const double beta = value(Var{node.b})(0, 0);
      const Matrix& w = node.saved;
      const auto& dst = *node.index;
      const bool need_m = needs(node.a);
      const bool need_beta = needs(node.b);
      double dbeta = 0.0;
      Matrix* gm = need_m ? &grad_of(node.a) : nullptr;
      for (std::size_t e = 0; e < dst.size(); ++e) {
        const int v = dst[e];
        for (std::size_t c = 0; c < m.cols(); ++c) {
          const double diff = m(e, c) - node.value(v, c);
          const double up = dy(v, c) * w(e, c);
          if (need_m) (*gm)(e, c) += up * (1.0 + beta * diff);
          if (need_beta) dbeta += up * m(e, c) * diff;
        }
      }
      if (need_beta) grad_of(node.b)(0, 0) += dbeta;
      return;
    }
    case Op::Mse: {
      const Matrix& p = value(Var{node.a});
      auto& g = grad_of(node.a).data();
      const double f = 2.0 * dy(0, 0) / static_cast<double>(p.size());
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += f * (p.data()[i] - node.saved.data()[i]);
      return;
    }
    case Op::WeightedSum: {
      auto& g = grad_of(node.a).data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += dy(0, 0) * node.saved.data()[i];
      return;
    }
  }
}

void adam_step(std::span<Parameter* const> params, AdamState& state, const AdamConfig& config) {
  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (const auto* p : params) {
      state.m.emplace_back(p->value.rows(), p->value.cols());
      state.v.emplace_back(p->value.rows(), p->value.cols());
    }
    state.step = 0;
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);
  const double step_size = config.lr / bc1;
  const double inv_bc2 = 1.0 / bc2;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto value = view(params[i]->value).array();
    const auto grad = view(params[i]->grad).array();
    auto m = view(state.m[i]).array();
    auto v = view(state.v[i]).array();
    m = config.beta1 * m + (1.0 - config.beta1) * grad;
    v = config.beta2 * v + (1.0 - config.beta2) * grad.square();
    value -= step_size * m / ((v * inv_bc2).sqrt() + config.eps);
  }
}

nlohmann::ordered_json parameters_to_json(std::span<const Parameter* const> params) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto* p : params) {
    nlohmann::ordered_json j;
    j["name"] = p->name;
    j["rows"] = p->value.rows();
    j["cols"] = p->value.cols();
    j["values"] = p->value.data();
    arr.push_back(std::move(j));
  }
  return arr;
}

void parameters_from_json(const nlohmann::json& j, std::span<Parameter* const> params) {
  std::map<std::string, const nlohmann::json*> by_name;
  for (const auto& e : j) by_name[e.at("name").get<std::string>()] = &e;
  for (auto* p : params) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) throw ParseError("checkpoint has no parameter '" + p->name + "'");
    const auto& e = *it->second;
    if (e.at("rows").get<std::size_t>() != p->value.rows() ||
        e.at("cols").get<std::size_t>() != p->value.cols()) {
      throw ParseError("checkpoint shape mismatch for '" + p->name + "'");
    }
    auto values = e.at("values").get<std::vector<double>>();
    if (values.size() != p->value.size()) throw ParseError("checkpoint size mismatch for '" + p->name + "'");
    p->value = Matrix(p->value.rows(), p->value.cols(), std::move(values));
    p->grad = Matrix(p->value.rows(), p->value.cols());
  }
}

}  // namespace scenecast::autodiff
