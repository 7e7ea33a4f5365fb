#include "scenecast/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "scenecast/error.hpp"

namespace scenecast::gnn {

using autodiff::IndexList;

FeatureNormalizer FeatureNormalizer::fit(std::span<const graph::MobilityGraph* const> graphs) {
  FeatureNormalizer norm;
  if (graphs.empty() || graphs.front()->census_width == 0) return norm;
  const std::size_t width = graphs.front()->census_width;
  std::vector<double> sum(width, 0.0), sum_sq(width, 0.0);
  double count = 0.0;
  for (const auto* g : graphs) {
    if (g->census_width != width) throw Error("normalizer: inconsistent census width");
    for (std::size_t r = 0; r < g->vertex_features.rows(); ++r) {
      for (std::size_t c = 0; c < width; ++c) {
        const double x = g->vertex_features(r, kDimensionCount + c);
        sum[c] += x;
        sum_sq[c] += x * x;
      }
      count += 1.0;
    }
  }
  norm.census_mean.resize(width);
  norm.census_std.resize(width);
  for (std::size_t c = 0; c < width; ++c) {
    const double mean = sum[c] / count;
    const double var = std::max(0.0, sum_sq[c] / count - mean * mean);
    norm.census_mean[c] = mean;
    norm.census_std[c] = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  return norm;
}

GraphInput FeatureNormalizer::encode(const graph::MobilityGraph& g) const {
  GraphInput in;
  in.vertices = g.vertices.size();
  in.vertex_features = g.vertex_features;
  if (g.census_width > 0) {
    if (census_mean.size() != g.census_width) {
      throw Error("normalizer was fitted without census columns");
    }
    for (std::size_t r = 0; r < in.vertices; ++r) {
      for (std::size_t c = 0; c < g.census_width; ++c) {
        double& x = in.vertex_features(r, kDimensionCount + c);
        x = (x - census_mean[c]) / census_std[c];
      }
    }
  }
  const std::size_t width = g.edge_width();
  in.edge_features = Matrix(2 * g.edges.size(), width);
  auto src = std::make_shared<std::vector<int>>();
  auto dst = std::make_shared<std::vector<int>>();
  src->reserve(2 * g.edges.size());
  dst->reserve(2 * g.edges.size());
  std::size_t row = 0;
  for (const auto& e : g.edges) {
    for (int dir = 0; dir < 2; ++dir) {
      src->push_back(dir == 0 ? e.i : e.j);
      dst->push_back(dir == 0 ? e.j : e.i);
      for (std::size_t c = 0; c < width; ++c) in.edge_features(row, c) = std::log1p(e.features[c]);
      ++row;
    }
  }
  in.source = std::move(src);
  in.destination = std::move(dst);
  return in;
}

namespace {

Linear make_linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Matrix w(in, out), b(1, out);
  for (auto& x : w.data()) x = rng.uniform(-bound, bound);
  for (auto& x : b.data()) x = rng.uniform(-bound, bound);
  return Linear{Parameter(name + ".weight", std::move(w)), Parameter(name + ".bias", std::move(b))};
}

}  // namespace

Var linear(Tape& tape, Var x, Linear& layer) {
  return tape.add_row(tape.matmul(x, tape.param(layer.weight)), tape.param(layer.bias));
}

Var genconv_forward(Tape& tape, Var hidden, Var encoded_edges, const GraphInput& topology,
                    BlockParams& params, double message_eps) {
  Var source_rows = tape.gather_rows(hidden, topology.source);
  Var messages = tape.add_scalar(tape.relu(tape.add(source_rows, encoded_edges)), message_eps);
  Var aggregate = tape.softmax_aggregate(messages, tape.param(params.temperature),
                                         topology.destination, topology.vertices);
  Var combined = tape.add(hidden, aggregate);
  return linear(tape, tape.relu(linear(tape, combined, params.mlp_in)), params.mlp_out);
}

Var block_forward(Tape& tape, Var hidden, Var encoded_edges, const GraphInput& topology,
                  BlockParams& params, double dropout, double message_eps, Rng& rng,
                  bool training) {
  Var h = tape.layer_norm(hidden, tape.param(params.norm_gain), tape.param(params.norm_shift));
  h = tape.dropout(tape.relu(h), dropout, rng, training);
  h = genconv_forward(tape, h, encoded_edges, topology, params, message_eps);
  return tape.add(hidden, h);
}

GnnModel::GnnModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  if (config.hidden == 0 || config.vertex_in == 0 || config.edge_in == 0) {
    throw Error("model widths must be positive");
  }
  Rng rng(seed);
  const std::size_t h = config.hidden;
  vertex_encoder_ = make_linear("vertex_encoder", config.vertex_in, h, rng);
  edge_encoder_ = make_linear("edge_encoder", config.edge_in, h, rng);
  for (std::size_t b = 0; b < config.blocks; ++b) {
    const std::string p = "block" + std::to_string(b);
    BlockParams bp;
    bp.norm_gain = Parameter(p + ".norm.gain", Matrix(1, h, 1.0));
    bp.norm_shift = Parameter(p + ".norm.shift", Matrix(1, h, 0.0));
    bp.temperature = Parameter(p + ".conv.temperature", Matrix(1, 1, 1.0));
    bp.mlp_in = make_linear(p + ".conv.mlp_in", h, 2 * h, rng);
    bp.mlp_out = make_linear(p + ".conv.mlp_out", 2 * h, h, rng);
    blocks_.push_back(std::move(bp));
  }
  head_ = make_linear("head", h, config.outputs, rng);
}

std::vector<Parameter*> GnnModel::parameters() {
  std::vector<Parameter*> out = {&vertex_encoder_.weight, &vertex_encoder_.bias,
                                 &edge_encoder_.weight, &edge_encoder_.bias};
  for (auto& b : blocks_) {
    out.insert(out.end(), {&b.norm_gain, &b.norm_shift});
    if (config_.learn_temperature) out.push_back(&b.temperature);
    out.insert(out.end(), {&b.mlp_in.weight, &b.mlp_in.bias, &b.mlp_out.weight, &b.mlp_out.bias});
  }
  out.insert(out.end(), {&head_.weight, &head_.bias});
  return out;
}

std::vector<const Parameter*> GnnModel::parameters() const {
  auto mut = const_cast<GnnModel*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

Var GnnModel::forward(Tape& tape, const GraphInput& input, bool training, Rng& rng) {
  if (input.vertex_features.cols() != config_.vertex_in) {
    throw Error("vertex feature width " + std::to_string(input.vertex_features.cols()) +
                " does not match model input width " + std::to_string(config_.vertex_in));
  }
  if (input.edge_features.cols() != config_.edge_in) {
    throw Error("edge feature width " + std::to_string(input.edge_features.cols()) +
                " does not match model input width " + std::to_string(config_.edge_in));
  }
  Var h = linear(tape, tape.constant(input.vertex_features), vertex_encoder_);
  Var e = linear(tape, tape.constant(input.edge_features), edge_encoder_);
  for (auto& block : blocks_) {
    h = block_forward(tape, h, e, input, block, config_.dropout, config_.message_eps, rng, training);
  }
  return linear(tape, h, head_);
}

Matrix GnnModel::predict(const GraphInput& input) {
  Tape tape;
  Rng unused(0);
  Var out = forward(tape, input, false, unused);
  return tape.value(out);
}

nlohmann::ordered_json GnnModel::to_json() const {
  nlohmann::ordered_json j;
  j["vertex_in"] = config_.vertex_in;
  j["edge_in"] = config_.edge_in;
  j["hidden"] = config_.hidden;
  j["blocks"] = config_.blocks;
  j["outputs"] = config_.outputs;
  j["dropout"] = config_.dropout;
  j["message_eps"] = config_.message_eps;
  j["learn_temperature"] = config_.learn_temperature;
  j["parameters"] = autodiff::parameters_to_json(parameters());
  return j;
}

GnnModel GnnModel::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.vertex_in = j.at("vertex_in").get<std::size_t>();
  c.edge_in = j.at("edge_in").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.blocks = j.at("blocks").get<std::size_t>();
  c.outputs = j.at("outputs").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.message_eps = j.at("message_eps").get<double>();
  c.learn_temperature = j.at("learn_temperature").get<bool>();
  GnnModel m(c, 0);
  auto params = m.parameters();
  if (!c.learn_temperature) {
    for (auto& b : m.blocks_) params.push_back(&b.temperature);
  }
  autodiff::parameters_from_json(j.at("parameters"), params);
  return m;
}

TrainResult train(const std::map<int, graph::MobilityGraph>& graphs,
                  const scenes::SceneTable& scene_table, std::span<const int> training_years,
                  const TrainConfig& config, const EpochHook& hook) {
  if (config.epochs < 0) throw Error("epochs must be >= 0");
  if (!(config.dropout >= 0.0 && config.dropout < 1.0)) throw Error("dropout must be in [0, 1)");
  std::vector<int> years(training_years.begin(), training_years.end());
  std::sort(years.begin(), years.end());
  years.erase(std::unique(years.begin(), years.end()), years.end());
  if (years.size() < 2) throw Error("training needs at least two years");

  struct Pair {
    int input_year;
    int target_year;
    GraphInput input;
    Matrix target;
  };
  std::vector<const graph::MobilityGraph*> inputs;
  for (std::size_t i = 0; i + 1 < years.size(); ++i) {
    if (years[i + 1] != years[i] + 1) continue;
    auto it = graphs.find(years[i]);
    if (it == graphs.end()) throw Error("no graph for training year " + std::to_string(years[i]));
    if (!scene_table.has_year(years[i + 1])) {
      throw Error("no target scenes for year " + std::to_string(years[i + 1]));
    }
    inputs.push_back(&it->second);
  }
  if (inputs.empty()) throw Error("training years contain no consecutive pair");

  FeatureNormalizer normalizer = FeatureNormalizer::fit(inputs);
  std::vector<Pair> pairs;
  for (const auto* g : inputs) {
    pairs.push_back(Pair{g->year, g->year + 1, normalizer.encode(*g),
                         scene_table.matrix(g->year + 1, g->vertices)});
  }

  ModelConfig mc;
  mc.vertex_in = inputs.front()->vertex_width();
  mc.edge_in = inputs.front()->edge_width();
  mc.hidden = config.hidden;
  mc.blocks = config.blocks;
  mc.dropout = config.dropout;
  TrainResult result{GnnModel(mc, derive_seed(config.seed, "gnn/init")), normalizer, {}};

  auto params = result.model.parameters();
  autodiff::AdamState adam;
  const autodiff::AdamConfig adam_config{config.lr};
  Rng dropout_rng(derive_seed(config.seed, "gnn/dropout"));
  Tape tape;
  result.trace.reserve(static_cast<std::size_t>(config.epochs) * pairs.size());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const std::size_t first = result.trace.size();
    for (const auto& pair : pairs) {
      for (auto* p : params) p->zero_grad();
      Var pred = result.model.forward(tape, pair.input, true, dropout_rng);
      const double loss = tape.backward(tape.mse(pred, pair.target));
      autodiff::adam_step(params, adam, adam_config);
      result.trace.push_back(LossRecord{epoch, pair.input_year, pair.target_year, loss});
    }
    if (hook && !hook(epoch, std::span(result.trace).subspan(first))) break;
  }
  return result;
}

Matrix predict(TrainResult& trained, const graph::MobilityGraph& input_graph) {
  return trained.model.predict(trained.normalizer.encode(input_graph));
}

}  // namespace scenecast::gnn
