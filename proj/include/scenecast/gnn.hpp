#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include <json.hpp>

#include "scenecast/autodiff.hpp"
#include "scenecast/graph.hpp"
#include "scenecast/matrix.hpp"
#include "scenecast/scenes.hpp"

namespace scenecast::gnn {

using autodiff::Parameter;
using autodiff::Tape;
using autodiff::Var;

/// Dense-tensor view of a scenario-masked graph. Each undirected edge
/// appears twice (u→v and v→u) with the same features.
struct GraphInput {
  Matrix vertex_features;
  Matrix edge_features;
  autodiff::IndexList source;
  autodiff::IndexList destination;
  std::size_t vertices = 0;
};

/// Z-scores census columns with statistics from the training graphs; scene
/// columns stay on their raw scale. Edge weight and group counts map to
/// log(1 + x).
struct FeatureNormalizer {
  std::vector<double> census_mean;
  std::vector<double> census_std;

  static FeatureNormalizer fit(std::span<const graph::MobilityGraph* const> graphs);
  GraphInput encode(const graph::MobilityGraph& graph) const;
};

struct Linear {
  Parameter weight;  // in × out
  Parameter bias;    // 1 × out
};

struct BlockParams {
  Parameter norm_gain;
  Parameter norm_shift;
  Parameter temperature;  // 1×1 softmax aggregation temperature
  Linear mlp_in;          // hidden → 2·hidden
  Linear mlp_out;         // 2·hidden → hidden
};

struct ModelConfig {
  std::size_t vertex_in = kDimensionCount;
  std::size_t edge_in = 1;
  std::size_t hidden = 64;
  std::size_t blocks = 5;
  std::size_t outputs = kDimensionCount;
  double dropout = 0.1;
  double message_eps = 1e-7;
  bool learn_temperature = true;
};

Var linear(Tape& tape, Var x, Linear& layer);

/// GENConv: m = ReLU(h[src] + e) + eps, softmax-aggregated per destination,
/// then MLP(h + aggregate).
Var genconv_forward(Tape& tape, Var hidden, Var encoded_edges, const GraphInput& topology,
                    BlockParams& params, double message_eps);

/// Pre-activation residual block: h + GENConv(Dropout(ReLU(LayerNorm(h)))).
Var block_forward(Tape& tape, Var hidden, Var encoded_edges, const GraphInput& topology,
                  BlockParams& params, double dropout, double message_eps, Rng& rng,
                  bool training);

class GnnModel {
 public:
  GnnModel(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  /// Records the full forward pass on `tape`; returns the n × outputs node.
  Var forward(Tape& tape, const GraphInput& input, bool training, Rng& rng);
  /// Eval-mode prediction.
  Matrix predict(const GraphInput& input);

  Linear& vertex_encoder() { return vertex_encoder_; }
  Linear& edge_encoder() { return edge_encoder_; }
  std::vector<BlockParams>& blocks() { return blocks_; }
  Linear& head() { return head_; }

  nlohmann::ordered_json to_json() const;
  static GnnModel from_json(const nlohmann::json& j);

 private:
  ModelConfig config_;
  Linear vertex_encoder_;
  Linear edge_encoder_;
  std::vector<BlockParams> blocks_;
  Linear head_;
};

struct TrainConfig {
  int epochs = 10000;
  double lr = 1e-3;
  double dropout = 0.1;
  std::size_t hidden = 64;
  std::size_t blocks = 5;
  std::uint64_t seed = 0;
};

struct LossRecord {
  int epoch = 0;
  int input_year = 0;
  int target_year = 0;
  double mse = 0.0;
};

/// Called after every epoch with that epoch's records. Alternate protocols
/// (validation-driven selection, early stopping) plug in here; returning
/// false stops training.
using EpochHook = std::function<bool(int epoch, std::span<const LossRecord> records)>;

struct TrainResult {
  GnnModel model;
  FeatureNormalizer normalizer;
  std::vector<LossRecord> trace;
};

/// Supervised pairs (graph of year y → scenes of year y + 1) over consecutive
/// training years; each epoch takes one Adam step per pair in year order.
/// `graphs` must already be scenario-masked.
TrainResult train(const std::map<int, graph::MobilityGraph>& graphs,
                  const scenes::SceneTable& scene_table, std::span<const int> training_years,
                  const TrainConfig& config, const EpochHook& hook = {});

/// Eval-mode forward pass on the input graph (the year before the target).
Matrix predict(TrainResult& trained, const graph::MobilityGraph& input_graph);

}  // namespace scenecast::gnn
