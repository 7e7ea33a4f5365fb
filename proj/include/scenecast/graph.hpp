#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "scenecast/ingest.hpp"
#include "scenecast/matrix.hpp"
#include "scenecast/scenes.hpp"

namespace scenecast::graph {

/// Undirected edge with i < j. features = [weight, group counts...].
struct Edge {
  int i = 0;
  int j = 0;
  std::vector<double> features;

  double weight() const { return features.front(); }
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Yearly FSA co-review graph. Vertex rows are [T | D] with the 15 scene
/// dimensions first; D (census) is present only when census_width == 7.
struct MobilityGraph {
  std::string city;
  int year = 0;
  std::vector<std::string> vertices;
  Matrix vertex_features;
  std::vector<Edge> edges;
  std::size_t census_width = 0;
  std::size_t group_count = 0;

  std::size_t vertex_width() const { return kDimensionCount + census_width; }
  std::size_t edge_width() const { return 1 + group_count; }
  /// Edge lookup in either orientation; nullptr when absent.
  const Edge* find_edge(int a, int b) const;
};

/// One row of the scenario table: which optional feature blocks are used.
struct Scenario {
  std::string_view name;
  bool area = false;      // vertex census block D
  bool mobility = false;  // edge weight M
  bool group = false;     // edge group counts C
};

const std::array<Scenario, 8>& all_scenarios();
/// Case-insensitive lookup; throws Error for unknown names.
const Scenario& scenario_by_name(std::string_view name);

/// Builds the graph for `year`: every user contributes one unit of weight to
/// each pair of distinct FSAs they reviewed that year, and one unit to their
/// group's count. Users without a group add weight only. Pass census = nullptr
/// to omit the D block.
MobilityGraph build_year_graph(const ingest::Dataset& dataset, int year,
                               const std::map<std::string, int>& group_of_user,
                               std::size_t group_count, const ingest::CensusTables* census,
                               const scenes::SceneTable& scene_table);

/// Removes disabled feature blocks. The edge set never changes; with M off
/// every weight becomes 1.
MobilityGraph apply_scenario(const MobilityGraph& graph, const Scenario& scenario);

/// Same graph with vertices reordered: new vertex r is old vertex order[r].
MobilityGraph permute_vertices(const MobilityGraph& graph, const std::vector<int>& order);

nlohmann::ordered_json to_json(const MobilityGraph& graph);
MobilityGraph graph_from_json(const nlohmann::json& j);

}  // namespace scenecast::graph
