#include "scenecast/graph.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "scenecast/error.hpp"

namespace scenecast::graph {

using nlohmann::json;
using nlohmann::ordered_json;

const Edge* MobilityGraph::find_edge(int a, int b) const {
  if (a > b) std::swap(a, b);
  auto it = std::lower_bound(edges.begin(), edges.end(), std::pair{a, b},
                             [](const Edge& e, const std::pair<int, int>& key) {
                               return std::pair{e.i, e.j} < key;
                             });
  if (it == edges.end() || it->i != a || it->j != b) return nullptr;
  return &*it;
}

const std::array<Scenario, 8>& all_scenarios() {
  static const std::array<Scenario, 8> kScenarios = {{
      {"Area info + mobility + group profile", true, true, true},
      {"Area info + mobility", true, true, false},
      {"Area info + group profile", true, false, true},
      {"Area info", true, false, false},
      {"Mobility + group profile", false, true, true},
      {"Mobility", false, true, false},
      {"Group profile", false, false, true},
      {"None", false, false, false},
  }};
  return kScenarios;
}

const Scenario& scenario_by_name(std::string_view name) {
  auto fold = [](std::string_view s) {
    std::string out;
    for (char c : s) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return out;
  };
  const auto key = fold(name);
  for (const auto& s : all_scenarios()) {
    if (fold(s.name) == key) return s;
  }
  throw Error("unknown scenario '" + std::string(name) + "'");
}

MobilityGraph build_year_graph(const ingest::Dataset& dataset, int year,
                               const std::map<std::string, int>& group_of_user,
                               std::size_t group_count, const ingest::CensusTables* census,
                               const scenes::SceneTable& scene_table) {
  MobilityGraph g;
  g.city = dataset.city;
  g.year = year;
  g.vertices = dataset.fsas();
  g.census_width = census ? kCensusWidth : 0;
  g.group_count = group_count;
  const std::size_t n = g.vertices.size();

  std::map<std::string, int, std::less<>> vertex_of;
  for (std::size_t v = 0; v < n; ++v) vertex_of.emplace(g.vertices[v], static_cast<int>(v));

  g.vertex_features = Matrix(n, g.vertex_width());
  for (std::size_t v = 0; v < n; ++v) {
    const auto& cell = scene_table.cell(year, g.vertices[v]);
    for (std::size_t d = 0; d < kDimensionCount; ++d) g.vertex_features(v, d) = cell.dims[d];
    if (census) {
      const auto& row = census->for_year(year, g.vertices[v]);
      for (std::size_t d = 0; d < kCensusWidth; ++d) {
        g.vertex_features(v, kDimensionCount + d) = row[d];
      }
    }
  }

  std::map<std::string, std::set<int>> visited;
  for (const auto& r : dataset.reviews) {
    if (r.year != year) continue;
    const auto* venue = dataset.find_venue(r.venue_id);
    if (!venue) continue;
    visited[r.user_id].insert(vertex_of.at(venue->fsa));
  }

  std::map<std::pair<int, int>, std::vector<double>> acc;
  for (const auto& [user, fsas] : visited) {
    if (fsas.size() < 2) continue;
    int group = -1;
    if (auto it = group_of_user.find(user); it != group_of_user.end()) {
      group = it->second;
      if (group < 0 || static_cast<std::size_t>(group) >= group_count) {
        throw DataError("user " + user + " has group " + std::to_string(group) +
                        " outside [0, " + std::to_string(group_count) + ")");
      }
    }
    const std::vector<int> list(fsas.begin(), fsas.end());
    for (std::size_t a = 0; a < list.size(); ++a) {
      for (std::size_t b = a + 1; b < list.size(); ++b) {
        auto& f = acc[{list[a], list[b]}];
        if (f.empty()) f.assign(1 + group_count, 0.0);
        f[0] += 1.0;
        if (group >= 0) f[1 + group] += 1.0;
      }
    }
  }
  g.edges.reserve(acc.size());
  for (auto& [key, features] : acc) g.edges.push_back(Edge{key.first, key.second, std::move(features)});
  return g;
}

MobilityGraph apply_scenario(const MobilityGraph& graph, const Scenario& scenario) {
  MobilityGraph out;
  out.city = graph.city;
  out.year = graph.year;
  out.vertices = graph.vertices;
  out.census_width = scenario.area ? graph.census_width : 0;
  out.group_count = scenario.group ? graph.group_count : 0;
  const std::size_t n = graph.vertices.size();
  out.vertex_features = Matrix(n, out.vertex_width());
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t c = 0; c < out.vertex_width(); ++c) out.vertex_features(v, c) = graph.vertex_features(v, c);
  }
  out.edges.reserve(graph.edges.size());
  for (const auto& e : graph.edges) {
    Edge m{e.i, e.j, {}};
    m.features.push_back(scenario.mobility ? e.features[0] : 1.0);
    for (std::size_t g = 0; g < out.group_count; ++g) m.features.push_back(e.features[1 + g]);
    out.edges.push_back(std::move(m));
  }
  return out;
}

MobilityGraph permute_vertices(const MobilityGraph& graph, const std::vector<int>& order) {
  const std::size_t n = graph.vertices.size();
  if (order.size() != n) throw Error("permutation size mismatch");
  std::vector<int> new_index(n, -1);
  for (std::size_t r = 0; r < n; ++r) new_index[order[r]] = static_cast<int>(r);
  MobilityGraph out = graph;
  for (std::size_t r = 0; r < n; ++r) {
    out.vertices[r] = graph.vertices[order[r]];
    for (std::size_t c = 0; c < graph.vertex_features.cols(); ++c) {
      out.vertex_features(r, c) = graph.vertex_features(order[r], c);
    }
  }
  for (auto& e : out.edges) {
    int a = new_index[e.i];
    int b = new_index[e.j];
    if (a > b) std::swap(a, b);
    e.i = a;
    e.j = b;
  }
  std::sort(out.edges.begin(), out.edges.end(),
            [](const Edge& x, const Edge& y) { return std::pair{x.i, x.j} < std::pair{y.i, y.j}; });
  return out;
}

ordered_json to_json(const MobilityGraph& g) {
  ordered_json j;
  j["city"] = g.city;
  j["year"] = g.year;
  j["vertices"] = g.vertices;
  ordered_json rows = ordered_json::array();
  for (std::size_t r = 0; r < g.vertex_features.rows(); ++r) {
    rows.push_back(std::vector<double>(g.vertex_features.row(r).begin(), g.vertex_features.row(r).end()));
  }
  j["vertex_features"] = std::move(rows);
  ordered_json edges = ordered_json::array();
  for (const auto& e : g.edges) {
    ordered_json oe;
    oe["i"] = e.i;
    oe["j"] = e.j;
    oe["weight"] = e.features[0];
    oe["group_counts"] = std::vector<double>(e.features.begin() + 1, e.features.end());
    edges.push_back(std::move(oe));
  }
  j["edges"] = std::move(edges);
  j["group_count"] = g.group_count;
  return j;
}

MobilityGraph graph_from_json(const json& j) {
  MobilityGraph g;
  g.city = j.at("city").get<std::string>();
  g.year = j.at("year").get<int>();
  g.vertices = j.at("vertices").get<std::vector<std::string>>();
  const auto& rows = j.at("vertex_features");
  const std::size_t n = g.vertices.size();
  if (rows.size() != n) throw ParseError("graph JSON: vertex_features row count mismatch");
  const std::size_t width = n ? rows[0].size() : kDimensionCount;
  if (width != kDimensionCount && width != kDimensionCount + kCensusWidth) {
    throw ParseError("graph JSON: unexpected vertex feature width " + std::to_string(width));
  }
  g.census_width = width - kDimensionCount;
  g.vertex_features = Matrix(n, width);
  for (std::size_t r = 0; r < n; ++r) {
    if (rows[r].size() != width) throw ParseError("graph JSON: ragged vertex_features");
    for (std::size_t c = 0; c < width; ++c) g.vertex_features(r, c) = rows[r][c].get<double>();
  }
  bool first = true;
  for (const auto& e : j.at("edges")) {
    Edge edge;
    edge.i = e.at("i").get<int>();
    edge.j = e.at("j").get<int>();
    if (edge.i < 0 || edge.j < 0 || static_cast<std::size_t>(edge.j) >= n || edge.i >= edge.j) {
      throw ParseError("graph JSON: edge endpoints must satisfy 0 <= i < j < n");
    }
    edge.features.push_back(e.at("weight").get<double>());
    const auto counts = e.at("group_counts").get<std::vector<double>>();
    if (first) {
      g.group_count = counts.size();
      first = false;
    } else if (counts.size() != g.group_count) {
      throw ParseError("graph JSON: inconsistent group_counts width");
    }
    edge.features.insert(edge.features.end(), counts.begin(), counts.end());
    g.edges.push_back(std::move(edge));
  }
  if (auto it = j.find("group_count"); it != j.end()) {
    const auto declared = it->get<std::size_t>();
    if (!first && declared != g.group_count) {
      throw ParseError("graph JSON: group_count disagrees with edge group_counts");
    }
    g.group_count = declared;
  }
  std::sort(g.edges.begin(), g.edges.end(),
            [](const Edge& x, const Edge& y) { return std::pair{x.i, x.j} < std::pair{y.i, y.j}; });
  return g;
}

}  // namespace scenecast::graph
