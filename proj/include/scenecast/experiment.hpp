#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "scenecast/config.hpp"
#include "scenecast/csv.hpp"
#include "scenecast/gnn.hpp"
#include "scenecast/graph.hpp"
#include "scenecast/ingest.hpp"
#include "scenecast/metrics.hpp"
#include "scenecast/profiling.hpp"
#include "scenecast/scenes.hpp"

namespace scenecast::experiment {

/// Raw inputs of one city, before filtering.
struct CityInputs {
  ingest::Dataset dataset;
  ingest::LoadReport report;
  ingest::CensusTables census;
  ingest::DimensionCodebook codebook;
  /// May be empty; centroids are then averaged from venue coordinates.
  ingest::CentroidTable centroids;
};

CityInputs load_inputs(const RunConfig& config);

struct ProfileResult {
  std::vector<std::pair<int, double>> coherence_by_k;
  profiling::TopicModel topics;
  profiling::GroupModel groups;
};

/// Profiling stage: documents → topic count selection → k-means groups.
ProfileResult profile_users(const ingest::Dataset& dataset, const RunConfig& config);

/// Everything the experiment cells read. Immutable once prepared.
struct CityData {
  std::string city;
  ingest::Dataset dataset;  // filtered
  ingest::CensusTables census;
  ingest::DimensionCodebook codebook;
  ingest::CentroidTable centroids;
  std::vector<std::string> fsas;
  scenes::SceneTable scenes;
  std::optional<ProfileResult> profile;
  /// Year → graph with every feature block present.
  std::map<int, graph::MobilityGraph> graphs;
};

/// Filters, scores scenes, optionally profiles users, and builds every
/// yearly graph. Profiling runs only when `with_groups` is set; without it
/// graphs carry no group counts.
CityData prepare_city(CityInputs inputs, const RunConfig& config, bool with_groups);

/// Centroids for the given FSAs: from the table when present, else the mean
/// of the FSA's venue coordinates.
ingest::CentroidTable fsa_centroids(const ingest::Dataset& dataset,
                                    const ingest::CentroidTable& table);

struct ExperimentPlan {
  std::vector<std::string> scenarios;  // GNN runs, one per scenario name
  std::vector<std::string> baselines;  // naive, lasso, forest, boosted
  std::vector<int> test_years;
  int reps = 25;
  std::uint64_t base_seed = 0;
  int first_year = 2011;
  gnn::TrainConfig train;
  int cv_folds = 5;

  static ExperimentPlan from_config(const RunConfig& config);
  bool needs_groups() const;
  /// Row labels in report order: scenarios, then baseline display names.
  std::vector<std::string> labels() const;
};

struct Cell {
  std::string city;
  std::string label;
  bool gnn = false;
  int test_year = 0;
  int repetition = 0;
  std::uint64_t seed = 0;
};

/// Enumerates cells in report order.
std::vector<Cell> plan_cells(const ExperimentPlan& plan, const std::vector<std::string>& cities);

/// Seed of one cell: derived from the base seed and the cell's identity.
std::uint64_t cell_seed(std::uint64_t base_seed, const std::string& city, const std::string& label,
                        int test_year, int repetition);

struct RunSample {
  Cell cell;
  double rmse = 0.0;
  std::vector<double> fsa_rmse;  // aligned with the city's FSA list
};

struct RmseReport {
  std::vector<std::string> labels;
  std::map<std::string, std::vector<std::string>> fsas;  // city → FSAs
  std::map<std::string, std::map<std::string, metrics::Region>> regions;
  std::vector<RunSample> samples;
};

using ProgressFn = std::function<void(const RunSample&, std::size_t done, std::size_t total)>;

/// Runs every cell on the work pool. Each cell trains on all years before
/// its test year and predicts the test year from the year before.
RmseReport run_experiment(const ExperimentPlan& plan, const std::vector<const CityData*>& cities,
                          std::size_t workers, const ProgressFn& progress = {});

/// Prediction for one cell (n × 15, rows in the city's FSA order).
Matrix run_cell(const ExperimentPlan& plan, const CityData& city, const Cell& cell);

struct SummaryRow {
  std::string city;
  std::string label;
  int test_year = 0;  // 0: pooled over test years
  std::size_t n = 0;
  double mean = 0.0;
  std::optional<double> half_width;  // absent when n < 2
};

/// Per (city, label, test year) and pooled per (city, label).
std::vector<SummaryRow> summarize(const RmseReport& report);

struct FsaRow {
  std::string city;
  std::string label;
  std::string fsa;
  int test_year = 0;  // 0: mean of the per-year means
  double mean_rmse = 0.0;
  metrics::Region region = metrics::Region::East;
};

std::vector<FsaRow> per_fsa(const RmseReport& report);

struct RegionRow {
  std::string city;
  std::string label;
  metrics::Region region = metrics::Region::East;
  std::size_t fsas = 0;
  double mean_rmse = 0.0;
};

std::vector<RegionRow> region_summary(const std::vector<FsaRow>& rows);

void write_results_csv(std::ostream& out, const RmseReport& report, const std::string& hash);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows,
                       const std::string& hash);
void write_per_fsa_csv(std::ostream& out, const std::vector<FsaRow>& rows, const std::string& hash);
void write_per_fsa_by_year_csv(std::ostream& out, const std::vector<FsaRow>& rows,
                               const std::string& hash);
void write_region_csv(std::ostream& out, const std::vector<RegionRow>& rows,
                      const std::string& hash);

/// Rebuilds the sample list (without per-FSA errors) from results.csv.
std::vector<RunSample> read_results_csv(const std::filesystem::path& path);

}  // namespace scenecast::experiment
