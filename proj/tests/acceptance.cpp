// Acceptance run: one PASS / FAIL / SKIP line per criterion.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "planted.hpp"
#include "scenecast/baselines.hpp"
#include "scenecast/cli.hpp"
#include "scenecast/csv.hpp"
#include "scenecast/experiment.hpp"
#include "scenecast/gnn.hpp"
#include "scenecast/graph.hpp"
#include "scenecast/metrics.hpp"
#include "scenecast/profiling.hpp"
#include "scenecast/scenes.hpp"
#include "scenecast/synthetic.hpp"
#include "scenecast/work_pool.hpp"
#include "support.hpp"

using namespace scenecast;
using autodiff::Parameter;
using autodiff::Tape;
using autodiff::Var;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

struct Verdict {
  enum Kind { Pass, Fail, Skip } kind;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

autodiff::IndexList indices(std::vector<int> v) {
  return std::make_shared<const std::vector<int>>(std::move(v));
}

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (auto& x : m.data()) x = rng.uniform(lo, hi);
  return m;
}

// 1 ---------------------------------------------------------------------------

Verdict gradient_integrity() {
  const auto start = Clock::now();
  using testing::gradient_error;
  using testing::random_param;
  Rng rng(101);
  std::map<std::string, double> errors;
  {
    std::vector<Parameter> ps = {random_param(rng, 4, 3), random_param(rng, 3, 5)};
    errors["matmul"] = gradient_error(ps, [](Tape& t, std::vector<Var>& v) { return t.matmul(v[0], v[1]); }, 1);
  }
  {
    std::vector<Parameter> ps = {random_param(rng, 3, 4), random_param(rng, 3, 4), random_param(rng, 1, 4)};
    errors["add"] = gradient_error(ps, [](Tape& t, std::vector<Var>& v) { return t.add(v[0], v[1]); }, 2);
    errors["add_row"] = gradient_error(ps, [](Tape& t, std::vector<Var>& v) { return t.add_row(v[0], v[2]); }, 3);
    errors["add_scalar"] =
        gradient_error(ps, [](Tape& t, std::vector<Var>& v) { return t.add_scalar(v[0], 0.3); }, 4);
    errors["scale"] = gradient_error(ps, [](Tape& t, std::vector<Var>& v) { return t.scale(v[0], 1.7); }, 5);
  }
  {
    std::vector<Parameter> ps = {random_param(rng, 5, 4, 0.05)};
    errors["relu"] = gradient_error(ps, [](Tape& t, std::vector<Var>& v) { return t.relu(v[0]); }, 6);
  }
  {
    std::vector<Parameter> ps = {random_param(rng, 4, 6), random_param(rng, 1, 6), random_param(rng, 1, 6)};
    errors["layer_norm"] =
        gradient_error(ps, [](Tape& t, std::vector<Var>& v) { return t.layer_norm(v[0], v[1], v[2]); }, 7);
  }
  {
    std::vector<Parameter> ps = {random_param(rng, 4, 5)};
    errors["dropout"] = gradient_error(ps, [](Tape& t, std::vector<Var>& v) {
      Rng fixed(3);
      return t.dropout(v[0], 0.4, fixed, true);
    }, 8);
  }
  {
    std::vector<Parameter> ps = {random_param(rng, 3, 4)};
    auto src = indices({2, 0, 0, 1, 2});
    errors["gather_rows"] = gradient_error(ps, [&](Tape& t, std::vector<Var>& v) { return t.gather_rows(v[0], src); }, 9);
  }
  {
    std::vector<Parameter> ps = {random_param(rng, 7, 3), Parameter("t", Matrix{{0.8}})};
    auto dst = indices({0, 0, 1, 2, 2, 2, 0});
    errors["softmax_aggregate"] = gradient_error(ps, [&](Tape& t, std::vector<Var>& v) {
      return t.softmax_aggregate(v[0], v[1], dst, 4);
    }, 10);
  }
  {
    Matrix target = random_matrix(rng, 3, 4);
    std::vector<Parameter> ps = {random_param(rng, 3, 4)};
    errors["mse"] = gradient_error(ps, [&](Tape& t, std::vector<Var>& v) { return t.mse(v[0], target); }, 11);
  }
  double op_worst = 0.0;
  std::string worst_op;
  for (const auto& [name, e] : errors) {
    if (e >= op_worst) {
      op_worst = e;
      worst_op = name;
    }
  }

  // Full five-block model on a 3-vertex graph, dropout active with a fixed mask.
  gnn::ModelConfig mc;
  mc.vertex_in = 5;
  mc.edge_in = 2;
  mc.hidden = 4;
  mc.blocks = 5;
  mc.outputs = 3;
  mc.dropout = 0.2;
  gnn::GnnModel model(mc, 11);
  gnn::GraphInput in;
  in.vertices = 3;
  in.source = indices({0, 1, 0, 2});
  in.destination = indices({1, 0, 2, 0});
  in.vertex_features = random_matrix(rng, 3, 5);
  in.edge_features = random_matrix(rng, 4, 2, 0.0, 2.0);
  const Matrix weights = random_matrix(rng, 3, 3);
  auto loss = [&](bool record) {
    Tape tape;
    Rng drop(5);
    Var l = tape.weighted_sum(model.forward(tape, in, true, drop), weights);
    if (!record) return tape.value(l)(0, 0);
    for (auto* p : model.parameters()) p->zero_grad();
    return tape.backward(l);
  };
  loss(true);
  std::vector<Matrix*> values;
  for (auto* p : model.parameters()) values.push_back(&p->value);
  const auto numeric = oracle::central_differences(values, [&] { return loss(false); }, 1e-6);
  double model_worst = 0.0;
  const auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    model_worst = std::max(model_worst, oracle::max_relative_error(params[i]->grad, numeric[i]));
  }
  const double secs = seconds_since(start);
  const bool ok = op_worst < 1e-6 && model_worst < 1e-4 && secs < 60.0;
  return {ok ? Verdict::Pass : Verdict::Fail,
          "ops max rel err " + fmt(op_worst) + " (" + worst_op + "), model " + fmt(model_worst) + ", " +
              fmt(secs, 3) + " s"};
}

// 2 ---------------------------------------------------------------------------

struct PairCity {
  std::map<int, graph::MobilityGraph> graphs;
  scenes::SceneTable scenes;
};

PairCity four_vertex_pair(std::uint64_t seed) {
  Rng rng(seed);
  PairCity c;
  const std::vector<std::string> names = {"T2A", "T2B", "T2C", "T2D"};
  for (int year : {2015, 2016}) {
    scenes::SceneSlice slice;
    for (const auto& f : names) {
      DimensionVector v;
      for (auto& x : v) x = rng.uniform(1.0, 5.0);
      slice[f] = scenes::SceneCell{v, 1, false};
    }
    c.scenes.set_year(year, slice);
  }
  graph::MobilityGraph g;
  g.year = 2015;
  g.vertices = names;
  g.vertex_features = c.scenes.matrix(2015, names);
  g.edges = {{0, 1, {3.0}}, {1, 2, {1.0}}, {2, 3, {5.0}}, {0, 2, {2.0}}};
  c.graphs[2015] = g;
  return c;
}

Verdict memorization() {
  const auto start = Clock::now();
  PairCity city = four_vertex_pair(6);
  gnn::TrainConfig cfg;
  cfg.epochs = 2000;
  cfg.lr = 1e-3;
  cfg.dropout = 0.0;
  cfg.seed = 1;
  auto trained = gnn::train(city.graphs, city.scenes, std::vector<int>{2015, 2016}, cfg);
  const Matrix pred = gnn::predict(trained, city.graphs.at(2015));
  const Matrix target = city.scenes.matrix(2016, city.graphs.at(2015).vertices);
  const double mse = std::pow(metrics::rmse(pred, target), 2);
  const double secs = seconds_since(start);
  return {mse < 1e-3 && secs < 120.0 ? Verdict::Pass : Verdict::Fail,
          "training-pair MSE " + fmt(mse) + " after 2000 epochs at lr 1e-3, dropout off, " + fmt(secs, 3) + " s"};
}

// 3 ---------------------------------------------------------------------------

Verdict equivariance() {
  Rng rng(303);
  const std::size_t n = 9;
  graph::MobilityGraph g;
  for (std::size_t i = 0; i < n; ++i) g.vertices.push_back(testing::fsa_code(static_cast<int>(i)));
  g.vertex_features = random_matrix(rng, n, kDimensionCount, 1.0, 5.0);
  for (int i = 0; i < static_cast<int>(n); ++i) {
    for (int j = i + 1; j < static_cast<int>(n); ++j) {
      if (rng.uniform() < 0.4) g.edges.push_back({i, j, {std::floor(rng.uniform(1.0, 20.0))}});
    }
  }
  gnn::GnnModel model(gnn::ModelConfig{}, 17);
  const gnn::FeatureNormalizer norm;
  const Matrix base = model.predict(norm.encode(g));
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order.begin(), order.end());
    const Matrix moved = model.predict(norm.encode(graph::permute_vertices(g, order)));
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < base.cols(); ++c) {
        worst = std::max(worst, std::abs(moved(r, c) - base(order[r], c)));
      }
    }
  }
  return {worst < 1e-9 ? Verdict::Pass : Verdict::Fail, "max |delta| " + fmt(worst) + " over 20 permutations"};
}

// 4 ---------------------------------------------------------------------------

Verdict graph_oracle() {
  Rng rng(404);
  int mismatches = 0;
  std::string first;
  std::size_t edges = 0;
  for (int trial = 0; trial < 100; ++trial) {
    ingest::Dataset ds = testing::random_dataset(rng);
    for (int y = 2011; y <= 2013; ++y) {
      for (const auto& [fsa, idx] : ds.fsa_venues()) ds.reviews.push_back({"anchor", ds.venues[idx[0]].venue_id, y});
    }
    ds.users.push_back({"anchor"});
    ds.reindex();
    const auto book = testing::random_codebook(rng, 8);
    const auto census = testing::random_census(rng, ds.fsas());
    const auto table = scenes::build_scene_table(ds, book, 2011, 2013);
    const int k = 1 + static_cast<int>(rng.index(5));
    const auto groups = testing::random_groups(rng, ds, k);
    const int year = 2011 + static_cast<int>(rng.index(3));
    const auto g = graph::build_year_graph(ds, year, groups, k, &census, table);
    edges += g.edges.size();
    const auto why = oracle::graph_mismatch(g, oracle::brute_force_edges(ds, year, groups, k));
    if (!why.empty()) {
      if (mismatches++ == 0) first = why;
    }
  }
  return {mismatches == 0 ? Verdict::Pass : Verdict::Fail,
          std::to_string(100 - mismatches) + "/100 datasets exact (" + std::to_string(edges) + " edges)" +
              (first.empty() ? "" : ", first mismatch: " + first)};
}

// 5 ---------------------------------------------------------------------------

Verdict scene_oracle() {
  Rng rng(505);
  double worst = 0.0;
  bool in_bounds = true;
  for (int trial = 0; trial < 100; ++trial) {
    const int categories = 2 + static_cast<int>(rng.index(12));
    const auto book = testing::random_codebook(rng, categories);
    std::vector<ingest::Venue> venues;
    const int n = 1 + static_cast<int>(rng.index(40));
    for (int b = 0; b < n; ++b) {
      std::vector<std::string> cats;
      const int m = 1 + static_cast<int>(rng.index(5));
      for (int c = 0; c < m; ++c) cats.push_back(testing::category_name(static_cast<int>(rng.index(categories))));
      venues.push_back({"v" + std::to_string(b), "T2P", cats, std::nullopt, std::nullopt});
    }
    const auto got = scenes::score_fsa(std::span<const ingest::Venue>(venues), book);
    const auto want = oracle::scene_double_loop(venues, book);
    for (std::size_t i = 0; i < kDimensionCount; ++i) {
      worst = std::max(worst, std::abs(got[i] - want[i]));
      if (got[i] < 1.0 || got[i] > 5.0) in_bounds = false;
    }
  }
  return {worst <= 1e-12 && in_bounds ? Verdict::Pass : Verdict::Fail,
          "max |delta| " + fmt(worst) + ", bounds " + (in_bounds ? "held" : "violated")};
}

// 6 ---------------------------------------------------------------------------

Verdict profiling_recovery() {
  int topic_hits = 0, blob_hits = 0;
  double min_mass = 1.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto planted = testing::planted_two_topics(seed);
    const auto model = profiling::fit_lda(planted.corpus, 2, derive_seed(seed, "lda"), 300);
    const double mass = testing::aligned_word_mass(model, planted);
    min_mass = std::min(min_mass, mass);
    if (mass >= 0.9) ++topic_hits;

    const auto blobs = testing::planted_three_blobs(seed);
    const auto groups = profiling::cluster_users(blobs.embedding, 2, 15, derive_seed(seed, "kmeans"));
    std::vector<int> found;
    for (const auto& id : blobs.embedding.user_ids) found.push_back(groups.assignment.at(id));
    if (groups.k == 3 && oracle::purity(blobs.labels, found) == 1.0) ++blob_hits;
  }
  return {topic_hits >= 9 && blob_hits >= 9 ? Verdict::Pass : Verdict::Fail,
          "topics recovered " + std::to_string(topic_hits) + "/10 (min mass " + fmt(min_mass) + "), blobs " +
              std::to_string(blob_hits) + "/10"};
}

// 7 ---------------------------------------------------------------------------

Verdict lasso_correctness() {
  Rng rng(707);
  double worst = 0.0;
  bool all_zero = true;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 40 + rng.index(60), d = 1 + rng.index(10);
    Matrix x = random_matrix(rng, n, d);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = rng.uniform(-0.5, 0.5);
      for (std::size_t j = 0; j < d; ++j) y[i] += rng.uniform(-2.0, 2.0) * x(i, j) * (j % 2 ? 1.0 : 0.3);
    }
    const auto want = oracle::normal_equations(x, y);
    const auto fit = baselines::lasso_fit(x, y, 0.0, 1e-13);
    worst = std::max(worst, std::abs(fit.intercept - want[0]));
    for (std::size_t j = 0; j < d; ++j) worst = std::max(worst, std::abs(fit.weights[j] - want[j + 1]));
    const double top = baselines::lasso_lambda_max(x, y);
    for (double lambda : {top, 2.0 * top}) {
      for (double w : baselines::lasso_fit(x, y, lambda).weights) all_zero = all_zero && w == 0.0;
    }
  }
  return {worst < 1e-6 && all_zero ? Verdict::Pass : Verdict::Fail,
          "lambda=0 max |delta| vs normal equations " + fmt(worst) + ", weights at lambda_max " +
              (all_zero ? "all exactly zero" : "NOT all zero")};
}

// 8, 9, 10 ----------------------------------------------------------------------

struct OrderingRun {
  experiment::RmseReport report;
  std::map<std::string, double> means;  // label → mean RMSE over reps
};

OrderingRun run_synthetic(synthetic::Mode mode, std::uint64_t seed, const std::vector<std::string>& scenarios,
                          const std::vector<std::string>& baselines) {
  synthetic::SyntheticConfig sc;
  sc.mode = mode;
  sc.city = std::string(synthetic::mode_name(mode)) + "_" + std::to_string(seed);
  auto synth = synthetic::generate_synthetic_city(sc, seed);

  RunConfig cfg;
  cfg.city = sc.city;
  cfg.seed = seed;
  cfg.topics_min = 1;
  cfg.topics_max = 6;
  cfg.lda_iterations = 200;
  cfg.k_min = 2;
  cfg.k_max = 8;
  experiment::ExperimentPlan plan;
  plan.scenarios = scenarios;
  plan.baselines = baselines;
  plan.test_years = {2016};
  plan.reps = 5;
  plan.base_seed = seed;
  plan.first_year = cfg.first_year;
  plan.train.epochs = 500;
  experiment::CityInputs in{synth.dataset, {}, synth.census, synth.codebook, synth.centroids};
  const auto city = experiment::prepare_city(std::move(in), cfg, plan.needs_groups());

  OrderingRun out;
  out.report = experiment::run_experiment(plan, {&city}, worker_count());
  for (const auto& row : experiment::summarize(out.report)) {
    if (row.test_year == 0) out.means[row.label] = row.mean;
  }
  return out;
}


struct OrderingResults {
  std::vector<OrderingRun> area;
  std::vector<OrderingRun> flow;
  double seconds = 0.0;
};

OrderingResults run_ordering() {
  const auto start = Clock::now();
  OrderingResults r;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    r.area.push_back(run_synthetic(synthetic::Mode::AreaDriven, seed, {"Area info", "None"}, {"naive", "lasso"}));
    std::cerr << "  area_driven seed " << seed << ": Area info " << r.area.back().means["Area info"] << ", None "
              << r.area.back().means["None"] << ", Naive " << r.area.back().means["Naive"] << ", Lasso "
              << r.area.back().means["Lasso"] << '\n';
    r.flow.push_back(run_synthetic(synthetic::Mode::FlowDriven, seed, {"Group profile", "None"}, {}));
    std::cerr << "  flow_driven seed " << seed << ": Group profile " << r.flow.back().means["Group profile"]
              << ", None " << r.flow.back().means["None"] << '\n';
  }
  r.seconds = seconds_since(start);
  return r;
}

Verdict scenario_ordering(const OrderingResults& r) {
  int area_wins = 0, flow_wins = 0;
  for (const auto& run : r.area) area_wins += run.means.at("Area info") < run.means.at("None");
  for (const auto& run : r.flow) flow_wins += run.means.at("Group profile") < run.means.at("None");
  const bool ok = area_wins >= 4 && flow_wins >= 4 && r.seconds < 900.0;
  return {ok ? Verdict::Pass : Verdict::Fail,
          "area_driven Area info < None in " + std::to_string(area_wins) + "/5 seeds, flow_driven Group profile < None in " +
              std::to_string(flow_wins) + "/5 seeds, " + fmt(r.seconds, 4) + " s"};
}

Verdict naive_gap(const OrderingResults& r) {
  int wins = 0;
  double worst_ratio = 1e300;
  for (const auto& run : r.area) {
    double best = 1e300;
    for (const auto& [label, mean] : run.means) {
      if (label != "Naive") best = std::min(best, mean);
    }
    const double naive = run.means.at("Naive");
    wins += naive > best;
    worst_ratio = std::min(worst_ratio, naive / best);
  }
  return {wins == 5 ? Verdict::Pass : Verdict::Fail,
          "naive > best model in " + std::to_string(wins) + "/5 seeds (smallest ratio " + fmt(worst_ratio) + ")"};
}

std::vector<std::vector<std::string>> csv_rows(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

Verdict harness_exactness(const OrderingResults& r) {
  const double e_rmse = std::abs(metrics::rmse(Matrix{{1.0, 2.0}}, Matrix{{3.0, 4.0}}) - 2.0);
  const auto ci = metrics::ci95(std::vector<double>{1, 2, 3, 4});
  const double want_hw = 3.182446305284263 * std::sqrt(5.0 / 3.0) / 2.0;
  const double e_ci = std::max(std::abs(ci.mean - 2.5), std::abs(ci.half_width - want_hw));

  // Write and reread the CSVs of every ordering run, recomputing each mean.
  const auto dir = testing::scratch_dir("acceptance_harness");
  std::size_t checked = 0, wrong = 0;
  auto check_report = [&](const experiment::RmseReport& report) {
    {
      std::ofstream out(dir / "results.csv");
      experiment::write_results_csv(out, report, "acceptance");
    }
    {
      std::ofstream out(dir / "summary.csv");
      experiment::write_summary_csv(out, experiment::summarize(report), "acceptance");
    }
    std::map<std::tuple<std::string, std::string, std::string>, std::vector<double>> groups;
    const auto results = csv_rows(dir / "results.csv");
    for (std::size_t i = 1; i < results.size(); ++i) {
      const auto& row = results[i];
      const double v = parse_double(row[4], "rmse");
      groups[{row[0], row[1], row[2]}].push_back(v);
      groups[{row[0], row[1], "all"}].push_back(v);
    }
    const auto summary = csv_rows(dir / "summary.csv");
    for (std::size_t i = 1; i < summary.size(); ++i) {
      const auto& v = groups.at({summary[i][0], summary[i][1], summary[i][2]});
      const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      ++checked;
      if (parse_double(summary[i][4], "mean") != mean) ++wrong;
    }
  };
  for (const auto& run : r.area) check_report(run.report);
  for (const auto& run : r.flow) check_report(run.report);
  const bool ok = e_rmse < 1e-9 && e_ci < 1e-9 && wrong == 0 && checked > 0;
  return {ok ? Verdict::Pass : Verdict::Fail,
          "rmse err " + fmt(e_rmse) + ", ci95 err " + fmt(e_ci) + " (half-width " + fmt(ci.half_width, 6) + "), " +
              std::to_string(checked - wrong) + "/" + std::to_string(checked) + " summary means exact"};
}

// 11 --------------------------------------------------------------------------

Verdict reproducibility() {
  const auto start = Clock::now();
  std::vector<std::string> files;
  for (const char* name : {"acceptance_repro_a", "acceptance_repro_b"}) {
    const auto dir = testing::scratch_dir(name).string();
    std::ostringstream out, err;
    const std::vector<std::string> common = {"--out", dir, "--seed", "7"};
    std::vector<std::string> synth = {"synth", "--mode", "flow_driven", "--set", "synth.fsas=6",
                                      "--set", "test_years=2017,2018"};
    synth.insert(synth.end(), common.begin(), common.end());
    if (cli_run(synth, out, err) != 0) return {Verdict::Fail, "synth failed: " + err.str()};
    std::vector<std::string> eval = {"evaluate", "--reps", "2", "--epochs", "40",
                                     "--scenario", "None", "--scenario", "Group profile",
                                     "--model", "gnn", "--model", "naive", "--model", "lasso", "--model", "forest",
                                     "--model", "boosted", "--topics-range", "1:4", "--k-range", "2:5",
                                     "--set", "lda_iterations=100", "--set", "hidden=16"};
    eval.insert(eval.end(), common.begin(), common.end());
    if (cli_run(eval, out, err) != 0) return {Verdict::Fail, "evaluate failed: " + err.str()};
    files.push_back(testing::slurp(std::filesystem::path(dir) / "results.csv"));
  }
  const bool same = files[0] == files[1] && !files[0].empty();
  const auto lines = std::count(files[0].begin(), files[0].end(), '\n');
  return {same ? Verdict::Pass : Verdict::Fail,
          std::string(same ? "byte-identical" : "DIFFERENT") + " results.csv (" + std::to_string(lines) + " lines), " +
              fmt(seconds_since(start), 3) + " s"};
}

// 12 --------------------------------------------------------------------------

Verdict real_data() {
  const char* env = std::getenv("SCENECAST_YELP_DIR");
  if (!env || !*env) return {Verdict::Skip, "set SCENECAST_YELP_DIR to the Yelp academic dump to run"};
  const std::filesystem::path dir(env);
  auto file = [&](const char* what) { return dir / (std::string("yelp_academic_dataset_") + what + ".json"); };
  std::string detail;
  bool ok = true;
  const std::map<std::string, std::size_t> want_fsas = {{"Montreal", 14}, {"Calgary", 26}, {"Toronto", 38}};
  for (const auto& [city, fsas] : want_fsas) {
    ingest::LoadOptions opts;
    opts.city = city;
    ingest::LoadReport report;
    const auto ds = ingest::load_dataset(file("business"), file("review"), file("user"), opts, &report);
    const auto kept = ingest::filter_fsas(ds, 30).fsa_venues().size();
    ok = ok && kept == fsas;
    detail += city + " " + std::to_string(kept) + " FSAs";
    if (city == "Calgary") {
      const bool counts = report.venues == 7736 && report.reviews == 97650 && report.users == 34645 &&
                          report.categories == 774;
      ok = ok && counts;
      detail += " (" + std::to_string(report.venues) + "/" + std::to_string(report.reviews) + "/" +
                std::to_string(report.users) + "/" + std::to_string(report.categories) + ")";
    }
    detail += "; ";
  }
  return {ok ? Verdict::Pass : Verdict::Fail, detail};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Verdict()>& check) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {Verdict::Fail, std::string("exception: ") + e.what()};
    }
    const char* tag = v.kind == Verdict::Pass ? "PASS" : v.kind == Verdict::Skip ? "SKIP" : "FAIL";
    if (v.kind == Verdict::Fail) ++failures;
    std::cout << tag << ' ' << id << ' ' << name << ": " << v.detail << std::endl;
  };
  report(1, "gradient integrity", gradient_integrity);
  report(2, "memorization", memorization);
  report(3, "equivariance", equivariance);
  report(4, "graph oracle", graph_oracle);
  report(5, "scene oracle", scene_oracle);
  report(6, "profiling recovery", profiling_recovery);
  report(7, "lasso correctness", lasso_correctness);

  std::optional<OrderingResults> ordering;
  std::string ordering_error;
  try {
    ordering = run_ordering();
  } catch (const std::exception& e) {
    ordering_error = e.what();
  }
  auto needs_ordering = [&](Verdict (*f)(const OrderingResults&)) {
    return [&, f]() -> Verdict {
      if (!ordering) return {Verdict::Fail, "synthetic runs failed: " + ordering_error};
      return f(*ordering);
    };
  };
  report(8, "scenario ordering", needs_ordering(scenario_ordering));
  report(9, "naive gap", needs_ordering(naive_gap));
  report(10, "harness exactness", needs_ordering(harness_exactness));
  report(11, "reproducibility", reproducibility);
  report(12, "real-data conformance", real_data);
  return failures == 0 ? 0 : 1;
}
