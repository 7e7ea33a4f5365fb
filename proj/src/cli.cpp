#include "scenecast/cli.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "scenecast/config.hpp"
#include "scenecast/error.hpp"
#include "scenecast/experiment.hpp"
#include "scenecast/gnn.hpp"
#include "scenecast/report.hpp"
#include "scenecast/synthetic.hpp"
#include "scenecast/work_pool.hpp"

namespace scenecast {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

struct Flags {
  std::string config;
  std::string out;
  std::string data;
  std::optional<std::uint64_t> seed;
  std::string city;
  std::vector<std::string> scenarios;
  std::vector<std::string> models;
  std::vector<int> test_years;
  std::optional<int> reps;
  std::optional<int> epochs;
  std::string mode;
  std::string k_range;
  std::string topics_range;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "key = value config file (default: <out>/run.cfg when present)");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--data", f.data, "directory holding venues/reviews/users JSONL and census/codebook CSV");
  cmd->add_option("--seed", f.seed, "base seed");
  cmd->add_option("--city", f.city, "city name");
  cmd->add_option("--set", f.sets, "extra key=value override (repeatable)");
}

RunConfig resolve_config(const Flags& f) {
  RunConfig cfg;
  fs::path out_dir = f.out.empty() ? fs::path("out") : fs::path(f.out);
  if (!f.config.empty()) {
    cfg.load_file(f.config);
  } else if (fs::exists(out_dir / "run.cfg")) {
    cfg.load_file(out_dir / "run.cfg");
  }
  if (!f.out.empty()) cfg.out = f.out;
  if (!f.data.empty()) cfg.data_dir = f.data;
  if (f.seed) cfg.seed = *f.seed;
  if (!f.city.empty()) cfg.city = f.city;
  if (!f.scenarios.empty()) cfg.scenarios = f.scenarios;
  if (!f.models.empty()) cfg.models = f.models;
  if (!f.test_years.empty()) cfg.test_years = f.test_years;
  if (f.reps) cfg.reps = *f.reps;
  if (f.epochs) cfg.epochs = *f.epochs;
  if (!f.mode.empty()) cfg.synth.mode = synthetic::mode_from_name(f.mode);
  if (!f.k_range.empty()) cfg.set("k_range", f.k_range);
  if (!f.topics_range.empty()) cfg.set("topics_range", f.topics_range);
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

void write_json(const fs::path& path, const ordered_json& j) { open_out(path) << j.dump(1) << '\n'; }

void write_meta(const RunConfig& cfg, const std::string& stage, const std::string& hash,
                double seconds) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[64];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  ordered_json j;
  j["stage"] = stage;
  j["config_hash"] = hash;
  j["finished_at"] = stamp;
  j["elapsed_seconds"] = seconds;
  j["workers"] = worker_count();
  write_json(cfg.out / ("run_meta_" + stage + ".json"), j);
}

void summary_line(std::ostream& out, ordered_json j) { out << j.dump() << std::endl; }

experiment::CityData prepare(const RunConfig& cfg, bool with_groups) {
  return experiment::prepare_city(experiment::load_inputs(cfg), cfg, with_groups);
}

bool any_group_scenario(const RunConfig& cfg) {
  for (const auto& s : cfg.scenario_names()) {
    if (graph::scenario_by_name(s).group) return true;
  }
  return false;
}

int run_synth(const RunConfig& cfg, std::ostream& out) {
  auto synth_cfg = cfg.synth;
  synth_cfg.city = cfg.city;
  synth_cfg.first_year = cfg.first_year;
  synth_cfg.last_year = cfg.last_year;
  const auto city = synthetic::generate_synthetic_city(synth_cfg, cfg.seed);
  const fs::path data = cfg.out / "data";
  synthetic::write_synthetic_city(city, data);

  RunConfig run = cfg;
  run.data_dir = "data";
  run.venues = run.reviews = run.users = run.census = run.codebook = run.centroids = fs::path();
  run.out = ".";
  open_out(cfg.out / "run.cfg") << run.to_text();
  summary_line(out, {{"stage", "synth"},
                     {"status", "ok"},
                     {"mode", synthetic::mode_name(synth_cfg.mode)},
                     {"venues", city.dataset.venues.size()},
                     {"reviews", city.dataset.reviews.size()},
                     {"users", city.dataset.users.size()},
                     {"data_dir", data.generic_string()}});
  return 0;
}

int run_ingest(const RunConfig& cfg, std::ostream& out) {
  const std::string hash = config_hash(cfg);
  auto inputs = experiment::load_inputs(cfg);
  const auto filtered = ingest::filter_fsas(inputs.dataset, cfg.min_venues);
  ordered_json j;
  j["config_hash"] = hash;
  j["city"] = cfg.city;
  j["loaded"] = {{"venues", inputs.report.venues},
                 {"reviews", inputs.report.reviews},
                 {"users", inputs.report.users},
                 {"categories", inputs.report.categories},
                 {"fsas", inputs.dataset.fsa_venues().size()}};
  j["dropped"] = {{"empty_categories", inputs.report.dropped_empty_categories},
                  {"no_fsa", inputs.report.dropped_no_fsa},
                  {"other_city", inputs.report.dropped_other_city},
                  {"reviews_outside_window", inputs.report.reviews_outside_window},
                  {"reviews_of_dropped_venues", inputs.report.reviews_of_dropped_venues}};
  ordered_json kept = ordered_json::object();
  for (const auto& [fsa, idx] : filtered.fsa_venues()) kept[fsa] = idx.size();
  j["retained_fsas"] = kept;
  j["filtered"] = {{"venues", filtered.venues.size()},
                   {"reviews", filtered.reviews.size()},
                   {"users", filtered.users.size()}};
  j["warnings"] = inputs.report.warnings;
  write_json(cfg.out / "ingest.json", j);
  summary_line(out, {{"stage", "ingest"},
                     {"status", "ok"},
                     {"venues", inputs.report.venues},
                     {"reviews", inputs.report.reviews},
                     {"users", inputs.report.users},
                     {"categories", inputs.report.categories},
                     {"retained_fsas", kept.size()},
                     {"config_hash", hash}});
  return 0;
}

int run_profile(const RunConfig& cfg, std::ostream& out) {
  const std::string hash = config_hash(cfg);
  auto inputs = experiment::load_inputs(cfg);
  const auto filtered = ingest::filter_fsas(inputs.dataset, cfg.min_venues);
  const auto result = experiment::profile_users(filtered, cfg);
  ordered_json topics;
  topics["config_hash"] = hash;
  topics["model"] = profiling::to_json(result.topics);
  write_json(cfg.out / "topics.json", topics);
  ordered_json groups;
  groups["config_hash"] = hash;
  groups["model"] = profiling::to_json(result.groups);
  write_json(cfg.out / "groups.json", groups);
  {
    auto f = open_out(cfg.out / "coherence.csv");
    f << "# config_hash=" << hash << "\ntopics,mean_umass\n";
    for (const auto& [k, c] : result.coherence_by_k) f << k << ',' << format_double(c) << '\n';
  }
  {
    auto f = open_out(cfg.out / "silhouette.csv");
    f << "# config_hash=" << hash << "\nk,mean_silhouette\n";
    for (const auto& [k, s] : result.groups.silhouette_by_k) f << k << ',' << format_double(s) << '\n';
  }
  summary_line(out, {{"stage", "profile"},
                     {"status", "ok"},
                     {"topics", result.topics.topics},
                     {"groups", result.groups.k},
                     {"users", result.groups.assignment.size()},
                     {"config_hash", hash}});
  return 0;
}

int run_scenes(const RunConfig& cfg, std::ostream& out) {
  const std::string hash = config_hash(cfg);
  const auto city = prepare(cfg, false);
  {
    auto f = open_out(cfg.out / "scenes.csv");
    f << "# config_hash=" << hash << '\n';
    scenes::write_scene_csv(f, city.scenes);
  }
  summary_line(out, {{"stage", "scenes"},
                     {"status", "ok"},
                     {"fsas", city.fsas.size()},
                     {"years", city.scenes.years().size()},
                     {"config_hash", hash}});
  return 0;
}

int run_graph(const RunConfig& cfg, std::ostream& out) {
  const std::string hash = config_hash(cfg);
  const auto city = prepare(cfg, any_group_scenario(cfg));
  std::size_t edges = 0;
  for (const auto& [year, g] : city.graphs) {
    ordered_json j;
    j["config_hash"] = hash;
    j["graph"] = graph::to_json(g);
    write_json(cfg.out / "graphs" / (std::to_string(year) + ".json"), j);
    edges += g.edges.size();
  }
  summary_line(out, {{"stage", "graph"},
                     {"status", "ok"},
                     {"graphs", city.graphs.size()},
                     {"edges", edges},
                     {"config_hash", hash}});
  return 0;
}

int run_train(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const std::string hash = config_hash(cfg);
  if (cfg.scenario_names().size() != 1 && !cfg.scenarios.empty()) {
    throw Error("train takes a single --scenario");
  }
  const std::string scenario_name =
      cfg.scenarios.empty() ? "Area info + mobility + group profile" : cfg.scenario_names().front();
  const auto& scenario = graph::scenario_by_name(scenario_name);
  const int test_year = cfg.test_years.front();
  const auto city = prepare(cfg, scenario.group);
  std::map<int, graph::MobilityGraph> masked;
  std::vector<int> years;
  for (int y = cfg.first_year; y < test_year; ++y) {
    masked.emplace(y, graph::apply_scenario(city.graphs.at(y), scenario));
    years.push_back(y);
  }
  gnn::TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.lr = cfg.lr;
  tc.dropout = cfg.dropout;
  tc.hidden = static_cast<std::size_t>(cfg.hidden);
  tc.blocks = static_cast<std::size_t>(cfg.blocks);
  tc.seed = experiment::cell_seed(cfg.seed, cfg.city, scenario_name, test_year, 0);
  const int report_every = std::max(1, cfg.epochs / 10);
  auto trained = gnn::train(masked, city.scenes, years, tc, [&](int epoch, auto records) {
    if ((epoch + 1) % report_every == 0) {
      double s = 0.0;
      for (const auto& r : records) s += r.mse;
      err << "epoch " << epoch + 1 << " mean mse " << s / static_cast<double>(records.size()) << '\n';
    }
    return true;
  });
  const Matrix pred = gnn::predict(trained, masked.at(test_year - 1));
  const double rmse = metrics::rmse(pred, city.scenes.matrix(test_year, city.fsas));
  const std::string stem = report::slug(scenario_name) + "_" + std::to_string(test_year);
  ordered_json model;
  model["config_hash"] = hash;
  model["scenario"] = scenario_name;
  model["test_year"] = test_year;
  model["census_mean"] = trained.normalizer.census_mean;
  model["census_std"] = trained.normalizer.census_std;
  model["model"] = trained.model.to_json();
  write_json(cfg.out / ("model_" + stem + ".json"), model);
  {
    auto f = open_out(cfg.out / ("loss_" + stem + ".csv"));
    f << "# config_hash=" << hash << "\nepoch,input_year,target_year,mse\n";
    for (const auto& r : trained.trace) {
      f << r.epoch << ',' << r.input_year << ',' << r.target_year << ',' << format_double(r.mse) << '\n';
    }
  }
  summary_line(out, {{"stage", "train"},
                     {"status", "ok"},
                     {"scenario", scenario_name},
                     {"test_year", test_year},
                     {"rmse", rmse},
                     {"config_hash", hash}});
  return 0;
}

void emit_reports(const RunConfig& cfg, const std::string& hash,
                  const std::vector<experiment::SummaryRow>& summary,
                  const std::vector<experiment::FsaRow>* fsa_rows) {
  {
    auto f = open_out(cfg.out / "summary.csv");
    experiment::write_summary_csv(f, summary, hash);
  }
  std::vector<std::string> cities;
  for (const auto& r : summary) {
    if (std::find(cities.begin(), cities.end(), r.city) == cities.end()) cities.push_back(r.city);
  }
  for (const auto& c : cities) {
    {
      auto f = open_out(cfg.out / (report::slug(c) + "_rmse.svg"));
      report::write_rmse_chart(f, c, hash, summary);
    }
    if (fsa_rows && !fsa_rows->empty()) {
      const auto best = report::best_label(c, summary);
      auto f = open_out(cfg.out / (report::slug(c) + "_per_fsa.svg"));
      report::write_fsa_chart(f, c, best, hash, *fsa_rows);
    }
  }
}

int run_evaluate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  const std::string hash = config_hash(cfg);
  const auto plan = experiment::ExperimentPlan::from_config(cfg);
  const auto city = prepare(cfg, plan.needs_groups());
  if (city.profile) {
    err << "profile: " << city.profile->topics.topics << " topics, " << city.profile->groups.k
        << " groups\n";
  }
  const auto report = experiment::run_experiment(
      plan, {&city}, worker_count(), [&](const experiment::RunSample& s, std::size_t done, std::size_t total) {
        err << '[' << done << '/' << total << "] " << s.cell.label << ' ' << s.cell.test_year << " rep "
            << s.cell.repetition << " rmse " << s.rmse << '\n';
      });
  {
    auto f = open_out(cfg.out / "results.csv");
    experiment::write_results_csv(f, report, hash);
  }
  const auto fsa_rows = experiment::per_fsa(report);
  {
    auto f = open_out(cfg.out / "per_fsa.csv");
    experiment::write_per_fsa_csv(f, fsa_rows, hash);
  }
  {
    auto f = open_out(cfg.out / "per_fsa_by_year.csv");
    experiment::write_per_fsa_by_year_csv(f, fsa_rows, hash);
  }
  {
    auto f = open_out(cfg.out / "region_summary.csv");
    experiment::write_region_csv(f, experiment::region_summary(fsa_rows), hash);
  }
  const auto summary = experiment::summarize(report);
  emit_reports(cfg, hash, summary, &fsa_rows);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_meta(cfg, "evaluate", hash, seconds);
  summary_line(out, {{"stage", "evaluate"},
                     {"status", "ok"},
                     {"cells", report.samples.size()},
                     {"best", report::best_label(cfg.city, summary)},
                     {"config_hash", hash}});
  return 0;
}

int run_report(const RunConfig& cfg, std::ostream& out) {
  const fs::path results = cfg.out / "results.csv";
  if (!fs::exists(results)) throw Error("no results.csv in " + cfg.out.string() + "; run evaluate first");
  std::string hash;
  {
    std::ifstream in(results);
    std::string first;
    std::getline(in, first);
    const std::string prefix = "# config_hash=";
    if (first.rfind(prefix, 0) == 0) hash = first.substr(prefix.size());
  }
  experiment::RmseReport report;
  report.samples = experiment::read_results_csv(results);
  const auto summary = experiment::summarize(report);

  std::vector<experiment::FsaRow> fsa_rows;
  const fs::path per_fsa = cfg.out / "per_fsa.csv";
  if (fs::exists(per_fsa)) {
    const auto t = read_csv(per_fsa);
    const auto c_city = t.column("city"), c_label = t.column("model_or_scenario"), c_fsa = t.column("fsa"),
               c_mean = t.column("mean_rmse"), c_region = t.column("region");
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      const auto& r = t.rows[i];
      fsa_rows.push_back({r[c_city], r[c_label], r[c_fsa], 0,
                          parse_double(r[c_mean], per_fsa.string()),
                          r[c_region] == "west" ? metrics::Region::West : metrics::Region::East});
    }
  }
  emit_reports(cfg, hash, summary, &fsa_rows);
  summary_line(out, {{"stage", "report"}, {"status", "ok"}, {"rows", summary.size()}, {"config_hash", hash}});
  return 0;
}

}  // namespace

int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"scenecast: next-year neighbourhood scene prediction", "scenecast"};
  app.require_subcommand(1);
  Flags f;

  auto* synth = app.add_subcommand("synth", "generate a synthetic city and a run.cfg");
  add_common(synth, f);
  synth->add_option("--mode", f.mode, "area_driven | flow_driven | none");

  auto* ingest_cmd = app.add_subcommand("ingest", "load, validate and filter a city");
  add_common(ingest_cmd, f);

  auto* profile = app.add_subcommand("profile", "topic model and reviewer groups");
  add_common(profile, f);
  profile->add_option("--k-range", f.k_range, "group count search range lo:hi");
  profile->add_option("--topics-range", f.topics_range, "topic count search range lo:hi");

  auto* scenes_cmd = app.add_subcommand("scenes", "yearly scene vectors per FSA");
  add_common(scenes_cmd, f);

  auto* graph_cmd = app.add_subcommand("graph", "yearly mobility graphs");
  add_common(graph_cmd, f);
  graph_cmd->add_option("--scenario", f.scenarios, "scenarios (group counts are built when any needs them)");

  auto* train = app.add_subcommand("train", "train one GNN and save it");
  add_common(train, f);
  train->add_option("--scenario", f.scenarios, "scenario name");
  train->add_option("--test-year", f.test_years, "test year");
  train->add_option("--epochs", f.epochs, "training epochs");

  auto* evaluate = app.add_subcommand("evaluate", "run the experiment grid and write reports");
  add_common(evaluate, f);
  evaluate->add_option("--scenario", f.scenarios, "GNN scenario (repeatable)");
  evaluate->add_option("--model", f.models, "gnn | naive | lasso | forest | boosted (repeatable)");
  evaluate->add_option("--test-year", f.test_years, "test year (repeatable)");
  evaluate->add_option("--reps", f.reps, "repetitions per cell");
  evaluate->add_option("--epochs", f.epochs, "GNN training epochs");
  evaluate->add_option("--k-range", f.k_range, "group count search range lo:hi");
  evaluate->add_option("--topics-range", f.topics_range, "topic count search range lo:hi");

  auto* report_cmd = app.add_subcommand("report", "summary.csv and charts from results.csv");
  add_common(report_cmd, f);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n\n";
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return 2;
  }

  try {
    // When --scenario filters a GNN-only run, keep only the GNN model.
    if (evaluate->parsed() && !f.scenarios.empty() && f.models.empty()) f.models = {"gnn"};
    const RunConfig cfg = resolve_config(f);
    fs::create_directories(cfg.out);
    if (synth->parsed()) return run_synth(cfg, out);
    if (ingest_cmd->parsed()) return run_ingest(cfg, out);
    if (profile->parsed()) return run_profile(cfg, out);
    if (scenes_cmd->parsed()) return run_scenes(cfg, out);
    if (graph_cmd->parsed()) return run_graph(cfg, out);
    if (train->parsed()) return run_train(cfg, out, err);
    if (evaluate->parsed()) return run_evaluate(cfg, out, err);
    if (report_cmd->parsed()) return run_report(cfg, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

int cli_run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return cli_run(args, std::cout, std::cerr);
}

}  // namespace scenecast
