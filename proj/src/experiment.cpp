#include "scenecast/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <set>

#include "scenecast/baselines.hpp"
#include "scenecast/error.hpp"
#include "scenecast/seeding.hpp"
#include "scenecast/work_pool.hpp"

namespace scenecast::experiment {

CityInputs load_inputs(const RunConfig& config) {
  for (const char* which : {"venues", "reviews", "users", "census", "codebook"}) {
    const auto p = config.input_path(which);
    if (p.empty()) throw Error(std::string("no ") + which + " file configured (set data_dir or " + which + ")");
    if (!std::filesystem::exists(p)) throw Error(std::string(which) + " file not found: " + p.string());
  }
  CityInputs in;
  ingest::LoadOptions opts;
  opts.window = {config.first_year, config.last_year};
  if (config.city_filter) opts.city = config.city;
  const auto centroid_path = config.input_path("centroids");
  if (!centroid_path.empty() && std::filesystem::exists(centroid_path)) {
    in.centroids = ingest::load_centroids(centroid_path);
    opts.locator = &in.centroids;
  }
  in.dataset = ingest::load_dataset(config.input_path("venues"), config.input_path("reviews"),
                                    config.input_path("users"), opts, &in.report);
  in.dataset.city = config.city;
  in.census = ingest::load_census(config.input_path("census"));
  in.codebook = ingest::load_codebook(config.input_path("codebook"));
  return in;
}

ProfileResult profile_users(const ingest::Dataset& dataset, const RunConfig& config) {
  const auto corpus = profiling::preprocess(profiling::build_documents(dataset)).canonical();
  const std::uint64_t seed = derive_seed(config.seed, "profile/" + config.city);
  auto selection = profiling::select_topic_count(corpus, config.topics_min, config.topics_max,
                                                 derive_seed(seed, "lda"), config.lda_iterations);
  ProfileResult out;
  out.coherence_by_k = selection.coherence_by_k;
  out.topics = std::move(selection.model);
  out.groups = profiling::cluster_users(profiling::embed(out.topics), config.k_min, config.k_max,
                                        derive_seed(seed, "kmeans"));
  return out;
}

ingest::CentroidTable fsa_centroids(const ingest::Dataset& dataset,
                                    const ingest::CentroidTable& table) {
  ingest::CentroidTable out;
  for (const auto& [fsa, idx] : dataset.fsa_venues()) {
    if (auto c = table.find(fsa)) {
      out.add(fsa, c->lat, c->lon);
      continue;
    }
    double lat = 0.0, lon = 0.0;
    std::size_t count = 0;
    for (std::size_t i : idx) {
      const auto& v = dataset.venues[i];
      if (v.lat && v.lon) {
        lat += *v.lat;
        lon += *v.lon;
        ++count;
      }
    }
    if (count == 0) throw DataError("no centroid and no venue coordinates for FSA " + fsa);
    out.add(fsa, lat / static_cast<double>(count), lon / static_cast<double>(count));
  }
  return out;
}

CityData prepare_city(CityInputs inputs, const RunConfig& config, bool with_groups) {
  CityData city;
  city.city = config.city;
  city.dataset = ingest::filter_fsas(inputs.dataset, config.min_venues);
  city.dataset.city = config.city;
  city.fsas = city.dataset.fsas();
  inputs.census.require_coverage(city.fsas);
  city.census = std::move(inputs.census);
  city.codebook = std::move(inputs.codebook);
  city.centroids = fsa_centroids(city.dataset, inputs.centroids);
  city.scenes = scenes::build_scene_table(city.dataset, city.codebook, config.first_year, config.last_year);
  city.scenes.city = config.city;

  std::map<std::string, int> group_of;
  std::size_t group_count = 0;
  if (with_groups) {
    city.profile = profile_users(city.dataset, config);
    group_of = city.profile->groups.assignment;
    group_count = static_cast<std::size_t>(city.profile->groups.k);
  }
  for (int y = config.first_year; y <= config.last_year; ++y) {
    city.graphs[y] = graph::build_year_graph(city.dataset, y, group_of, group_count, &city.census,
                                             city.scenes);
  }
  return city;
}

ExperimentPlan ExperimentPlan::from_config(const RunConfig& config) {
  config.validate();
  ExperimentPlan plan;
  const bool gnn = std::find(config.models.begin(), config.models.end(), "gnn") != config.models.end();
  if (gnn) plan.scenarios = config.scenario_names();
  for (const auto& m : config.models) {
    if (m != "gnn") plan.baselines.push_back(m);
  }
  plan.test_years = config.test_years;
  plan.reps = config.reps;
  plan.base_seed = config.seed;
  plan.first_year = config.first_year;
  plan.train.epochs = config.epochs;
  plan.train.lr = config.lr;
  plan.train.dropout = config.dropout;
  plan.train.hidden = static_cast<std::size_t>(config.hidden);
  plan.train.blocks = static_cast<std::size_t>(config.blocks);
  plan.cv_folds = config.cv_folds;
  return plan;
}

bool ExperimentPlan::needs_groups() const {
  return std::any_of(scenarios.begin(), scenarios.end(),
                     [](const std::string& s) { return graph::scenario_by_name(s).group; });
}

std::vector<std::string> ExperimentPlan::labels() const {
  std::vector<std::string> out = scenarios;
  for (const auto& b : baselines) out.emplace_back(baselines::kind_name(baselines::kind_from_name(b)));
  return out;
}

std::uint64_t cell_seed(std::uint64_t base_seed, const std::string& city, const std::string& label,
                        int test_year, int repetition) {
  return derive_seed(base_seed, "cell/" + city + "/" + label + "/" + std::to_string(test_year) +
                                    "/rep=" + std::to_string(repetition));
}

std::vector<Cell> plan_cells(const ExperimentPlan& plan, const std::vector<std::string>& cities) {
  std::vector<Cell> cells;
  const auto labels = plan.labels();
  for (const auto& city : cities) {
    for (std::size_t l = 0; l < labels.size(); ++l) {
      for (int year : plan.test_years) {
        for (int rep = 0; rep < plan.reps; ++rep) {
          Cell c;
          c.city = city;
          c.label = labels[l];
          c.gnn = l < plan.scenarios.size();
          c.test_year = year;
          c.repetition = rep;
          c.seed = cell_seed(plan.base_seed, city, c.label, year, rep);
          cells.push_back(std::move(c));
        }
      }
    }
  }
  return cells;
}

namespace {

std::vector<int> training_years(const ExperimentPlan& plan, int test_year) {
  std::vector<int> years;
  for (int y = plan.first_year; y < test_year; ++y) years.push_back(y);
  return years;
}

std::string cell_name(const Cell& c) {
  return c.city + " / " + c.label + " / " + std::to_string(c.test_year) + " / rep " +
         std::to_string(c.repetition);
}

}  // namespace

Matrix run_cell(const ExperimentPlan& plan, const CityData& city, const Cell& cell) {
  const auto years = training_years(plan, cell.test_year);
  if (!city.graphs.count(cell.test_year - 1) || !city.scenes.has_year(cell.test_year)) {
    throw Error("missing graph or scenes for test year " + std::to_string(cell.test_year));
  }
  if (cell.gnn) {
    const auto& scenario = graph::scenario_by_name(cell.label);
    if (scenario.group && city.graphs.begin()->second.group_count == 0) {
      throw Error("scenario needs group profiles but the city was prepared without them");
    }
    std::map<int, graph::MobilityGraph> masked;
    for (int y : years) {
      auto it = city.graphs.find(y);
      if (it == city.graphs.end()) throw Error("missing graph for year " + std::to_string(y));
      masked.emplace(y, graph::apply_scenario(it->second, scenario));
    }
    gnn::TrainConfig tc = plan.train;
    tc.seed = cell.seed;
    auto trained = gnn::train(masked, city.scenes, years, tc);
    return gnn::predict(trained, masked.at(cell.test_year - 1));
  }

  const auto kind = baselines::kind_from_name(cell.label);
  std::vector<int> all_years = years;
  all_years.push_back(cell.test_year);
  const auto features =
      baselines::FeatureTable::build(city.scenes, &city.census, city.fsas, all_years);
  if (kind == baselines::ModelKind::Naive) {
    return baselines::naive_fit_predict(features, years, city.fsas);
  }
  const auto pairs = baselines::training_pairs(features, years);
  const auto grid = baselines::default_grid(kind);
  const auto cv = baselines::grid_search_cv(kind, grid, pairs.inputs, pairs.targets, plan.cv_folds,
                                            derive_seed(cell.seed, "cv"));
  const auto model = baselines::BaselineModel::fit(kind, cv.best, pairs.inputs, pairs.targets,
                                                   derive_seed(cell.seed, "fit"));
  return model.predict(features.year(cell.test_year - 1));
}

RmseReport run_experiment(const ExperimentPlan& plan, const std::vector<const CityData*>& cities,
                          std::size_t workers, const ProgressFn& progress) {
  RmseReport report;
  report.labels = plan.labels();
  std::vector<std::string> names;
  std::map<std::string, const CityData*> by_name;
  for (const auto* c : cities) {
    if (by_name.count(c->city)) throw Error("duplicate city " + c->city);
    by_name[c->city] = c;
    names.push_back(c->city);
    report.fsas[c->city] = c->fsas;
    report.regions[c->city] = metrics::east_west_split(c->fsas, c->centroids);
  }
  const auto cells = plan_cells(plan, names);
  report.samples.resize(cells.size());
  std::mutex mu;
  std::size_t done = 0;
  parallel_for(
      cells.size(),
      [&](std::size_t i) {
        const Cell& cell = cells[i];
        const CityData& city = *by_name.at(cell.city);
        RunSample s;
        s.cell = cell;
        try {
          const Matrix pred = run_cell(plan, city, cell);
          const Matrix truth = city.scenes.matrix(cell.test_year, city.fsas);
          s.rmse = metrics::rmse(pred, truth);
          s.fsa_rmse = metrics::row_rmse(pred, truth);
        } catch (const std::exception& e) {
          throw Error("cell " + cell_name(cell) + ": " + e.what());
        }
        report.samples[i] = std::move(s);
        if (progress) {
          std::lock_guard lock(mu);
          progress(report.samples[i], ++done, cells.size());
        }
      },
      workers);
  return report;
}

std::vector<SummaryRow> summarize(const RmseReport& report) {
  // Per (city, label): each test year in first-seen order, then the pooled row.
  using Key = std::pair<std::string, std::string>;
  std::vector<Key> labels;
  std::map<Key, std::vector<int>> years;
  std::map<std::tuple<std::string, std::string, int>, std::vector<double>> samples;
  for (const auto& s : report.samples) {
    Key key{s.cell.city, s.cell.label};
    auto [yit, new_label] = years.try_emplace(key);
    if (new_label) labels.push_back(key);
    if (std::find(yit->second.begin(), yit->second.end(), s.cell.test_year) == yit->second.end()) {
      yit->second.push_back(s.cell.test_year);
    }
    samples[{key.first, key.second, s.cell.test_year}].push_back(s.rmse);
    samples[{key.first, key.second, 0}].push_back(s.rmse);
  }
  std::vector<SummaryRow> rows;
  auto emit = [&](const Key& key, int year) {
    const auto& v = samples.at({key.first, key.second, year});
    SummaryRow r{key.first, key.second, year, v.size(), 0.0, std::nullopt};
    if (v.size() >= 2) {
      const auto ci = metrics::ci95(v);
      r.mean = ci.mean;
      r.half_width = ci.half_width;
    } else {
      r.mean = v.front();
    }
    rows.push_back(std::move(r));
  };
  for (const auto& key : labels) {
    for (int y : years.at(key)) emit(key, y);
    emit(key, 0);
  }
  return rows;
}

std::vector<FsaRow> per_fsa(const RmseReport& report) {
  // (city, label, fsa index, year) → sum, count
  std::map<std::tuple<std::string, std::string, int>, std::vector<std::pair<double, std::size_t>>> acc;
  std::vector<std::tuple<std::string, std::string, int>> order;
  for (const auto& s : report.samples) {
    if (s.fsa_rmse.empty()) continue;
    auto key = std::make_tuple(s.cell.city, s.cell.label, s.cell.test_year);
    auto [it, inserted] = acc.try_emplace(key, s.fsa_rmse.size(), std::make_pair(0.0, std::size_t{0}));
    if (inserted) order.push_back(key);
    for (std::size_t f = 0; f < s.fsa_rmse.size(); ++f) {
      it->second[f].first += s.fsa_rmse[f];
      ++it->second[f].second;
    }
  }
  std::vector<FsaRow> rows;
  std::map<std::pair<std::string, std::string>, std::vector<std::vector<double>>> year_means;
  std::vector<std::pair<std::string, std::string>> label_order;
  for (const auto& key : order) {
    const auto& [city, label, year] = key;
    const auto& fsas = report.fsas.at(city);
    const auto& regions = report.regions.at(city);
    auto [ym, inserted] = year_means.try_emplace({city, label}, fsas.size());
    if (inserted) label_order.emplace_back(city, label);
    const auto& sums = acc.at(key);
    for (std::size_t f = 0; f < fsas.size(); ++f) {
      const double mean = sums[f].first / static_cast<double>(sums[f].second);
      ym->second[f].push_back(mean);
      rows.push_back(FsaRow{city, label, fsas[f], year, mean, regions.at(fsas[f])});
    }
  }
  for (const auto& [city, label] : label_order) {
    const auto& fsas = report.fsas.at(city);
    const auto& regions = report.regions.at(city);
    const auto& means = year_means.at({city, label});
    for (std::size_t f = 0; f < fsas.size(); ++f) {
      const double m = std::accumulate(means[f].begin(), means[f].end(), 0.0) /
                       static_cast<double>(means[f].size());
      rows.push_back(FsaRow{city, label, fsas[f], 0, m, regions.at(fsas[f])});
    }
  }
  return rows;
}

std::vector<RegionRow> region_summary(const std::vector<FsaRow>& rows) {
  std::vector<RegionRow> out;
  std::map<std::tuple<std::string, std::string, int>, std::size_t> index;
  for (const auto& r : rows) {
    if (r.test_year != 0) continue;
    auto key = std::make_tuple(r.city, r.label, static_cast<int>(r.region));
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, out.size()).first;
      out.push_back(RegionRow{r.city, r.label, r.region, 0, 0.0});
    }
    auto& row = out[it->second];
    row.mean_rmse += r.mean_rmse;
    ++row.fsas;
  }
  for (auto& r : out) r.mean_rmse /= static_cast<double>(r.fsas);
  return out;
}

namespace {

void hash_line(std::ostream& out, const std::string& hash) { out << "# config_hash=" << hash << '\n'; }

}  // namespace

void write_results_csv(std::ostream& out, const RmseReport& report, const std::string& hash) {
  hash_line(out, hash);
  out << "city,model_or_scenario,test_year,repetition,rmse\n";
  for (const auto& s : report.samples) {
    out << csv_field(s.cell.city) << ',' << csv_field(s.cell.label) << ',' << s.cell.test_year << ','
        << s.cell.repetition << ',' << format_double(s.rmse) << '\n';
  }
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows,
                       const std::string& hash) {
  hash_line(out, hash);
  out << "city,model_or_scenario,test_year,n,mean,ci95_half_width\n";
  for (const auto& r : rows) {
    out << csv_field(r.city) << ',' << csv_field(r.label) << ','
        << (r.test_year ? std::to_string(r.test_year) : std::string("all")) << ',' << r.n << ','
        << format_double(r.mean) << ',' << (r.half_width ? format_double(*r.half_width) : "NA") << '\n';
  }
}

void write_per_fsa_csv(std::ostream& out, const std::vector<FsaRow>& rows, const std::string& hash) {
  hash_line(out, hash);
  out << "city,model_or_scenario,fsa,mean_rmse,region\n";
  for (const auto& r : rows) {
    if (r.test_year != 0) continue;
    out << csv_field(r.city) << ',' << csv_field(r.label) << ',' << r.fsa << ','
        << format_double(r.mean_rmse) << ',' << metrics::region_name(r.region) << '\n';
  }
}

void write_per_fsa_by_year_csv(std::ostream& out, const std::vector<FsaRow>& rows,
                               const std::string& hash) {
  hash_line(out, hash);
  out << "city,model_or_scenario,test_year,fsa,mean_rmse,region\n";
  for (const auto& r : rows) {
    if (r.test_year == 0) continue;
    out << csv_field(r.city) << ',' << csv_field(r.label) << ',' << r.test_year << ',' << r.fsa << ','
        << format_double(r.mean_rmse) << ',' << metrics::region_name(r.region) << '\n';
  }
}

void write_region_csv(std::ostream& out, const std::vector<RegionRow>& rows,
                      const std::string& hash) {
  hash_line(out, hash);
  out << "city,model_or_scenario,region,fsas,mean_rmse\n";
  for (const auto& r : rows) {
    out << csv_field(r.city) << ',' << csv_field(r.label) << ',' << metrics::region_name(r.region)
        << ',' << r.fsas << ',' << format_double(r.mean_rmse) << '\n';
  }
}

std::vector<RunSample> read_results_csv(const std::filesystem::path& path) {
  const auto table = read_csv(path);
  const auto city = table.column("city");
  const auto label = table.column("model_or_scenario");
  const auto year = table.column("test_year");
  const auto rep = table.column("repetition");
  const auto rmse = table.column("rmse");
  std::vector<RunSample> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::string ctx = path.string() + ":" + std::to_string(table.line_numbers[i]);
    RunSample s;
    s.cell.city = row[city];
    s.cell.label = row[label];
    s.cell.test_year = parse_int(row[year], ctx);
    s.cell.repetition = parse_int(row[rep], ctx);
    s.rmse = parse_double(row[rmse], ctx);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace scenecast::experiment
