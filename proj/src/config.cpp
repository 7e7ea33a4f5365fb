#include "scenecast/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "scenecast/csv.hpp"
#include "scenecast/error.hpp"
#include "scenecast/graph.hpp"
#include "scenecast/seeding.hpp"

namespace scenecast {

namespace {

int to_int(std::string_view key, std::string_view v) {
  try {
    return parse_int(trim(v), key);
  } catch (const std::exception&) {
    throw Error("config " + std::string(key) + ": expected an integer, got '" + std::string(v) + "'");
  }
}

double to_double(std::string_view key, std::string_view v) {
  try {
    return parse_double(trim(v), key);
  } catch (const std::exception&) {
    throw Error("config " + std::string(key) + ": expected a number, got '" + std::string(v) + "'");
  }
}

bool to_bool(std::string_view key, std::string_view v) {
  const std::string t(trim(v));
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw Error("config " + std::string(key) + ": expected true/false, got '" + t + "'");
}

std::vector<std::string> split_list(std::string_view v, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const std::size_t end = std::min(v.find(sep, start), v.size());
    const std::string item(trim(v.substr(start, end - start)));
    if (!item.empty()) out.push_back(item);
    start = end + 1;
  }
  return out;
}

std::pair<int, int> to_range(std::string_view key, std::string_view v) {
  const auto parts = split_list(v, ':');
  if (parts.size() != 2) throw Error("config " + std::string(key) + ": expected lo:hi");
  const int lo = to_int(key, parts[0]);
  const int hi = to_int(key, parts[1]);
  if (lo > hi) throw Error("config " + std::string(key) + ": empty range");
  return {lo, hi};
}

template <typename T>
std::string join(const std::vector<T>& items, const std::string& sep) {
  std::ostringstream out;
  for (std::size_t i = 0; i < items.size(); ++i) out << (i ? sep : "") << items[i];
  return out.str();
}

std::filesystem::path resolve(std::string_view v, const std::filesystem::path& base) {
  std::filesystem::path p{std::string(trim(v))};
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

}  // namespace

void RunConfig::set(std::string_view key_in, std::string_view value,
                    const std::filesystem::path& base_dir) {
  const std::string key(trim(key_in));
  const std::string v(trim(value));
  auto& s = synth;
  if (key == "data_dir") data_dir = resolve(v, base_dir);
  else if (key == "venues") venues = resolve(v, base_dir);
  else if (key == "reviews") reviews = resolve(v, base_dir);
  else if (key == "users") users = resolve(v, base_dir);
  else if (key == "census") census = resolve(v, base_dir);
  else if (key == "codebook") codebook = resolve(v, base_dir);
  else if (key == "centroids") centroids = resolve(v, base_dir);
  else if (key == "out") out = resolve(v, base_dir);
  else if (key == "city") city = v;
  else if (key == "city_filter") city_filter = to_bool(key, v);
  else if (key == "seed") {
    try {
      seed = std::stoull(v);
    } catch (const std::exception&) {
      throw Error("config seed: expected a non-negative integer, got '" + v + "'");
    }
  }
  else if (key == "first_year") first_year = to_int(key, v);
  else if (key == "last_year") last_year = to_int(key, v);
  else if (key == "min_venues") min_venues = to_int(key, v);
  else if (key == "test_years") {
    test_years.clear();
    for (const auto& y : split_list(v, ',')) test_years.push_back(to_int(key, y));
  }
  else if (key == "reps") reps = to_int(key, v);
  else if (key == "scenarios") scenarios = split_list(v, ';');
  else if (key == "models") models = split_list(v, ',');
  else if (key == "epochs") epochs = to_int(key, v);
  else if (key == "lr") lr = to_double(key, v);
  else if (key == "dropout") dropout = to_double(key, v);
  else if (key == "hidden") hidden = to_int(key, v);
  else if (key == "blocks") blocks = to_int(key, v);
  else if (key == "cv_folds") cv_folds = to_int(key, v);
  else if (key == "topics_range") std::tie(topics_min, topics_max) = to_range(key, v);
  else if (key == "k_range") std::tie(k_min, k_max) = to_range(key, v);
  else if (key == "lda_iterations") lda_iterations = to_int(key, v);
  else if (key == "synth.mode") s.mode = synthetic::mode_from_name(v);
  else if (key == "synth.fsas") s.fsas = to_int(key, v);
  else if (key == "synth.small_fsas") s.small_fsas = to_int(key, v);
  else if (key == "synth.residents_per_fsa") s.residents_per_fsa = to_int(key, v);
  else if (key == "synth.groups") s.groups = to_int(key, v);
  else if (key == "synth.venues_per_category") s.venues_per_category = to_int(key, v);
  else if (key == "synth.visitors_per_fsa") s.visitors_per_fsa = to_int(key, v);
  else if (key == "synth.logit_noise") s.logit_noise = to_double(key, v);
  else if (key == "synth.area_drift") s.area_drift = to_double(key, v);
  else if (key == "synth.flow_strength") s.flow_strength = to_double(key, v);
  else if (key == "synth.base_spread") s.base_spread = to_double(key, v);
  else throw Error("unknown config key '" + key + "'");
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  const auto base = path.parent_path();
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(path.string() + ":" + std::to_string(number) + ": expected key = value");
    }
    try {
      set(std::string_view(line).substr(0, eq), std::string_view(line).substr(eq + 1), base);
    } catch (const Error& e) {
      throw ParseError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

std::filesystem::path RunConfig::input_path(std::string_view which) const {
  static const std::map<std::string_view, std::string_view> names = {
      {"venues", "venues.jsonl"}, {"reviews", "reviews.jsonl"}, {"users", "users.jsonl"},
      {"census", "census.csv"},   {"codebook", "codebook.csv"}, {"centroids", "centroids.csv"}};
  const std::filesystem::path* explicit_path = nullptr;
  if (which == "venues") explicit_path = &venues;
  else if (which == "reviews") explicit_path = &reviews;
  else if (which == "users") explicit_path = &users;
  else if (which == "census") explicit_path = &census;
  else if (which == "codebook") explicit_path = &codebook;
  else if (which == "centroids") explicit_path = &centroids;
  else throw Error("unknown input '" + std::string(which) + "'");
  if (!explicit_path->empty()) return *explicit_path;
  if (data_dir.empty()) return {};
  return data_dir / std::string(names.at(which));
}

std::vector<std::string> RunConfig::scenario_names() const {
  if (!scenarios.empty()) {
    std::vector<std::string> out;
    for (const auto& s : scenarios) out.emplace_back(graph::scenario_by_name(s).name);
    return out;
  }
  std::vector<std::string> out;
  for (const auto& s : graph::all_scenarios()) out.emplace_back(s.name);
  return out;
}

std::string RunConfig::canonical_text() const {
  std::ostringstream o;
  o << "city = " << city << '\n'
    << "city_filter = " << (city_filter ? "true" : "false") << '\n'
    << "seed = " << seed << '\n'
    << "first_year = " << first_year << '\n'
    << "last_year = " << last_year << '\n'
    << "min_venues = " << min_venues << '\n'
    << "test_years = " << join(test_years, ",") << '\n'
    << "reps = " << reps << '\n'
    << "scenarios = " << join(scenario_names(), ";") << '\n'
    << "models = " << join(models, ",") << '\n'
    << "epochs = " << epochs << '\n'
    << "lr = " << format_double(lr) << '\n'
    << "dropout = " << format_double(dropout) << '\n'
    << "hidden = " << hidden << '\n'
    << "blocks = " << blocks << '\n'
    << "cv_folds = " << cv_folds << '\n'
    << "topics_range = " << topics_min << ':' << topics_max << '\n'
    << "k_range = " << k_min << ':' << k_max << '\n'
    << "lda_iterations = " << lda_iterations << '\n'
    << "synth.mode = " << synthetic::mode_name(synth.mode) << '\n'
    << "synth.fsas = " << synth.fsas << '\n'
    << "synth.small_fsas = " << synth.small_fsas << '\n'
    << "synth.residents_per_fsa = " << synth.residents_per_fsa << '\n'
    << "synth.groups = " << synth.groups << '\n'
    << "synth.venues_per_category = " << synth.venues_per_category << '\n'
    << "synth.visitors_per_fsa = " << synth.visitors_per_fsa << '\n'
    << "synth.logit_noise = " << format_double(synth.logit_noise) << '\n'
    << "synth.area_drift = " << format_double(synth.area_drift) << '\n'
    << "synth.flow_strength = " << format_double(synth.flow_strength) << '\n'
    << "synth.base_spread = " << format_double(synth.base_spread) << '\n';
  return o.str();
}

std::string RunConfig::to_text() const {
  std::ostringstream o;
  auto path_line = [&](const char* key, const std::filesystem::path& p) {
    if (!p.empty()) o << key << " = " << p.generic_string() << '\n';
  };
  path_line("data_dir", data_dir);
  path_line("venues", venues);
  path_line("reviews", reviews);
  path_line("users", users);
  path_line("census", census);
  path_line("codebook", codebook);
  path_line("centroids", centroids);
  path_line("out", out);
  o << canonical_text();
  return o.str();
}

void RunConfig::validate() const {
  if (first_year > last_year) throw Error("first_year is after last_year");
  if (reps < 1) throw Error("reps must be >= 1");
  if (epochs < 0) throw Error("epochs must be >= 0");
  if (!(lr > 0.0)) throw Error("lr must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error("dropout must be in [0, 1)");
  if (hidden < 1 || blocks < 0) throw Error("hidden must be >= 1 and blocks >= 0");
  if (cv_folds < 2) throw Error("cv_folds must be >= 2");
  if (topics_min < 1) throw Error("topics_range must start at >= 1");
  if (k_min < 2) throw Error("k_range must start at >= 2");
  if (lda_iterations < 1) throw Error("lda_iterations must be >= 1");
  if (test_years.empty()) throw Error("no test years");
  for (int y : test_years) {
    if (y - 2 < first_year || y > last_year) {
      throw Error("test year " + std::to_string(y) + " needs two earlier years inside [" +
                  std::to_string(first_year) + ", " + std::to_string(last_year) + "]");
    }
  }
  for (const auto& m : models) {
    if (m != "gnn" && m != "naive" && m != "lasso" && m != "forest" && m != "boosted") {
      throw Error("unknown model '" + m + "' (gnn, naive, lasso, forest, boosted)");
    }
  }
  (void)scenario_names();
}

std::string config_hash(const RunConfig& config) {
  std::uint64_t h = fnv1a64(config.canonical_text());
  for (const char* which : {"venues", "reviews", "users", "census", "codebook", "centroids"}) {
    const auto p = config.input_path(which);
    if (p.empty() || !std::filesystem::exists(p)) continue;
    std::ifstream in(p, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    h = fnv1a64(which, h);
    h = fnv1a64(bytes, h);
  }
  return hex64(h);
}

}  // namespace scenecast
