#include "scenecast/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include "scenecast/csv.hpp"
#include "scenecast/error.hpp"
#include "scenecast/seeding.hpp"

namespace scenecast::synthetic {

using nlohmann::ordered_json;

namespace {

constexpr std::array<std::string_view, 8> kCategories = {
    "Art Galleries", "Jazz & Blues", "Sports Bars", "Churches",
    "Coffee & Tea",  "Dance Clubs",  "Museums",     "Fast Food"};
constexpr std::size_t kC = kCategories.size();
constexpr std::array<std::string_view, 7> kCensusBase = {"35", "1200", "30", "70000", "25", "10", "5"};

double census_value(std::size_t column, double z) {
  switch (column) {
    case 1:
      return std::max(300.0, 1200.0 + 250.0 * z);
    case 3:
      return std::max(10000.0, 70000.0 + 15000.0 * z);
    default: {
      const double centre = std::stod(std::string(kCensusBase[column]));
      return std::clamp(centre + 0.3 * centre * z, 0.0, 100.0);
    }
  }
}

std::vector<double> softmax(const std::vector<double>& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) s += out[i] = std::exp(logits[i] - mx);
  for (auto& v : out) v /= s;
  return out;
}

std::vector<double> dirichlet(Rng& rng, std::size_t k, double concentration) {
  // Gamma(a) draws by Marsaglia-Tsang, boosted for a < 1.
  auto gamma = [&](double a) {
    double boost = 1.0;
    if (a < 1.0) {
      boost = std::pow(std::max(rng.uniform(), 1e-300), 1.0 / a);
      a += 1.0;
    }
    const double d = a - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = rng.normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = rng.uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return boost * d * v;
      if (std::log(std::max(u, 1e-300)) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return boost * d * v;
    }
  };
  std::vector<double> out(k);
  double s = 0.0;
  for (auto& v : out) s += v = gamma(concentration);
  for (auto& v : out) v /= s;
  return out;
}

std::size_t pick_weighted(Rng& rng, const std::vector<double>& weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return weights.size() - 1;
}

std::string fsa_code(int index, bool small) {
  // T2A.. for study areas, T9A.. for residential ones.
  const char digit = small ? '9' : static_cast<char>('2' + index / 26);
  const char letter = static_cast<char>('A' + index % 26);
  return std::string("T") + digit + letter;
}

std::string date_string(int year, Rng& rng) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d 12:00:00", year, 1 + static_cast<int>(rng.index(12)),
                1 + static_cast<int>(rng.index(28)));
  return buf;
}

void check(const SyntheticConfig& c) {
  auto fail = [](const std::string& what) { throw Error("infeasible synthetic config: " + what); };
  if (c.fsas < 2) fail("need at least 2 areas");
  if (c.fsas > 26 * 7) fail("too many areas");
  if (c.small_fsas < 0 || c.small_fsas > 26) fail("small_fsas out of range");
  if (c.residents_per_fsa < 1) fail("need at least one resident per area");
  if (c.groups < 1) fail("need at least one group");
  if (c.last_year <= c.first_year) fail("need at least two years");
  if (c.venues_per_category * static_cast<int>(kC) < 30) fail("areas would not reach 30 venues");
  if (c.visitors_per_fsa < 0) fail("visitors_per_fsa must be >= 0");
  if (c.logit_noise < 0 || c.area_drift < 0 || c.flow_strength < 0 || c.base_spread < 0) {
    fail("scales must be non-negative");
  }
}

}  // namespace

std::string_view mode_name(Mode mode) {
  switch (mode) {
    case Mode::AreaDriven:
      return "area_driven";
    case Mode::FlowDriven:
      return "flow_driven";
    case Mode::None:
      return "none";
  }
  return "?";
}

Mode mode_from_name(std::string_view name) {
  std::string k;
  for (char ch : name) k.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  std::replace(k.begin(), k.end(), '-', '_');
  if (k == "area_driven") return Mode::AreaDriven;
  if (k == "flow_driven") return Mode::FlowDriven;
  if (k == "none") return Mode::None;
  throw Error("unknown synthetic mode '" + std::string(name) + "'");
}

SyntheticCity generate_synthetic_city(const SyntheticConfig& config, std::uint64_t seed) {
  check(config);
  SyntheticCity city;
  city.config = config;
  city.seed = seed;
  Rng rng(derive_seed(seed, "synth/" + config.city));

  const std::size_t n = static_cast<std::size_t>(config.fsas);
  const std::size_t groups = static_cast<std::size_t>(config.groups);
  const std::size_t per_cat = static_cast<std::size_t>(config.venues_per_category);
  const int years = config.last_year - config.first_year + 1;

  // Codebook: independent uniform scores per category and dimension.
  std::vector<DimensionVector> scores(kC);
  for (std::size_t c = 0; c < kC; ++c) {
    for (auto& s : scores[c]) s = std::round(rng.uniform(1.0, 5.0) * 100.0) / 100.0;
    city.codebook.set(std::string(kCategories[c]), scores[c]);
  }

  // Group tastes: each group favours every groups-th category.
  std::vector<std::vector<double>> taste(groups, std::vector<double>(kC, 1.0));
  std::vector<std::vector<double>> push(groups, std::vector<double>(kC, 0.0));
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t c = 0; c < kC; ++c) {
      if (c % groups == g) taste[g][c] = 8.0;
      push[g][c] = c % groups == g ? 1.0 : 0.0;
    }
    const double mean = std::accumulate(push[g].begin(), push[g].end(), 0.0) / kC;
    for (auto& p : push[g]) p -= mean;
  }

  // Areas on a rough grid; study areas first, residential after.
  const std::size_t total_areas = n + static_cast<std::size_t>(config.small_fsas);
  std::vector<std::string> codes;
  const std::size_t cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(total_areas))));
  for (std::size_t a = 0; a < total_areas; ++a) {
    const bool small = a >= n;
    codes.push_back(fsa_code(static_cast<int>(small ? a - n : a), small));
    const double lat = 51.0 + 0.02 * static_cast<double>(a / cols) + rng.uniform(-0.004, 0.004);
    const double lon = -114.2 + 0.03 * static_cast<double>(a % cols) + rng.uniform(-0.006, 0.006);
    city.centroids.add(codes.back(), lat, lon);
  }

  // Census: latent z per area and vintage; 2016 partly persists 2011.
  const std::array<int, 2> vintages = {2011, 2016};
  std::vector<std::array<std::array<double, kCensusWidth>, 2>> latent(total_areas);
  for (std::size_t a = 0; a < total_areas; ++a) {
    for (std::size_t d = 0; d < kCensusWidth; ++d) {
      latent[a][0][d] = rng.normal();
      latent[a][1][d] = 0.5 * latent[a][0][d] + std::sqrt(0.75) * rng.normal();
    }
    for (std::size_t v = 0; v < 2; ++v) {
      CensusRow row{};
      for (std::size_t d = 0; d < kCensusWidth; ++d) row[d] = census_value(d, latent[a][v][d]);
      city.census.set(vintages[v], codes[a], row);
    }
  }
  std::vector<std::vector<double>> drift_w(kC, std::vector<double>(kCensusWidth));
  for (auto& r : drift_w) {
    for (auto& w : r) w = rng.normal() * config.area_drift / std::sqrt(static_cast<double>(kCensusWidth));
  }

  // Venues.
  ingest::Dataset& ds = city.dataset;
  ds.city = config.city;
  std::vector<std::vector<std::vector<std::size_t>>> venues_by_cat(total_areas,
                                                                   std::vector<std::vector<std::size_t>>(kC));
  for (std::size_t a = 0; a < total_areas; ++a) {
    const auto centre = *city.centroids.find(codes[a]);
    const std::size_t count = a < n ? per_cat * kC : 10;
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t c = a < n ? i / per_cat : rng.index(kC);
      ingest::Venue v;
      v.venue_id = codes[a] + "-v" + std::to_string(i);
      v.fsa = codes[a];
      v.categories = {std::string(kCategories[c])};
      v.lat = centre.lat + rng.uniform(-0.005, 0.005);
      v.lon = centre.lon + rng.uniform(-0.005, 0.005);
      venues_by_cat[a][c].push_back(ds.venues.size());
      ds.venues.push_back(std::move(v));
    }
  }

  // Users: residents with groups from a per-area mix.
  std::vector<std::size_t> user_home;
  std::vector<std::size_t> user_group;
  std::vector<std::vector<std::size_t>> residents(total_areas);
  for (std::size_t a = 0; a < total_areas; ++a) {
    const auto mix = dirichlet(rng, groups, 1.0);
    const int count = a < n ? config.residents_per_fsa : std::max(1, config.residents_per_fsa / 3);
    for (int i = 0; i < count; ++i) {
      residents[a].push_back(user_home.size());
      user_home.push_back(a);
      user_group.push_back(pick_weighted(rng, mix));
      ds.users.push_back({codes[a] + "-u" + std::to_string(i)});
    }
  }
  std::vector<std::vector<std::size_t>> members(groups);
  for (std::size_t u = 0; u < user_group.size(); ++u) members[user_group[u]].push_back(u);

  // Dynamics.
  std::vector<std::vector<double>> base(n, std::vector<double>(kC));
  for (auto& b : base) {
    for (auto& v : b) v = rng.normal() * config.base_spread;
  }
  std::vector<std::vector<double>> logits = base;

  ordered_json truth_years = ordered_json::array();
  for (int yi = 0; yi < years; ++yi) {
    const int year = config.first_year + yi;
    std::vector<std::vector<std::size_t>> present(total_areas);
    std::vector<std::set<std::size_t>> active_areas(user_home.size());

    auto add_review = [&](std::size_t user, std::size_t area, std::size_t venue) {
      ds.reviews.push_back({ds.users[user].user_id, ds.venues[venue].venue_id, year});
      active_areas[user].insert(area);
    };
    auto resident_for = [&](std::size_t area, std::size_t cat) {
      std::vector<double> w;
      w.reserve(residents[area].size());
      for (std::size_t u : residents[area]) w.push_back(taste[user_group[u]][cat]);
      return residents[area][pick_weighted(rng, w)];
    };
    auto venue_for = [&](std::size_t area, std::size_t user) {
      const auto& pool = present[area];
      std::vector<double> w;
      w.reserve(pool.size());
      for (std::size_t v : pool) {
        const auto c = static_cast<std::size_t>(
            std::find(kCategories.begin(), kCategories.end(), ds.venues[v].categories.front()) -
            kCategories.begin());
        w.push_back(taste[user_group[user]][c]);
      }
      return pool[pick_weighted(rng, w)];
    };

    // Realize the category mix as the set of reviewed venues.
    ordered_json area_truth = ordered_json::object();
    for (std::size_t a = 0; a < total_areas; ++a) {
      if (a >= n) {
        for (const auto& vec : venues_by_cat[a]) present[a].insert(present[a].end(), vec.begin(), vec.end());
        continue;
      }
      const auto pi = softmax(logits[a]);
      std::vector<std::size_t> counts(kC);
      std::size_t total = 0;
      for (std::size_t c = 0; c < kC; ++c) {
        counts[c] = std::min(per_cat, static_cast<std::size_t>(std::lround(pi[c] * static_cast<double>(per_cat))));
        total += counts[c];
      }
      if (total == 0) counts[static_cast<std::size_t>(std::max_element(pi.begin(), pi.end()) - pi.begin())] = 1;
      DimensionVector expected{};
      for (std::size_t c = 0; c < kC; ++c) {
        for (std::size_t d = 0; d < kDimensionCount; ++d) expected[d] += pi[c] * scores[c][d];
        std::vector<std::size_t> pool = venues_by_cat[a][c];
        rng.shuffle(pool.begin(), pool.end());
        present[a].insert(present[a].end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(counts[c]));
      }
      std::sort(present[a].begin(), present[a].end());
      area_truth[codes[a]] = {{"logits", logits[a]}, {"mix", pi}, {"expected_scene", expected}};
    }

    // Residents review every present venue of their area once.
    for (std::size_t a = 0; a < total_areas; ++a) {
      for (std::size_t v : present[a]) {
        const auto c = static_cast<std::size_t>(
            std::find(kCategories.begin(), kCategories.end(), ds.venues[v].categories.front()) -
            kCategories.begin());
        add_review(resident_for(a, c), a, v);
      }
    }

    // Visitors: the group mix of each area's visitors is redrawn yearly.
    ordered_json visitor_mix = ordered_json::object();
    for (std::size_t a = 0; a < n; ++a) {
      const auto mix = dirichlet(rng, groups, 0.5);
      visitor_mix[codes[a]] = mix;
      for (int i = 0; i < config.visitors_per_fsa; ++i) {
        const std::size_t g = pick_weighted(rng, mix);
        std::vector<std::size_t> candidates;
        for (std::size_t u : members[g]) {
          if (user_home[u] != a && user_home[u] < n) candidates.push_back(u);
        }
        if (candidates.empty()) continue;
        const std::size_t u = candidates[rng.index(candidates.size())];
        add_review(u, a, venue_for(a, u));
        add_review(u, user_home[u], venue_for(user_home[u], u));
      }
    }

    // Realized group shares of each area's co-review edges (true groups).
    std::vector<std::vector<double>> share(n, std::vector<double>(groups, 0.0));
    for (std::size_t u = 0; u < user_home.size(); ++u) {
      const auto& areas = active_areas[u];
      if (areas.size() < 2) continue;
      for (std::size_t a : areas) {
        if (a < n) share[a][user_group[u]] += static_cast<double>(areas.size() - 1);
      }
    }
    ordered_json share_json = ordered_json::object();
    for (std::size_t a = 0; a < n; ++a) {
      const double s = std::accumulate(share[a].begin(), share[a].end(), 0.0);
      for (auto& v : share[a]) v = s > 0 ? v / s : 1.0 / static_cast<double>(groups);
      share_json[codes[a]] = share[a];
    }
    truth_years.push_back({{"year", year}, {"areas", area_truth}, {"visitor_mix", visitor_mix},
                           {"edge_group_share", share_json}});

    // Next year's logits.
    const std::size_t vintage = ingest::map_census_vintage(year) == 2011 ? 0 : 1;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t c = 0; c < kC; ++c) {
        const double noise = config.logit_noise * rng.normal();
        switch (config.mode) {
          case Mode::AreaDriven: {
            double drift = 0.0;
            for (std::size_t d = 0; d < kCensusWidth; ++d) drift += drift_w[c][d] * latent[a][vintage][d];
            logits[a][c] += drift + noise;
            break;
          }
          case Mode::FlowDriven: {
            double pull = 0.0;
            for (std::size_t g = 0; g < groups; ++g) pull += share[a][g] * push[g][c];
            logits[a][c] = base[a][c] + config.flow_strength * pull + noise;
            break;
          }
          case Mode::None:
            logits[a][c] = base[a][c] + noise;
            break;
        }
      }
    }
  }

  // Review dates are drawn when writing.
  ds.reindex();

  ordered_json truth;
  truth["city"] = config.city;
  truth["mode"] = mode_name(config.mode);
  truth["seed"] = seed;
  truth["study_fsas"] = std::vector<std::string>(codes.begin(), codes.begin() + static_cast<std::ptrdiff_t>(n));
  truth["residential_fsas"] = std::vector<std::string>(codes.begin() + static_cast<std::ptrdiff_t>(n), codes.end());
  ordered_json user_groups = ordered_json::object();
  for (std::size_t u = 0; u < user_group.size(); ++u) user_groups[ds.users[u].user_id] = user_group[u];
  truth["user_groups"] = std::move(user_groups);
  truth["drift_matrix"] = drift_w;
  truth["years"] = std::move(truth_years);
  city.truth = std::move(truth);
  return city;
}

void write_synthetic_city(const SyntheticCity& city, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / name).string());
    return out;
  };
  const auto& ds = city.dataset;
  {
    auto out = open("venues.jsonl");
    for (const auto& v : ds.venues) {
      ordered_json j;
      j["business_id"] = v.venue_id;
      j["city"] = ds.city;
      j["postal_code"] = v.fsa + " 1A1";
      j["latitude"] = *v.lat;
      j["longitude"] = *v.lon;
      std::string cats;
      for (const auto& c : v.categories) cats += (cats.empty() ? "" : ", ") + c;
      j["categories"] = cats;
      out << j.dump() << '\n';
    }
  }
  {
    auto out = open("reviews.jsonl");
    Rng rng(derive_seed(city.seed, "synth/dates"));
    std::size_t i = 0;
    for (const auto& r : ds.reviews) {
      ordered_json j;
      j["review_id"] = "r" + std::to_string(i++);
      j["user_id"] = r.user_id;
      j["business_id"] = r.venue_id;
      j["date"] = date_string(r.year, rng);
      out << j.dump() << '\n';
    }
  }
  {
    auto out = open("users.jsonl");
    for (const auto& u : ds.users) out << ordered_json{{"user_id", u.user_id}}.dump() << '\n';
  }
  {
    auto out = open("census.csv");
    out << "fsa,vintage";
    for (auto c : ingest::kCensusColumns) out << ',' << c;
    out << '\n';
    for (int vintage : city.census.vintages()) {
      for (const auto& [fsa, centre] : city.centroids.all()) {
        (void)centre;
        if (!city.census.has(vintage, fsa)) continue;
        out << fsa << ',' << vintage;
        for (double v : city.census.row(vintage, fsa)) out << ',' << format_double(v);
        out << '\n';
      }
    }
  }
  {
    auto out = open("codebook.csv");
    out << "category";
    for (std::size_t d = 0; d < kDimensionCount; ++d) out << ",dim_" << d + 1;
    out << '\n';
    for (const auto& [cat, dims] : city.codebook.all()) {
      out << csv_field(cat);
      for (double v : dims) out << ',' << format_double(v);
      out << '\n';
    }
  }
  {
    auto out = open("centroids.csv");
    out << "fsa,lat,lon\n";
    for (const auto& [fsa, c] : city.centroids.all()) {
      out << fsa << ',' << format_double(c.lat) << ',' << format_double(c.lon) << '\n';
    }
  }
  {
    auto out = open("truth.json");
    out << city.truth.dump(1) << '\n';
  }
}

}  // namespace scenecast::synthetic
