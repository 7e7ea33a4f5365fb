#include "scenecast/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "scenecast/csv.hpp"
#include "scenecast/error.hpp"

namespace scenecast::ingest {

using nlohmann::json;

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::ifstream open_or_throw(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ParseError("cannot open " + p.string());
  return in;
}

std::optional<std::string> string_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) return std::nullopt;
  return it->get<std::string>();
}

std::optional<double> number_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_number()) return std::nullopt;
  return it->get<double>();
}

/// Calls `fn(json, line_no)` for each non-blank line.
template <typename Fn>
void for_each_record(std::istream& in, const char* what, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string(what) + " line " + std::to_string(line_no) +
                       ": malformed JSON (" + e.what() + ")");
    }
    if (!record.is_object()) {
      throw ParseError(std::string(what) + " line " + std::to_string(line_no) +
                       ": expected a JSON object");
    }
    fn(record, line_no);
  }
}

std::string require_string(const json& j, const char* key, const char* what, std::size_t line) {
  auto v = string_field(j, key);
  if (!v || v->empty()) {
    throw ParseError(std::string(what) + " line " + std::to_string(line) + ": missing '" + key +
                     "'");
  }
  return *v;
}

std::string join_ids(const std::set<std::string>& ids) {
  std::string out;
  std::size_t n = 0;
  for (const auto& id : ids) {
    if (n == 10) {
      out += ", ... (" + std::to_string(ids.size()) + " total)";
      break;
    }
    if (n++) out += ", ";
    out += id;
  }
  return out;
}

}  // namespace

void Dataset::reindex() {
  fsa_venues_.clear();
  venue_index_.clear();
  for (std::size_t i = 0; i < venues.size(); ++i) {
    fsa_venues_[venues[i].fsa].push_back(i);
    venue_index_.emplace(venues[i].venue_id, i);
  }
}

std::vector<std::string> Dataset::fsas() const {
  std::vector<std::string> out;
  out.reserve(fsa_venues_.size());
  for (const auto& [fsa, _] : fsa_venues_) out.push_back(fsa);
  return out;
}

const Venue* Dataset::find_venue(std::string_view venue_id) const {
  auto it = venue_index_.find(std::string(venue_id));
  return it == venue_index_.end() ? nullptr : &venues[it->second];
}

std::size_t Dataset::category_count() const {
  std::set<std::string_view> cats;
  for (const auto& v : venues) {
    for (const auto& c : v.categories) cats.insert(c);
  }
  return cats.size();
}

void CentroidTable::add(const std::string& fsa, double lat, double lon) {
  centroids_[fsa] = Centroid{lat, lon};
}

std::optional<CentroidTable::Centroid> CentroidTable::find(std::string_view fsa) const {
  auto it = centroids_.find(fsa);
  if (it == centroids_.end()) return std::nullopt;
  return it->second;
}

std::string CentroidTable::nearest(double lat, double lon) const {
  if (centroids_.empty()) throw DataError("centroid table is empty");
  const double coslat = std::cos(lat * M_PI / 180.0);
  std::string best;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& [fsa, c] : centroids_) {
    const double dlat = c.lat - lat;
    const double dlon = (c.lon - lon) * coslat;
    const double d = dlat * dlat + dlon * dlon;
    if (d < best_d) {
      best_d = d;
      best = fsa;
    }
  }
  return best;
}

CentroidTable load_centroids(std::istream& in, const std::string& source_name) {
  const CsvTable t = read_csv(in, source_name);
  const auto fsa_col = t.column("fsa");
  const auto lat_col = t.column("lat");
  const auto lon_col = t.column("lon");
  CentroidTable table;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string ctx = source_name + ":" + std::to_string(t.line_numbers[r]);
    auto fsa = normalize_fsa(t.rows[r][fsa_col]);
    if (!fsa) throw ParseError(ctx + ": invalid FSA '" + t.rows[r][fsa_col] + "'");
    table.add(*fsa, parse_double(t.rows[r][lat_col], ctx), parse_double(t.rows[r][lon_col], ctx));
  }
  return table;
}

CentroidTable load_centroids(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return load_centroids(in, path.string());
}

std::optional<std::string> normalize_fsa(std::string_view postal_code) {
  std::string compact;
  for (char c : postal_code) {
    if (!std::isspace(static_cast<unsigned char>(c))) {
      compact.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
  }
  if (compact.size() < 3) return std::nullopt;
  compact.resize(3);
  if (!std::isupper(static_cast<unsigned char>(compact[0])) ||
      !std::isdigit(static_cast<unsigned char>(compact[1])) ||
      !std::isupper(static_cast<unsigned char>(compact[2]))) {
    return std::nullopt;
  }
  return compact;
}

std::vector<std::string> split_categories(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    auto item = trim(text.substr(start, end - start));
    if (!item.empty()) out.push_back(std::move(item));
    start = end + 1;
  }
  return out;
}

Dataset load_dataset(std::istream& venue_in, std::istream& review_in, std::istream& user_in,
                     const LoadOptions& options, LoadReport* report) {
  LoadReport local;
  LoadReport& rep = report ? *report : local;
  rep = LoadReport{};
  Dataset ds;
  if (options.city) ds.city = *options.city;

  std::unordered_set<std::string> dropped_venues;
  std::unordered_set<std::string> seen_venues;
  const std::string wanted_city = options.city ? lower(trim(*options.city)) : std::string();

  for_each_record(venue_in, "venue", [&](const json& j, std::size_t line) {
    Venue v;
    v.venue_id = require_string(j, "business_id", "venue", line);
    if (!seen_venues.insert(v.venue_id).second) {
      throw ParseError("venue line " + std::to_string(line) + ": duplicate business_id '" +
                       v.venue_id + "'");
    }
    if (options.city) {
      auto c = string_field(j, "city");
      if (!c || lower(trim(*c)) != wanted_city) {
        ++rep.dropped_other_city;
        dropped_venues.insert(v.venue_id);
        return;
      }
    }
    auto cat_it = j.find("categories");
    if (cat_it != j.end() && cat_it->is_string()) {
      v.categories = split_categories(cat_it->get<std::string>());
    } else if (cat_it != j.end() && cat_it->is_array()) {
      for (const auto& c : *cat_it) {
        if (c.is_string()) {
          auto s = trim(c.get<std::string>());
          if (!s.empty()) v.categories.push_back(std::move(s));
        }
      }
    }
    v.lat = number_field(j, "latitude");
    v.lon = number_field(j, "longitude");
    if (v.categories.empty()) {
      ++rep.dropped_empty_categories;
      rep.warnings.push_back("venue '" + v.venue_id + "' (line " + std::to_string(line) +
                             ") has no categories; dropped");
      dropped_venues.insert(v.venue_id);
      return;
    }
    std::optional<std::string> fsa;
    if (auto pc = string_field(j, "postal_code")) fsa = normalize_fsa(*pc);
    if (!fsa && options.locator && !options.locator->empty() && v.lat && v.lon) {
      fsa = options.locator->nearest(*v.lat, *v.lon);
    }
    if (!fsa) {
      ++rep.dropped_no_fsa;
      rep.warnings.push_back("venue '" + v.venue_id + "' (line " + std::to_string(line) +
                             ") has no resolvable FSA; dropped");
      dropped_venues.insert(v.venue_id);
      return;
    }
    v.fsa = *fsa;
    ds.venues.push_back(std::move(v));
  });

  std::unordered_set<std::string> kept_venues;
  for (const auto& v : ds.venues) kept_venues.insert(v.venue_id);

  std::set<std::string> dangling;
  for_each_record(review_in, "review", [&](const json& j, std::size_t line) {
    Review r;
    r.user_id = require_string(j, "user_id", "review", line);
    r.venue_id = require_string(j, "business_id", "review", line);
    const std::string date = require_string(j, "date", "review", line);
    if (date.size() < 4) {
      throw ParseError("review line " + std::to_string(line) + ": bad date '" + date + "'");
    }
    r.year = parse_int(date.substr(0, 4), "review line " + std::to_string(line));
    if (!kept_venues.count(r.venue_id)) {
      if (dropped_venues.count(r.venue_id)) {
        ++rep.reviews_of_dropped_venues;
      } else if (!options.city) {
        dangling.insert(r.venue_id);
      }
      return;
    }
    if (!options.window.contains(r.year)) {
      ++rep.reviews_outside_window;
      return;
    }
    ds.reviews.push_back(std::move(r));
  });
  if (!dangling.empty()) {
    throw DataError("reviews reference unknown venue ids: " + join_ids(dangling));
  }

  std::unordered_set<std::string> reviewers;
  for (const auto& r : ds.reviews) reviewers.insert(r.user_id);

  std::unordered_set<std::string> known_users;
  for_each_record(user_in, "user", [&](const json& j, std::size_t line) {
    User u;
    u.user_id = require_string(j, "user_id", "user", line);
    if (!known_users.insert(u.user_id).second) return;
    if (options.city && !reviewers.count(u.user_id)) return;
    ds.users.push_back(std::move(u));
  });

  std::set<std::string> unknown_users;
  for (const auto& id : reviewers) {
    if (!known_users.count(id)) unknown_users.insert(id);
  }
  if (!unknown_users.empty()) {
    throw DataError("reviews reference unknown user ids: " + join_ids(unknown_users));
  }

  ds.reindex();
  rep.venues = ds.venues.size();
  rep.reviews = ds.reviews.size();
  rep.users = ds.users.size();
  rep.categories = ds.category_count();
  return ds;
}

Dataset load_dataset(const std::filesystem::path& venue_path,
                     const std::filesystem::path& review_path,
                     const std::filesystem::path& user_path, const LoadOptions& options,
                     LoadReport* report) {
  auto v = open_or_throw(venue_path);
  auto r = open_or_throw(review_path);
  auto u = open_or_throw(user_path);
  return load_dataset(v, r, u, options, report);
}

Dataset filter_fsas(const Dataset& dataset, int min_venues) {
  Dataset out;
  out.city = dataset.city;
  std::unordered_set<std::string> kept_venues;
  for (const auto& [fsa, idx] : dataset.fsa_venues()) {
    if (idx.size() < static_cast<std::size_t>(min_venues)) continue;
    for (auto i : idx) {
      out.venues.push_back(dataset.venues[i]);
      kept_venues.insert(dataset.venues[i].venue_id);
    }
  }
  if (out.venues.empty()) {
    throw DataError("no FSA has at least " + std::to_string(min_venues) + " unique venues");
  }
  std::unordered_set<std::string> reviewers;
  for (const auto& r : dataset.reviews) {
    if (kept_venues.count(r.venue_id)) {
      out.reviews.push_back(r);
      reviewers.insert(r.user_id);
    }
  }
  for (const auto& u : dataset.users) {
    if (reviewers.count(u.user_id)) out.users.push_back(u);
  }
  out.reindex();
  return out;
}

int map_census_vintage(int year, std::span<const int> vintages) {
  if (vintages.empty()) throw DataError("no census vintages available");
  int best = vintages.front();
  for (int v : vintages) {
    const int d = std::abs(year - v);
    const int bd = std::abs(year - best);
    if (d < bd || (d == bd && v < best)) best = v;
  }
  return best;
}

int map_census_vintage(int year) {
  static constexpr std::array<int, 2> kVintages = {2011, 2016};
  return map_census_vintage(year, kVintages);
}

void CensusTables::set(int vintage, const std::string& fsa, const CensusRow& row) {
  by_vintage_[vintage][fsa] = row;
}

bool CensusTables::has(int vintage, std::string_view fsa) const {
  auto v = by_vintage_.find(vintage);
  return v != by_vintage_.end() && v->second.find(fsa) != v->second.end();
}

const CensusRow& CensusTables::row(int vintage, std::string_view fsa) const {
  auto v = by_vintage_.find(vintage);
  if (v == by_vintage_.end()) {
    throw DataError("no census vintage " + std::to_string(vintage));
  }
  auto r = v->second.find(fsa);
  if (r == v->second.end()) {
    throw DataError("census vintage " + std::to_string(vintage) + " has no row for FSA " +
                    std::string(fsa));
  }
  return r->second;
}

std::vector<int> CensusTables::vintages() const {
  std::vector<int> out;
  for (const auto& [v, _] : by_vintage_) out.push_back(v);
  return out;
}

const CensusRow& CensusTables::for_year(int year, std::string_view fsa) const {
  const auto vs = vintages();
  return row(map_census_vintage(year, vs), fsa);
}

void CensusTables::require_coverage(std::span<const std::string> fsas) const {
  if (by_vintage_.empty()) throw DataError("census table is empty");
  for (const auto& [vintage, rows] : by_vintage_) {
    for (const auto& f : fsas) {
      if (rows.find(f) == rows.end()) {
        throw DataError("census vintage " + std::to_string(vintage) + " has no row for FSA " + f);
      }
    }
  }
}

CensusTables load_census(std::istream& in, const std::string& source_name) {
  const CsvTable t = read_csv(in, source_name);
  const auto fsa_col = t.column("fsa");
  const auto vintage_col = t.column("vintage");
  std::array<std::size_t, kCensusWidth> cols{};
  for (std::size_t i = 0; i < kCensusWidth; ++i) cols[i] = t.column(kCensusColumns[i]);
  CensusTables tables;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string ctx = source_name + ":" + std::to_string(t.line_numbers[r]);
    auto fsa = normalize_fsa(row[fsa_col]);
    if (!fsa) throw ParseError(ctx + ": invalid FSA '" + row[fsa_col] + "'");
    const int vintage = parse_int(row[vintage_col], ctx);
    CensusRow values{};
    for (std::size_t i = 0; i < kCensusWidth; ++i) {
      values[i] = parse_double(row[cols[i]], ctx);
      if (!std::isfinite(values[i])) throw ParseError(ctx + ": non-finite census value");
      if (kCensusIsPercent[i] && (values[i] < 0.0 || values[i] > 100.0)) {
        throw DataError(ctx + ": " + std::string(kCensusColumns[i]) + " = " +
                        row[cols[i]] + " is outside [0, 100]");
      }
    }
    if (tables.has(vintage, *fsa)) {
      throw DataError(ctx + ": duplicate census row for " + *fsa + " vintage " +
                      std::to_string(vintage));
    }
    tables.set(vintage, *fsa, values);
  }
  return tables;
}

CensusTables load_census(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return load_census(in, path.string());
}

void DimensionCodebook::set(const std::string& category, const DimensionVector& scores) {
  scores_[category] = scores;
}

const DimensionVector* DimensionCodebook::find(std::string_view category) const {
  auto it = scores_.find(category);
  return it == scores_.end() ? nullptr : &it->second;
}

DimensionCodebook load_codebook(std::istream& in, const std::string& source_name) {
  const CsvTable t = read_csv(in, source_name);
  const auto cat_col = t.column("category");
  std::array<std::size_t, kDimensionCount> cols{};
  for (std::size_t i = 0; i < kDimensionCount; ++i) {
    cols[i] = t.column("dim_" + std::to_string(i + 1));
  }
  DimensionCodebook book;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string ctx = source_name + ":" + std::to_string(t.line_numbers[r]);
    if (row[cat_col].empty()) throw ParseError(ctx + ": empty category");
    DimensionVector s{};
    for (std::size_t i = 0; i < kDimensionCount; ++i) {
      if (row[cols[i]].empty()) {
        throw ParseError(ctx + ": missing dim_" + std::to_string(i + 1));
      }
      s[i] = parse_double(row[cols[i]], ctx);
      if (!(s[i] >= 1.0 && s[i] <= 5.0)) {
        throw DataError(ctx + ": dim_" + std::to_string(i + 1) + " score " + row[cols[i]] +
                        " is outside [1, 5]");
      }
    }
    book.set(row[cat_col], s);
  }
  return book;
}

DimensionCodebook load_codebook(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return load_codebook(in, path.string());
}

}  // namespace scenecast::ingest
