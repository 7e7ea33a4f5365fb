#pragma once

// Small builders shared by the unit and acceptance tests.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "scenecast/ingest.hpp"
#include "scenecast/seeding.hpp"

namespace scenecast::testing {

inline std::string fsa_code(int i) {
  // T2A, T2B, ..., T3A, ...
  std::string s = "T";
  s += static_cast<char>('2' + i / 26);
  s += static_cast<char>('A' + i % 26);
  return s;
}

inline std::string venue_line(const std::string& id, const std::string& postal,
                              const std::string& categories, double lat = 51.0,
                              double lon = -114.0) {
  nlohmann::json j;
  j["business_id"] = id;
  j["postal_code"] = postal;
  j["categories"] = categories;
  j["latitude"] = lat;
  j["longitude"] = lon;
  return j.dump();
}

inline std::string review_line(const std::string& user, const std::string& venue,
                               const std::string& date) {
  nlohmann::json j;
  j["user_id"] = user;
  j["business_id"] = venue;
  j["date"] = date;
  return j.dump();
}

inline std::string user_line(const std::string& user) {
  nlohmann::json j;
  j["user_id"] = user;
  return j.dump();
}

struct RandomCitySpec {
  int fsas_min = 2;
  int fsas_max = 7;
  int venues_max = 6;
  int users_max = 25;
  int reviews_max = 12;
  int categories = 8;
  int first_year = 2011;
  int last_year = 2013;
};

inline std::string category_name(int c) { return "cat" + std::to_string(c); }

/// Random city: every FSA has at least one venue, each venue 1-3 categories,
/// each user a random number of reviews spread over the years.
inline ingest::Dataset random_dataset(Rng& rng, const RandomCitySpec& spec = {}) {
  ingest::Dataset ds;
  ds.city = "testville";
  const int n_fsas = spec.fsas_min + static_cast<int>(rng.index(spec.fsas_max - spec.fsas_min + 1));
  int venue_id = 0;
  for (int f = 0; f < n_fsas; ++f) {
    const int nv = 1 + static_cast<int>(rng.index(spec.venues_max));
    for (int v = 0; v < nv; ++v) {
      ingest::Venue venue;
      venue.venue_id = "v" + std::to_string(venue_id++);
      venue.fsa = fsa_code(f);
      std::set<int> cats;
      const int m = 1 + static_cast<int>(rng.index(3));
      while (static_cast<int>(cats.size()) < m) cats.insert(static_cast<int>(rng.index(spec.categories)));
      for (int c : cats) venue.categories.push_back(category_name(c));
      venue.lat = 51.0 + 0.01 * f;
      venue.lon = -114.2 + 0.02 * f;
      ds.venues.push_back(std::move(venue));
    }
  }
  const int n_users = 1 + static_cast<int>(rng.index(spec.users_max));
  const int years = spec.last_year - spec.first_year + 1;
  for (int u = 0; u < n_users; ++u) {
    ds.users.push_back({"u" + std::to_string(u)});
    const int nr = static_cast<int>(rng.index(spec.reviews_max + 1));
    for (int r = 0; r < nr; ++r) {
      const auto& v = ds.venues[rng.index(ds.venues.size())];
      ds.reviews.push_back({ds.users.back().user_id, v.venue_id,
                            spec.first_year + static_cast<int>(rng.index(years))});
    }
  }
  ds.reindex();
  return ds;
}

inline ingest::DimensionCodebook random_codebook(Rng& rng, int categories) {
  ingest::DimensionCodebook book;
  for (int c = 0; c < categories; ++c) {
    DimensionVector s{};
    for (auto& x : s) x = rng.uniform(1.0, 5.0);
    book.set(category_name(c), s);
  }
  return book;
}

inline ingest::CensusTables random_census(Rng& rng, const std::vector<std::string>& fsas) {
  ingest::CensusTables census;
  for (int vintage : {2011, 2016}) {
    for (const auto& f : fsas) {
      CensusRow row{};
      for (std::size_t i = 0; i < kCensusWidth; ++i) {
        row[i] = ingest::kCensusIsPercent[i] ? rng.uniform(0.0, 100.0) : rng.uniform(500.0, 90000.0);
      }
      census.set(vintage, f, row);
    }
  }
  return census;
}

/// Random hard groups; roughly one user in five is left without a group.
inline std::map<std::string, int> random_groups(Rng& rng, const ingest::Dataset& ds, int k) {
  std::map<std::string, int> out;
  for (const auto& u : ds.users) {
    if (rng.bernoulli(0.2)) continue;
    out[u.user_id] = static_cast<int>(rng.index(k));
  }
  return out;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("scenecast_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace scenecast::testing
