#pragma once

#include <array>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace scenecast {

inline constexpr std::size_t kDimensionCount = 15;
inline constexpr std::size_t kCensusWidth = 7;

using DimensionVector = std::array<double, kDimensionCount>;
using CensusRow = std::array<double, kCensusWidth>;

}  // namespace scenecast

namespace scenecast::ingest {

/// Census column names, in feature order.
inline constexpr std::array<std::string_view, kCensusWidth> kCensusColumns = {
    "pct_ba_or_higher", "average_rent",     "pct_visible_minority", "median_income",
    "pct_age_20_34",    "pct_walk_to_work", "pct_arts_employment"};

/// Whether a census column is a percentage (validated to [0, 100]).
inline constexpr std::array<bool, kCensusWidth> kCensusIsPercent = {true, false, true, false,
                                                                    true, true,  true};

struct StudyWindow {
  int first_year = 2011;
  int last_year = 2018;
  bool contains(int year) const { return year >= first_year && year <= last_year; }
};

struct Venue {
  std::string venue_id;
  std::string fsa;
  std::vector<std::string> categories;
  std::optional<double> lat;
  std::optional<double> lon;
};

struct Review {
  std::string user_id;
  std::string venue_id;
  int year = 0;
};

struct User {
  std::string user_id;
};

/// One city's venues, reviews and users with an FSA index.
class Dataset {
 public:
  std::string city;
  std::vector<Venue> venues;
  std::vector<Review> reviews;
  std::vector<User> users;

  /// Rebuilds the FSA and id indices. Call after mutating the vectors.
  void reindex();

  /// FSA code → indices into `venues`, ordered by FSA code.
  const std::map<std::string, std::vector<std::size_t>>& fsa_venues() const { return fsa_venues_; }
  std::vector<std::string> fsas() const;
  const Venue* find_venue(std::string_view venue_id) const;
  std::size_t category_count() const;

 private:
  std::map<std::string, std::vector<std::size_t>> fsa_venues_;
  std::unordered_map<std::string, std::size_t> venue_index_;
};

/// FSA centroid table. Doubles as the lat/lon → FSA locator for venues
/// without a usable postal code (nearest centroid wins).
class CentroidTable {
 public:
  struct Centroid {
    double lat = 0.0;
    double lon = 0.0;
  };

  void add(const std::string& fsa, double lat, double lon);
  std::optional<Centroid> find(std::string_view fsa) const;
  std::string nearest(double lat, double lon) const;
  bool empty() const { return centroids_.empty(); }
  const std::map<std::string, Centroid, std::less<>>& all() const { return centroids_; }

 private:
  std::map<std::string, Centroid, std::less<>> centroids_;
};

CentroidTable load_centroids(const std::filesystem::path& path);
CentroidTable load_centroids(std::istream& in, const std::string& source_name);

struct LoadOptions {
  StudyWindow window;
  /// When set, only venues whose `city` field matches (case-insensitive) are
  /// kept, and reviews of other venues are skipped instead of rejected.
  std::optional<std::string> city;
  const CentroidTable* locator = nullptr;
};

struct LoadReport {
  std::size_t venues = 0;
  std::size_t reviews = 0;
  std::size_t users = 0;
  std::size_t categories = 0;
  std::size_t dropped_empty_categories = 0;
  std::size_t dropped_no_fsa = 0;
  std::size_t dropped_other_city = 0;
  std::size_t reviews_outside_window = 0;
  std::size_t reviews_of_dropped_venues = 0;
  std::vector<std::string> warnings;
};

Dataset load_dataset(const std::filesystem::path& venue_path,
                     const std::filesystem::path& review_path,
                     const std::filesystem::path& user_path, const LoadOptions& options = {},
                     LoadReport* report = nullptr);

Dataset load_dataset(std::istream& venues, std::istream& reviews, std::istream& users,
                     const LoadOptions& options = {}, LoadReport* report = nullptr);

/// Keeps FSAs with at least `min_venues` unique venues (counted over all
/// years), and the reviews and users attached to their venues.
Dataset filter_fsas(const Dataset& dataset, int min_venues = 30);

/// Census vintage closest to `year`; ties go to the earlier vintage.
int map_census_vintage(int year, std::span<const int> vintages);
int map_census_vintage(int year);

/// "t2p 1j9" → "T2P". Returns nullopt if the prefix is not letter-digit-letter.
std::optional<std::string> normalize_fsa(std::string_view postal_code);

/// Splits Yelp's comma-separated category string, dropping blank entries.
std::vector<std::string> split_categories(std::string_view text);

class CensusTables {
 public:
  void set(int vintage, const std::string& fsa, const CensusRow& row);
  const CensusRow& row(int vintage, std::string_view fsa) const;
  bool has(int vintage, std::string_view fsa) const;
  std::vector<int> vintages() const;
  /// Row for the vintage closest to `year`.
  const CensusRow& for_year(int year, std::string_view fsa) const;
  /// Throws DataError unless every FSA has a row in every vintage.
  void require_coverage(std::span<const std::string> fsas) const;

 private:
  std::map<int, std::map<std::string, CensusRow, std::less<>>> by_vintage_;
};

CensusTables load_census(const std::filesystem::path& path);
CensusTables load_census(std::istream& in, const std::string& source_name);

class DimensionCodebook {
 public:
  void set(const std::string& category, const DimensionVector& scores);
  const DimensionVector* find(std::string_view category) const;
  std::size_t size() const { return scores_.size(); }
  const std::map<std::string, DimensionVector, std::less<>>& all() const { return scores_; }

 private:
  std::map<std::string, DimensionVector, std::less<>> scores_;
};

DimensionCodebook load_codebook(const std::filesystem::path& path);
DimensionCodebook load_codebook(std::istream& in, const std::string& source_name);

}  // namespace scenecast::ingest
