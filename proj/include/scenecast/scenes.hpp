#pragma once

#include <filesystem>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "scenecast/ingest.hpp"
#include "scenecast/matrix.hpp"

namespace scenecast::scenes {

/// Mean over venues of each venue's mean codebook score across its
/// categories. Throws DataError naming any category absent from the codebook.
DimensionVector score_fsa(std::span<const ingest::Venue* const> venues,
                          const ingest::DimensionCodebook& codebook);
DimensionVector score_fsa(std::span<const ingest::Venue> venues,
                          const ingest::DimensionCodebook& codebook);

struct SceneCell {
  DimensionVector dims{};
  /// Venues present (reviewed) in the year. 0 when carried forward.
  std::size_t omega = 0;
  bool carried_forward = false;
};

using SceneSlice = std::map<std::string, SceneCell>;

class SceneTable {
 public:
  std::string city;

  void set_year(int year, SceneSlice slice) { years_[year] = std::move(slice); }
  bool has_year(int year) const { return years_.count(year) != 0; }
  const SceneSlice& year(int year) const;
  const SceneCell& cell(int year, const std::string& fsa) const;
  std::vector<int> years() const;

  /// Scene vectors for `year`, one row per FSA in the given order.
  Matrix matrix(int year, std::span<const std::string> fsas) const;

 private:
  std::map<int, SceneSlice> years_;
};

/// Scores every FSA of `dataset` from the venues reviewed in `year`. An FSA
/// with no reviewed venue takes `previous`'s vector; with no previous slice
/// that is an error.
SceneSlice score_city_year(const ingest::Dataset& dataset,
                           const ingest::DimensionCodebook& codebook, int year,
                           const SceneSlice* previous = nullptr);

/// Scores consecutive years first..last with carry-forward.
SceneTable build_scene_table(const ingest::Dataset& dataset,
                             const ingest::DimensionCodebook& codebook, int first_year,
                             int last_year);

/// CSV: city, year, fsa, dim_1..dim_15, omega.
void write_scene_csv(std::ostream& out, const SceneTable& table);
SceneTable read_scene_csv(const std::filesystem::path& path);

}  // namespace scenecast::scenes
