#include "scenecast/scenes.hpp"

#include <set>

#include "scenecast/csv.hpp"
#include "scenecast/error.hpp"

namespace scenecast::scenes {

namespace {

template <typename VenueRef>
DimensionVector score_impl(std::span<VenueRef> venues, const ingest::DimensionCodebook& codebook,
                           auto&& deref) {
  if (venues.empty()) throw DataError("cannot score an FSA with no venues");
  DimensionVector total{};
  for (const auto& ref : venues) {
    const ingest::Venue& v = deref(ref);
    if (v.categories.empty()) {
      throw DataError("venue '" + v.venue_id + "' has no categories");
    }
    DimensionVector venue_mean{};
    for (const auto& cat : v.categories) {
      const auto* s = codebook.find(cat);
      if (!s) throw DataError("category '" + cat + "' is missing from the codebook");
      for (std::size_t i = 0; i < kDimensionCount; ++i) venue_mean[i] += (*s)[i];
    }
    const double m = static_cast<double>(v.categories.size());
    for (std::size_t i = 0; i < kDimensionCount; ++i) total[i] += venue_mean[i] / m;
  }
  const double omega = static_cast<double>(venues.size());
  for (auto& t : total) t /= omega;
  return total;
}

}  // namespace

DimensionVector score_fsa(std::span<const ingest::Venue* const> venues,
                          const ingest::DimensionCodebook& codebook) {
  return score_impl(venues, codebook, [](const ingest::Venue* v) -> const ingest::Venue& {
    return *v;
  });
}

DimensionVector score_fsa(std::span<const ingest::Venue> venues,
                          const ingest::DimensionCodebook& codebook) {
  return score_impl(venues, codebook,
                    [](const ingest::Venue& v) -> const ingest::Venue& { return v; });
}

const SceneSlice& SceneTable::year(int y) const {
  auto it = years_.find(y);
  if (it == years_.end()) throw DataError("no scene data for year " + std::to_string(y));
  return it->second;
}

const SceneCell& SceneTable::cell(int y, const std::string& fsa) const {
  const auto& slice = year(y);
  auto it = slice.find(fsa);
  if (it == slice.end()) {
    throw DataError("no scene vector for FSA " + fsa + " in " + std::to_string(y));
  }
  return it->second;
}

std::vector<int> SceneTable::years() const {
  std::vector<int> out;
  for (const auto& [y, _] : years_) out.push_back(y);
  return out;
}

Matrix SceneTable::matrix(int y, std::span<const std::string> fsas) const {
  Matrix m(fsas.size(), kDimensionCount);
  for (std::size_t r = 0; r < fsas.size(); ++r) {
    const auto& c = cell(y, fsas[r]);
    for (std::size_t i = 0; i < kDimensionCount; ++i) m(r, i) = c.dims[i];
  }
  return m;
}

SceneSlice score_city_year(const ingest::Dataset& dataset,
                           const ingest::DimensionCodebook& codebook, int year,
                           const SceneSlice* previous) {
  std::set<std::string> reviewed;
  for (const auto& r : dataset.reviews) {
    if (r.year == year) reviewed.insert(r.venue_id);
  }
  SceneSlice slice;
  for (const auto& [fsa, idx] : dataset.fsa_venues()) {
    std::vector<const ingest::Venue*> present;
    for (auto i : idx) {
      if (reviewed.count(dataset.venues[i].venue_id)) present.push_back(&dataset.venues[i]);
    }
    SceneCell cell;
    if (present.empty()) {
      const SceneCell* prior = nullptr;
      if (previous) {
        auto it = previous->find(fsa);
        if (it != previous->end()) prior = &it->second;
      }
      if (!prior) {
        throw DataError("FSA " + fsa + " has no reviewed venues in " + std::to_string(year) +
                        " and no earlier year to carry forward");
      }
      cell.dims = prior->dims;
      cell.carried_forward = true;
    } else {
      cell.dims = score_fsa(std::span<const ingest::Venue* const>(present), codebook);
      cell.omega = present.size();
    }
    slice.emplace(fsa, cell);
  }
  return slice;
}

SceneTable build_scene_table(const ingest::Dataset& dataset,
                             const ingest::DimensionCodebook& codebook, int first_year,
                             int last_year) {
  SceneTable table;
  table.city = dataset.city;
  const SceneSlice* prev = nullptr;
  for (int y = first_year; y <= last_year; ++y) {
    table.set_year(y, score_city_year(dataset, codebook, y, prev));
    prev = &table.year(y);
  }
  return table;
}

void write_scene_csv(std::ostream& out, const SceneTable& table) {
  out << "city,year,fsa";
  for (std::size_t i = 1; i <= kDimensionCount; ++i) out << ",dim_" << i;
  out << ",omega\n";
  for (int y : table.years()) {
    for (const auto& [fsa, cell] : table.year(y)) {
      out << csv_field(table.city) << ',' << y << ',' << fsa;
      for (double d : cell.dims) out << ',' << format_double(d);
      out << ',' << cell.omega << '\n';
    }
  }
}

SceneTable read_scene_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const auto city_col = t.column("city");
  const auto year_col = t.column("year");
  const auto fsa_col = t.column("fsa");
  const auto omega_col = t.column("omega");
  std::array<std::size_t, kDimensionCount> cols{};
  for (std::size_t i = 0; i < kDimensionCount; ++i) {
    cols[i] = t.column("dim_" + std::to_string(i + 1));
  }
  std::map<int, SceneSlice> years;
  SceneTable table;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string ctx = path.string() + ":" + std::to_string(t.line_numbers[r]);
    table.city = row[city_col];
    SceneCell cell;
    for (std::size_t i = 0; i < kDimensionCount; ++i) cell.dims[i] = parse_double(row[cols[i]], ctx);
    cell.omega = static_cast<std::size_t>(parse_int(row[omega_col], ctx));
    cell.carried_forward = cell.omega == 0;
    years[parse_int(row[year_col], ctx)][row[fsa_col]] = cell;
  }
  for (auto& [y, slice] : years) table.set_year(y, std::move(slice));
  return table;
}

}  // namespace scenecast::scenes
