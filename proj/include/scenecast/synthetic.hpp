#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "scenecast/ingest.hpp"

namespace scenecast::synthetic {

/// What drives next year's category mix of an area.
enum class Mode {
  AreaDriven,  // logits drift by W · z(census of the mapped vintage)
  FlowDriven,  // logits follow the group shares of the area's co-review edges
  None,        // i.i.d. noise around a fixed per-area base
};

std::string_view mode_name(Mode mode);
Mode mode_from_name(std::string_view name);

struct SyntheticConfig {
  std::string city = "Synthville";
  Mode mode = Mode::AreaDriven;
  int fsas = 12;
  /// Extra residential areas with too few venues to survive the 30-venue filter.
  int small_fsas = 2;
  int residents_per_fsa = 30;
  int groups = 3;
  int first_year = 2011;
  int last_year = 2018;
  /// Venues per category in each area; also the number of reviewed venues
  /// per area per year, so the realized mix tracks the planted one closely.
  int venues_per_category = 120;
  int visitors_per_fsa = 10;
  double logit_noise = 0.05;
  double area_drift = 0.35;
  double flow_strength = 2.5;
  double base_spread = 0.6;
};

struct SyntheticCity {
  SyntheticConfig config;
  std::uint64_t seed = 0;
  ingest::Dataset dataset;
  ingest::CensusTables census;
  ingest::DimensionCodebook codebook;
  ingest::CentroidTable centroids;
  /// Planted dynamics: logits and expected scenes per area-year, user
  /// groups, group shares, drift matrix.
  nlohmann::ordered_json truth;
};

SyntheticCity generate_synthetic_city(const SyntheticConfig& config, std::uint64_t seed);

/// Writes venues.jsonl, reviews.jsonl, users.jsonl, census.csv, codebook.csv,
/// centroids.csv and truth.json into `dir`.
void write_synthetic_city(const SyntheticCity& city, const std::filesystem::path& dir);

}  // namespace scenecast::synthetic
