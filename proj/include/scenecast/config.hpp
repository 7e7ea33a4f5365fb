#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "scenecast/synthetic.hpp"

namespace scenecast {

/// Everything a pipeline run depends on. Text form is `key = value` lines;
/// '#' starts a comment.
struct RunConfig {
  // Inputs. Unset file paths default to the standard names inside data_dir.
  std::filesystem::path data_dir;
  std::filesystem::path venues;
  std::filesystem::path reviews;
  std::filesystem::path users;
  std::filesystem::path census;
  std::filesystem::path codebook;
  std::filesystem::path centroids;
  std::filesystem::path out = "out";

  std::string city = "city";
  /// Keep only venues whose `city` field equals `city` (for multi-city dumps).
  bool city_filter = false;
  std::uint64_t seed = 0;
  int first_year = 2011;
  int last_year = 2018;
  int min_venues = 30;

  std::vector<int> test_years = {2016, 2017, 2018};
  int reps = 25;
  std::vector<std::string> scenarios;  // empty: all eight
  std::vector<std::string> models = {"gnn", "naive", "lasso", "forest", "boosted"};

  int epochs = 10000;
  double lr = 1e-3;
  double dropout = 0.1;
  int hidden = 64;
  int blocks = 5;
  int cv_folds = 5;

  int topics_min = 1;
  int topics_max = 30;
  int k_min = 2;
  int k_max = 15;
  int lda_iterations = 1000;

  synthetic::SyntheticConfig synth;

  /// Sets one key from its text value; throws Error on unknown keys or bad
  /// values. Relative paths resolve against `base_dir`.
  void set(std::string_view key, std::string_view value,
           const std::filesystem::path& base_dir = {});

  /// Applies a config file on top of the current values.
  void load_file(const std::filesystem::path& path);

  std::filesystem::path input_path(std::string_view which) const;
  std::vector<std::string> scenario_names() const;

  /// Canonical text of the settings that affect results (paths excluded).
  std::string canonical_text() const;
  /// Full text form, including paths, loadable by load_file.
  std::string to_text() const;

  void validate() const;
};

/// Hex digest of the canonical settings plus the bytes of every input file.
std::string config_hash(const RunConfig& config);

}  // namespace scenecast
