#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "scenecast/ingest.hpp"
#include "scenecast/matrix.hpp"

namespace scenecast::metrics {

/// Root mean squared difference over every cell.
double rmse(const Matrix& pred, const Matrix& truth);

/// Mean RMSE of each row (one FSA across its 15 dimensions).
std::vector<double> row_rmse(const Matrix& pred, const Matrix& truth);

struct Interval {
  double mean = 0.0;
  double half_width = 0.0;
};

/// Student-t 95% interval: mean ± t(0.975, n-1) · s / √n. Needs n >= 2.
Interval ci95(std::span<const double> samples);

enum class Region { West, East };
const char* region_name(Region r);

/// West: lon < median lon; everything else (median included) is east.
std::map<std::string, Region> east_west_split(std::span<const std::string> fsas,
                                              const ingest::CentroidTable& centroids);

}  // namespace scenecast::metrics
