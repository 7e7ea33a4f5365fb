#include "scenecast/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "scenecast/error.hpp"

namespace scenecast::metrics {

namespace {

void check_shapes(const Matrix& pred, const Matrix& truth) {
  if (!pred.same_shape(truth)) {
    throw Error("shape mismatch: prediction " + std::to_string(pred.rows()) + "x" +
                std::to_string(pred.cols()) + " vs truth " + std::to_string(truth.rows()) + "x" +
                std::to_string(truth.cols()));
  }
  if (pred.size() == 0) throw Error("rmse of an empty matrix");
}

}  // namespace

double rmse(const Matrix& pred, const Matrix& truth) {
  check_shapes(pred, truth);
  double sq = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.data()[i] - truth.data()[i];
    sq += d * d;
  }
  return std::sqrt(sq / static_cast<double>(pred.size()));
}

std::vector<double> row_rmse(const Matrix& pred, const Matrix& truth) {
  check_shapes(pred, truth);
  std::vector<double> out(pred.rows());
  for (std::size_t r = 0; r < pred.rows(); ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < pred.cols(); ++c) {
      const double d = pred(r, c) - truth(r, c);
      sq += d * d;
    }
    out[r] = std::sqrt(sq / static_cast<double>(pred.cols()));
  }
  return out;
}

Interval ci95(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 2) throw Error("ci95 needs at least two samples, got " + std::to_string(n));
  Interval out;
  out.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double x : samples) ss += (x - out.mean) * (x - out.mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  boost::math::students_t dist(static_cast<double>(n - 1));
  const double t = boost::math::quantile(dist, 0.975);
  out.half_width = t * sd / std::sqrt(static_cast<double>(n));
  return out;
}

const char* region_name(Region r) { return r == Region::West ? "west" : "east"; }

std::map<std::string, Region> east_west_split(std::span<const std::string> fsas,
                                              const ingest::CentroidTable& centroids) {
  if (fsas.empty()) return {};
  std::vector<double> lons;
  lons.reserve(fsas.size());
  for (const auto& f : fsas) {
    auto c = centroids.find(f);
    if (!c) throw DataError("no centroid for FSA " + f);
    lons.push_back(c->lon);
  }
  std::vector<double> sorted = lons;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  std::map<std::string, Region> out;
  for (std::size_t i = 0; i < fsas.size(); ++i) {
    out[fsas[i]] = lons[i] < median ? Region::West : Region::East;
  }
  return out;
}

}  // namespace scenecast::metrics
