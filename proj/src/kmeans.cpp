#include "hyconex/kmeans.hpp"

#include <algorithm>
#include <limits>
#include <random>

#include "hyconex/error.hpp"
#include "hyconex/rng.hpp"

namespace hcx {

namespace {

double assign(const Matrix& points, const Matrix& centers, std::vector<int>& assignment) {
  double sse = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Eigen::Index c = 0; c < centers.rows(); ++c) {
      const double d = (points.row(i) - centers.row(c)).squaredNorm();
      if (d < best) {
        best = d;
        arg = static_cast<int>(c);
      }
    }
    assignment[static_cast<std::size_t>(i)] = arg;
    sse += best;
  }
  return sse;
}

Matrix plus_plus_init(const Matrix& points, int k, std::mt19937_64& gen) {
  const Eigen::Index n = points.rows();
  Matrix centers(k, points.cols());
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  centers.row(0) = points.row(first(gen));
  Vector d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2(i) = (points.row(i) - centers.row(0)).squaredNorm();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double r = unit(gen) * total;
      for (pick = 0; pick < n - 1; ++pick) {
        r -= d2(pick);
        if (r < 0.0) break;
      }
    } else {
      pick = first(gen);
    }
    centers.row(c) = points.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) d2(i) = std::min(d2(i), (points.row(i) - centers.row(c)).squaredNorm());
  }
  return centers;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed, const KMeansOptions& options) {
  if (k < 1) throw DataError("k-means needs k >= 1");
  if (points.rows() < k) throw DataError("k-means: fewer points than clusters");
  std::mt19937_64 gen(mix64(seed));
  KMeansResult result;
  result.centers = plus_plus_init(points, k, gen);
  result.assignment.assign(static_cast<std::size_t>(points.rows()), 0);
  assign(points, result.centers, result.assignment);
  for (int it = 0; it < options.max_iterations; ++it) {
    Matrix next = Matrix::Zero(k, points.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      const int c = result.assignment[static_cast<std::size_t>(i)];
      next.row(c) += points.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        next.row(c) /= counts[static_cast<std::size_t>(c)];
        continue;
      }
      // Empty cluster: move it onto the point worst served by its centre.
      Eigen::Index far = 0;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < points.rows(); ++i) {
        const double d = (points.row(i) - result.centers.row(result.assignment[static_cast<std::size_t>(i)])).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      next.row(c) = points.row(far);
    }
    const double shift = (next - result.centers).rowwise().norm().maxCoeff();
    result.centers = std::move(next);
    result.sse.push_back(assign(points, result.centers, result.assignment));
    result.iterations = it + 1;
    if (shift < options.tolerance) break;
  }
  return result;
}

Eigen::Index ClusterIndex::nearest_index(const RowVector& x, int m) const {
  const Matrix& c = centers.at(static_cast<std::size_t>(m));
  Eigen::Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    const double d = (c.row(i) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

RowVector ClusterIndex::nearest(const RowVector& x, int m) const {
  return centers.at(static_cast<std::size_t>(m)).row(nearest_index(x, m));
}

ClusterIndex kmeans_per_class(const Dataset& train, int k_per_class, std::uint64_t seed, const KMeansOptions& options) {
  ClusterIndex index;
  const int classes = train.schema.num_classes();
  for (int c = 0; c < classes; ++c) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < train.y.size(); ++i) {
      if (train.y[i] == c) rows.push_back(i);
    }
    if (rows.empty()) throw DataError("class " + std::to_string(c) + " has no training samples to cluster");
    Matrix pts(static_cast<Eigen::Index>(rows.size()), train.x.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) pts.row(static_cast<Eigen::Index>(r)) = train.x.row(static_cast<Eigen::Index>(rows[r]));
    const int k = std::min<int>(k_per_class, static_cast<int>(rows.size()));
    index.centers.push_back(kmeans(pts, k, hash_key(seed, static_cast<std::uint64_t>(c)), options).centers);
  }
  return index;
}

}  // namespace hcx
