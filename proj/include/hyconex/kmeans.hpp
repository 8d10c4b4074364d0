#pragma once

#include <cstdint>
#include <vector>

#include "hyconex/dataset.hpp"

namespace hcx {

struct KMeansOptions {
  int max_iterations = 300;
  double tolerance = 1e-6;  // stop once no centre moves further than this
};

struct KMeansResult {
  Matrix centers;                 // k x D
  std::vector<int> assignment;    // per input row
  std::vector<double> sse;        // within-cluster SSE after each Lloyd iteration
  int iterations = 0;
};

/// k-means++ seeding followed by Lloyd iterations. An empty cluster is
/// re-seeded at the point farthest from its current centre.
KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed, const KMeansOptions& options = {});

/// Per-class cluster centres in encoded space.
struct ClusterIndex {
  std::vector<Matrix> centers;  // one (k_c x D) block per class

  [[nodiscard]] int num_classes() const { return static_cast<int>(centers.size()); }
  /// Euclidean-nearest centre of class `m`; ties resolve to the lower ordinal.
  [[nodiscard]] RowVector nearest(const RowVector& x, int m) const;
  [[nodiscard]] Eigen::Index nearest_index(const RowVector& x, int m) const;
};

/// Clusters every class separately; k is clamped to the class size.
ClusterIndex kmeans_per_class(const Dataset& train, int k_per_class, std::uint64_t seed,
                              const KMeansOptions& options = {});

}  // namespace hcx
