#pragma once

#include <chrono>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hyconex/counterfact.hpp"
#include "hyconex/dataset.hpp"

namespace hcx {

struct CoverageValidity {
  double coverage = 0.0;
  double validity = 0.0;
};

/// coverage = produced / requested; validity = share of produced counterfactuals
/// whose prediction equals the target. A counterfactual counts as produced when finite.
/// Throws for an empty request set or an unverified batch.
CoverageValidity coverage_validity(const CounterfactualBatch& batch);

struct Proximity {
  double l1 = 0.0;
  double l2 = 0.0;
  double hamming = 0.0;  // fraction of categorical groups that changed
};

/// L1/L2 over numeric coordinates, Hamming over categorical groups.
Proximity proximity(const RowVector& x, const RowVector& x_cf, const GroupIndex& groups);

struct Plausibility {
  double p_plaus = 0.0;   // share with log density above the threshold
  double log_dens = 0.0;  // mean log density
};

Plausibility plausibility(const Vector& log_density, double threshold);

/// Local outlier factor in novelty mode: `reference` is the fitted set and
/// queries are scored against it. Neighbour ties resolve to the lower index.
class LofIndex {
 public:
  LofIndex() = default;
  LofIndex(Matrix reference, int k = 20);

  [[nodiscard]] int k() const { return k_; }
  [[nodiscard]] const Matrix& reference() const { return reference_; }
  [[nodiscard]] const Vector& k_distances() const { return k_distance_; }
  [[nodiscard]] const Vector& lrd() const { return lrd_; }

  [[nodiscard]] Vector score(const Matrix& points) const;
  [[nodiscard]] double mean_score(const Matrix& points) const;

 private:
  Matrix reference_;
  int k_ = 20;
  Vector k_distance_;
  Vector lrd_;
};

/// Average path length of an unsuccessful binary-search-tree lookup among n points.
double isolation_c(double n);

/// Isolation forest; score(x) = 0.5 - 2^(-E[h(x)] / c(psi)), positive for inliers.
class IsoForest {
 public:
  IsoForest() = default;
  IsoForest(const Matrix& train, std::uint64_t seed, int trees = 100, int max_samples = 256);

  [[nodiscard]] int subsample_size() const { return psi_; }
  [[nodiscard]] int height_limit() const { return height_limit_; }
  [[nodiscard]] Vector path_lengths(const Matrix& points) const;  // E[h(x)]
  [[nodiscard]] Vector score(const Matrix& points) const;
  [[nodiscard]] double mean_score(const Matrix& points) const;

 private:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double split = 0.0;
    int left = -1;
    int right = -1;
    int size = 0;
  };
  using Tree = std::vector<Node>;

  int grow(Tree& tree, const Matrix& data, std::vector<Eigen::Index>& idx, std::size_t begin, std::size_t end,
           int depth, std::mt19937_64& gen);
  [[nodiscard]] double path_length(const Tree& tree, const RowVector& x) const;

  std::vector<Tree> trees_;
  int psi_ = 0;
  int height_limit_ = 0;
};

/// Binary AUROC of `scores` for labels in {0, 1} (1 = positive); ties count 1/2.
double auroc(const Vector& scores, const std::vector<int>& labels);
/// Binary AUROC on column 1 for K = 2, macro one-vs-rest otherwise.
double auroc(const Matrix& probabilities, const std::vector<int>& labels);

double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels);

/// Wall seconds of `fn()` on a monotonic clock.
template <class Fn>
double timed(Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  std::forward<Fn>(fn)();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct CFReport {
  double coverage = 0.0;
  double validity = 0.0;
  double validity_unprojected = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
  double hamming = 0.0;
  double l1_valid = 0.0;  // means over valid counterfactuals only
  double l2_valid = 0.0;
  double p_plaus = 0.0;
  double log_dens = 0.0;
  double lof = 0.0;
  double isoforest = 0.0;
  double time_seconds = 0.0;
  std::size_t count = 0;
  bool categorical = false;
};

struct ClassifReport {
  double auroc = 0.0;
  double accuracy = 0.0;
  std::vector<std::size_t> class_counts;
};

/// Aggregates a verified batch. `lof` and `iso` may be null, leaving those columns at 0.
CFReport cf_report(const CounterfactualBatch& batch, const GroupIndex& groups, double density_threshold,
                   const LofIndex* lof, const IsoForest* iso, double time_seconds);
ClassifReport classif_report(const Matrix& probabilities, const std::vector<int>& labels, int num_classes);

nlohmann::json to_json(const CFReport& r);
nlohmann::json to_json(const ClassifReport& r);

/// Fixed-width table: Cover. Valid. L1 L2 [Ham.] P.Plaus. LogDens LOF IsoForest Time(s).
std::string format_cf_table(const std::vector<std::pair<std::string, CFReport>>& rows);
std::string format_classif(const ClassifReport& r);

}  // namespace hcx
