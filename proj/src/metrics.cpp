#include "hyconex/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "hyconex/error.hpp"

namespace hcx {

CoverageValidity coverage_validity(const CounterfactualBatch& batch) {
  const std::size_t requested = batch.size();
  if (requested == 0) throw Error("coverage/validity: no counterfactuals were requested");
  if (batch.valid.size() != requested) throw Error("coverage/validity: batch was generated without verification");
  std::size_t produced = 0, valid = 0;
  for (std::size_t e = 0; e < requested; ++e) {
    if (!batch.cf.row(static_cast<Eigen::Index>(e)).allFinite()) continue;
    ++produced;
    valid += batch.valid[e] != 0 ? 1 : 0;
  }
  return {static_cast<double>(produced) / static_cast<double>(requested),
          produced == 0 ? 0.0 : static_cast<double>(valid) / static_cast<double>(produced)};
}

Proximity proximity(const RowVector& x, const RowVector& x_cf, const GroupIndex& groups) {
  Proximity p;
  double sq = 0.0;
  int categorical = 0, changed = 0;
  for (const auto& g : groups) {
    const auto a = x.segment(g.offset, g.width);
    const auto b = x_cf.segment(g.offset, g.width);
    if (g.kind == ColumnKind::Numeric) {
      p.l1 += (a - b).cwiseAbs().sum();
      sq += (a - b).squaredNorm();
    } else {
      ++categorical;
      changed += (a.array() != b.array()).any() ? 1 : 0;
    }
  }
  p.l2 = std::sqrt(sq);
  p.hamming = categorical == 0 ? 0.0 : static_cast<double>(changed) / categorical;
  return p;
}

Plausibility plausibility(const Vector& log_density, double threshold) {
  Plausibility p;
  if (log_density.size() == 0) return p;
  p.p_plaus = (log_density.array() > threshold).cast<double>().mean();
  p.log_dens = log_density.mean();
  return p;
}

// --- LOF -------------------------------------------------------------------

namespace {

// Indices of the k nearest reference rows to `q`, nearest first, ties to the lower index.
// `skip` excludes one reference row (the query itself during fitting).
std::vector<std::pair<double, Eigen::Index>> nearest(const Matrix& ref, const RowVector& q, int k, Eigen::Index skip) {
  std::vector<std::pair<double, Eigen::Index>> d;
  d.reserve(static_cast<std::size_t>(ref.rows()));
  for (Eigen::Index i = 0; i < ref.rows(); ++i) {
    if (i == skip) continue;
    d.emplace_back((ref.row(i) - q).norm(), i);
  }
  const auto kk = static_cast<std::ptrdiff_t>(k);
  std::partial_sort(d.begin(), d.begin() + kk, d.end());
  d.resize(static_cast<std::size_t>(k));
  return d;
}

double lrd_from(const std::vector<std::pair<double, Eigen::Index>>& nn, const Vector& k_distance) {
  double reach = 0.0;
  for (const auto& [dist, o] : nn) reach += std::max(k_distance(o), dist);
  reach /= static_cast<double>(nn.size());
  return reach > 0.0 ? 1.0 / reach : std::numeric_limits<double>::infinity();
}

double lof_ratio(const std::vector<std::pair<double, Eigen::Index>>& nn, const Vector& lrd, double own) {
  double s = 0.0;
  for (const auto& [dist, o] : nn) {
    (void)dist;
    s += lrd(o);
  }
  s /= static_cast<double>(nn.size());
  if (std::isinf(own)) return std::isinf(s) ? 1.0 : 0.0;
  return s / own;
}

}  // namespace

LofIndex::LofIndex(Matrix reference, int k) : reference_(std::move(reference)), k_(k) {
  if (k_ < 1 || k_ >= reference_.rows()) {
    throw Error("LOF needs 1 <= k < reference size (k = " + std::to_string(k_) + ", reference size " +
                std::to_string(reference_.rows()) + ")");
  }
  const Eigen::Index n = reference_.rows();
  std::vector<std::vector<std::pair<double, Eigen::Index>>> nn(static_cast<std::size_t>(n));
  k_distance_.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    nn[static_cast<std::size_t>(i)] = nearest(reference_, reference_.row(i), k_, i);
    k_distance_(i) = nn[static_cast<std::size_t>(i)].back().first;
  }
  lrd_.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) lrd_(i) = lrd_from(nn[static_cast<std::size_t>(i)], k_distance_);
}

Vector LofIndex::score(const Matrix& points) const {
  Vector out(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const auto nn = nearest(reference_, points.row(i), k_, -1);
    out(i) = lof_ratio(nn, lrd_, lrd_from(nn, k_distance_));
  }
  return out;
}

double LofIndex::mean_score(const Matrix& points) const {
  return points.rows() == 0 ? 0.0 : score(points).mean();
}

// --- Isolation forest ------------------------------------------------------

double isolation_c(double n) {
  if (n <= 1.0) return 0.0;
  if (n <= 2.0) return 1.0;
  constexpr double kEulerGamma = 0.5772156649;
  return 2.0 * (std::log(n - 1.0) + kEulerGamma) - 2.0 * (n - 1.0) / n;
}

IsoForest::IsoForest(const Matrix& train, std::uint64_t seed, int trees, int max_samples) {
  if (train.rows() < 1) throw Error("isolation forest needs at least one training row");
  psi_ = static_cast<int>(std::min<Eigen::Index>(max_samples, train.rows()));
  height_limit_ = static_cast<int>(std::ceil(std::log2(std::max(2, psi_))));
  std::mt19937_64 gen(seed);
  std::vector<Eigen::Index> all(static_cast<std::size_t>(train.rows()));
  for (int t = 0; t < trees; ++t) {
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    for (int i = 0; i < psi_; ++i) {
      std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), all.size() - 1);
      std::swap(all[static_cast<std::size_t>(i)], all[pick(gen)]);
    }
    std::vector<Eigen::Index> idx(all.begin(), all.begin() + psi_);
    Tree tree;
    grow(tree, train, idx, 0, idx.size(), 0, gen);
    trees_.push_back(std::move(tree));
  }
}

int IsoForest::grow(Tree& tree, const Matrix& data, std::vector<Eigen::Index>& idx, std::size_t begin,
                    std::size_t end, int depth, std::mt19937_64& gen) {
  const int id = static_cast<int>(tree.size());
  tree.push_back(Node{});
  tree[static_cast<std::size_t>(id)].size = static_cast<int>(end - begin);
  if (depth >= height_limit_ || end - begin <= 1) return id;
  std::vector<int> candidates;
  std::vector<std::pair<double, double>> ranges;
  for (Eigen::Index f = 0; f < data.cols(); ++f) {
    double lo = data(idx[begin], f), hi = lo;
    for (std::size_t i = begin + 1; i < end; ++i) {
      lo = std::min(lo, data(idx[i], f));
      hi = std::max(hi, data(idx[i], f));
    }
    if (hi > lo) {
      candidates.push_back(static_cast<int>(f));
      ranges.emplace_back(lo, hi);
    }
  }
  if (candidates.empty()) return id;
  std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
  const std::size_t c = pick(gen);
  const int f = candidates[c];
  std::uniform_real_distribution<double> u(ranges[c].first, ranges[c].second);
  const double split = u(gen);
  const auto mid = std::partition(idx.begin() + static_cast<std::ptrdiff_t>(begin),
                                  idx.begin() + static_cast<std::ptrdiff_t>(end),
                                  [&](Eigen::Index r) { return data(r, f) <= split; });
  const auto m = static_cast<std::size_t>(mid - idx.begin());
  const int left = grow(tree, data, idx, begin, m, depth + 1, gen);
  const int right = grow(tree, data, idx, m, end, depth + 1, gen);
  Node& node = tree[static_cast<std::size_t>(id)];
  node.feature = f;
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

double IsoForest::path_length(const Tree& tree, const RowVector& x) const {
  int node = 0, depth = 0;
  while (tree[static_cast<std::size_t>(node)].feature >= 0) {
    const Node& n = tree[static_cast<std::size_t>(node)];
    node = x(n.feature) <= n.split ? n.left : n.right;
    ++depth;
  }
  return depth + isolation_c(tree[static_cast<std::size_t>(node)].size);
}

Vector IsoForest::path_lengths(const Matrix& points) const {
  Vector out = Vector::Zero(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (const auto& t : trees_) out(i) += path_length(t, points.row(i));
    out(i) /= static_cast<double>(trees_.size());
  }
  return out;
}

Vector IsoForest::score(const Matrix& points) const {
  const double c = isolation_c(psi_);
  const Vector h = path_lengths(points);
  Vector out(h.size());
  for (Eigen::Index i = 0; i < h.size(); ++i) out(i) = 0.5 - std::exp2(-h(i) / c);
  return out;
}

double IsoForest::mean_score(const Matrix& points) const {
  return points.rows() == 0 ? 0.0 : score(points).mean();
}

// --- AUROC -----------------------------------------------------------------

double auroc(const Vector& scores, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(scores.size()) != labels.size()) throw ShapeError("auroc: one label per score");
  const std::size_t n = labels.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores(static_cast<Eigen::Index>(a)) < scores(static_cast<Eigen::Index>(b));
  });
  // average ranks over tied groups
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores(static_cast<Eigen::Index>(order[j + 1])) == scores(static_cast<Eigen::Index>(order[i]))) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) {
      if (labels[order[t]] == 1) {
        positive_rank_sum += rank;
        ++positives;
      }
    }
    i = j + 1;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) throw Error("auroc is undefined when only one class is present");
  const auto p = static_cast<double>(positives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(negatives));
}

double auroc(const Matrix& probabilities, const std::vector<int>& labels) {
  const Eigen::Index k = probabilities.cols();
  if (k < 2) throw ShapeError("auroc: need at least two probability columns");
  if (k == 2) {
    return auroc(Vector(probabilities.col(1)), labels);
  }
  double total = 0.0;
  for (Eigen::Index c = 0; c < k; ++c) {
    std::vector<int> binary(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) binary[i] = labels[i] == c ? 1 : 0;
    total += auroc(Vector(probabilities.col(c)), binary);
  }
  return total / static_cast<double>(k);
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels) {
  if (predicted.size() != labels.size()) throw ShapeError("accuracy: length mismatch");
  if (labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

// --- reports ---------------------------------------------------------------

CFReport cf_report(const CounterfactualBatch& batch, const GroupIndex& groups, double density_threshold,
                   const LofIndex* lof, const IsoForest* iso, double time_seconds) {
  CFReport r;
  const auto cv = coverage_validity(batch);
  r.coverage = cv.coverage;
  r.validity = cv.validity;
  r.count = batch.size();
  r.time_seconds = time_seconds;
  for (const auto& g : groups) r.categorical = r.categorical || g.kind == ColumnKind::Categorical;
  std::size_t valid = 0;
  for (std::size_t e = 0; e < batch.size(); ++e) {
    const auto ee = static_cast<Eigen::Index>(e);
    const Proximity p = proximity(batch.x.row(batch.source[e]), batch.cf.row(ee), groups);
    r.l1 += p.l1;
    r.l2 += p.l2;
    r.hamming += p.hamming;
    if (batch.valid[e] != 0) {
      ++valid;
      r.l1_valid += p.l1;
      r.l2_valid += p.l2;
    }
    r.validity_unprojected += batch.valid_unprojected[e] != 0 ? 1.0 : 0.0;
  }
  const auto n = static_cast<double>(batch.size());
  r.l1 /= n;
  r.l2 /= n;
  r.hamming /= n;
  r.validity_unprojected /= n;
  if (valid > 0) {
    r.l1_valid /= static_cast<double>(valid);
    r.l2_valid /= static_cast<double>(valid);
  }
  if (batch.log_density.size() > 0) {
    const auto pl = plausibility(batch.log_density, density_threshold);
    r.p_plaus = pl.p_plaus;
    r.log_dens = pl.log_dens;
  }
  if (lof != nullptr) r.lof = lof->mean_score(batch.cf);
  if (iso != nullptr) r.isoforest = iso->mean_score(batch.cf);
  return r;
}

ClassifReport classif_report(const Matrix& probabilities, const std::vector<int>& labels, int num_classes) {
  ClassifReport r;
  std::vector<int> predicted(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    predicted[i] = static_cast<int>(argmax(probabilities.row(static_cast<Eigen::Index>(i))));
  }
  r.accuracy = accuracy(predicted, labels);
  r.auroc = auroc(probabilities, labels);
  r.class_counts = class_counts(labels, num_classes);
  return r;
}

nlohmann::json to_json(const CFReport& r) {
  nlohmann::json j{{"coverage", r.coverage},       {"validity", r.validity},
                   {"validity_unprojected", r.validity_unprojected},
                   {"l1", r.l1},                   {"l2", r.l2},
                   {"l1_valid", r.l1_valid},       {"l2_valid", r.l2_valid},
                   {"p_plaus", r.p_plaus},         {"log_dens", r.log_dens},
                   {"lof", r.lof},                 {"isoforest", r.isoforest},
                   {"time_seconds", r.time_seconds}, {"count", r.count}};
  if (r.categorical) j["hamming"] = r.hamming;
  return j;
}

nlohmann::json to_json(const ClassifReport& r) {
  return {{"auroc", r.auroc}, {"accuracy", r.accuracy}, {"class_counts", r.class_counts}};
}

namespace {

std::string cell(double v, int precision) {
  char buf[48];
  if (!std::isfinite(v) || std::abs(v) >= 1e6)
    std::snprintf(buf, sizeof buf, "%.3g", v);
  else
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

}  // namespace

std::string format_cf_table(const std::vector<std::pair<std::string, CFReport>>& rows) {
  bool ham = false;
  std::size_t name_width = 6;
  for (const auto& [name, r] : rows) {
    ham = ham || r.categorical;
    name_width = std::max(name_width, name.size());
  }
  std::vector<std::string> header{"Cover.", "Valid.", "L1", "L2"};
  if (ham) header.emplace_back("Ham.");
  for (const char* h : {"P.Plaus.", "LogDens", "LOF", "IsoForest", "Time(s)"}) header.emplace_back(h);
  std::ostringstream os;
  auto pad = [&os](const std::string& s, std::size_t w) { os << s << std::string(w > s.size() ? w - s.size() : 1, ' '); };
  pad("Method", name_width + 2);
  for (const auto& h : header) pad(h, 11);
  os << '\n';
  for (const auto& [name, r] : rows) {
    pad(name, name_width + 2);
    pad(cell(r.coverage, 2), 11);
    pad(cell(r.validity, 3), 11);
    pad(cell(r.l1, 3), 11);
    pad(cell(r.l2, 3), 11);
    if (ham) pad(cell(r.hamming, 3), 11);
    pad(cell(r.p_plaus, 3), 11);
    pad(cell(r.log_dens, 2), 11);
    pad(cell(r.lof, 2), 11);
    pad(cell(r.isoforest, 3), 11);
    pad(cell(r.time_seconds, 3), 11);
    os << '\n';
  }
  return os.str();
}

std::string format_classif(const ClassifReport& r) {
  std::ostringstream os;
  os << "AUROC " << cell(r.auroc, 4) << "  accuracy " << cell(r.accuracy, 4) << "  counts";
  for (auto c : r.class_counts) os << ' ' << c;
  os << '\n';
  return os.str();
}

}  // namespace hcx
