#pragma once

// Independent reference implementations used as test oracles. They follow the
// textbook definitions with plain loops and share no code with the library.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "hyconex/flow.hpp"
#include "hyconex/hypernet.hpp"
#include "hyconex/params.hpp"
#include "hyconex/tensor.hpp"

namespace oracle {

using hcx::Matrix;

inline double dist(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) s += (a(i, c) - b(j, c)) * (a(i, c) - b(j, c));
  return std::sqrt(s);
}

// k nearest reference rows of `q` (row i of `from`), nearest first, lower index on ties.
// `skip` excludes one reference row (the point itself when it belongs to the reference).
inline std::vector<Eigen::Index> knn(const Matrix& ref, const Matrix& from, Eigen::Index i, int k,
                                     Eigen::Index skip) {
  std::vector<std::pair<double, Eigen::Index>> d;
  for (Eigen::Index j = 0; j < ref.rows(); ++j) {
    if (j != skip) d.emplace_back(dist(from, i, ref, j), j);
  }
  std::sort(d.begin(), d.end());
  std::vector<Eigen::Index> out;
  for (int t = 0; t < k; ++t) out.push_back(d[static_cast<std::size_t>(t)].second);
  return out;
}

// LOF of each query point against `ref`, straight from the definition.
inline std::vector<double> lof(const Matrix& ref, int k, const Matrix& queries) {
  const Eigen::Index n = ref.rows();
  std::vector<double> kdist(static_cast<std::size_t>(n));
  std::vector<std::vector<Eigen::Index>> nbrs(static_cast<std::size_t>(n));
  for (Eigen::Index o = 0; o < n; ++o) {
    nbrs[static_cast<std::size_t>(o)] = knn(ref, ref, o, k, o);
    kdist[static_cast<std::size_t>(o)] = dist(ref, o, ref, nbrs[static_cast<std::size_t>(o)].back());
  }
  auto lrd_ref = [&](Eigen::Index o) {
    double reach = 0.0;
    for (Eigen::Index p : nbrs[static_cast<std::size_t>(o)]) {
      reach += std::max(kdist[static_cast<std::size_t>(p)], dist(ref, o, ref, p));
    }
    return static_cast<double>(k) / reach;
  };
  std::vector<double> out;
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    const auto nq = knn(ref, queries, q, k, -1);
    double reach = 0.0, sum_lrd = 0.0;
    for (Eigen::Index p : nq) {
      reach += std::max(kdist[static_cast<std::size_t>(p)], dist(queries, q, ref, p));
      sum_lrd += lrd_ref(p);
    }
    const double lrd_q = static_cast<double>(k) / reach;
    out.push_back(sum_lrd / static_cast<double>(k) / lrd_q);
  }
  return out;
}

// Probability that a random positive outranks a random negative, ties counted half.
inline double auroc_pairs(const std::vector<double>& s, const std::vector<int>& positive) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!positive[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (positive[j]) continue;
      wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      pairs += 1.0;
    }
  }
  return wins / pairs;
}

inline double auroc_macro(const Matrix& p, const std::vector<int>& y) {
  double total = 0.0;
  for (Eigen::Index c = 0; c < p.cols(); ++c) {
    std::vector<double> s;
    std::vector<int> pos;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      s.push_back(p(i, c));
      pos.push_back(y[static_cast<std::size_t>(i)] == c ? 1 : 0);
    }
    total += auroc_pairs(s, pos);
  }
  return total / static_cast<double>(p.cols());
}

inline std::vector<double> softmax(const std::vector<double>& z) {
  std::vector<double> e;
  for (double v : z) e.push_back(std::exp(v));
  const double s = std::accumulate(e.begin(), e.end(), 0.0);
  for (double& v : e) v /= s;
  return e;
}

}  // namespace oracle

namespace fixture {

using hcx::Matrix;

inline Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n(0.0, sd);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(gen);
  return m;
}

// Overwrites every parameter with N(0, sd^2) noise so no layer stays at its
// (possibly zero) initial value.
inline void randomize(hcx::ParamSet& params, std::uint64_t seed, double sd) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i] = gaussian(params[i].rows(), params[i].cols(), seed * 1000 + i, sd);
  }
}

inline hcx::MafFlow random_flow(int dim, int classes, std::uint64_t seed, int layers = 8, int hidden = 16,
                                int blocks = 4, double sd = 0.3) {
  hcx::MafFlow flow(hcx::FlowConfig{dim, classes, hidden, layers, blocks}, seed);
  randomize(flow.params(), seed, sd);
  return flow;
}

inline hcx::HyperNet small_net(int dim, int classes, std::uint64_t seed, int hidden = 8, int blocks = 2) {
  hcx::HyperNetConfig c;
  c.input_dim = dim;
  c.num_classes = classes;
  c.hidden = hidden;
  c.blocks = blocks;
  return hcx::HyperNet(c, seed);
}

}  // namespace fixture
