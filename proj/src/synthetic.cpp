#include "hyconex/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "hyconex/error.hpp"

namespace hcx {

namespace {

Schema numeric_schema(int dim, int classes) {
  Schema s;
  for (int d = 0; d < dim; ++d) s.columns.push_back({"x" + std::to_string(d + 1), ColumnKind::Numeric, {}});
  s.target = "label";
  for (int k = 0; k < classes; ++k) s.class_labels.push_back(std::to_string(k));
  return s;
}

void shuffle_rows(RawDataset& data, std::mt19937_64& gen) {
  std::vector<std::size_t> order(data.rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), gen);
  data = data.subset(order);
}

}  // namespace

RawDataset make_moons(std::size_t n, double noise, std::uint64_t seed) {
  if (n < 4) throw DataError("moons needs at least 4 samples");
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> jitter(0.0, 1.0);
  RawDataset data;
  data.schema = numeric_schema(2, 2);
  const std::size_t n_outer = n / 2;
  const std::size_t n_inner = n - n_outer;
  auto arc = [](std::size_t i, std::size_t count) {
    return count == 1 ? 0.0 : std::numbers::pi * static_cast<double>(i) / static_cast<double>(count - 1);
  };
  for (std::size_t i = 0; i < n_outer; ++i) {
    const double t = arc(i, n_outer);
    data.rows.push_back({std::cos(t), std::sin(t)});
    data.labels.push_back(0);
  }
  for (std::size_t i = 0; i < n_inner; ++i) {
    const double t = arc(i, n_inner);
    data.rows.push_back({1.0 - std::cos(t), 0.5 - std::sin(t)});
    data.labels.push_back(1);
  }
  shuffle_rows(data, gen);
  if (noise > 0.0) {
    for (auto& row : data.rows) {
      for (auto& v : row) std::get<double>(v) += noise * jitter(gen);
    }
  }
  return data;
}

RawDataset make_blobs(std::size_t n, int classes, std::uint64_t seed, int dim, double stddev) {
  if (classes < 2) throw DataError("blobs needs at least 2 classes");
  if (n < static_cast<std::size_t>(2 * classes)) throw DataError("blobs needs at least 2 samples per class");
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> box(-10.0, 10.0);
  std::normal_distribution<double> jitter(0.0, stddev);
  std::vector<Vector> centers;
  for (int attempt = 0; static_cast<int>(centers.size()) < classes; ++attempt) {
    if (attempt > 100000) throw DataError("could not place blob centres 6 apart");
    Vector c(dim);
    for (int d = 0; d < dim; ++d) c(d) = box(gen);
    const bool far = std::all_of(centers.begin(), centers.end(), [&](const Vector& o) { return (o - c).norm() >= 6.0; });
    if (far) centers.push_back(c);
  }
  RawDataset data;
  data.schema = numeric_schema(dim, classes);
  for (int k = 0; k < classes; ++k) {
    const std::size_t count = n / static_cast<std::size_t>(classes) + (static_cast<std::size_t>(k) < n % static_cast<std::size_t>(classes) ? 1 : 0);
    for (std::size_t i = 0; i < count; ++i) {
      RawRow row;
      for (int d = 0; d < dim; ++d) row.emplace_back(centers[static_cast<std::size_t>(k)](d) + jitter(gen));
      data.rows.push_back(std::move(row));
      data.labels.push_back(k);
    }
  }
  shuffle_rows(data, gen);
  return data;
}

}  // namespace hcx
