#include "hyconex/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "hyconex/error.hpp"

namespace hcx {

namespace {

std::vector<std::vector<std::size_t>> by_class(const std::vector<int>& labels, int num_classes) {
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) out.at(static_cast<std::size_t>(labels[i])).push_back(i);
  return out;
}

}  // namespace

SplitIndices stratified_split(const std::vector<int>& labels, int num_classes, double test_fraction,
                              std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw DataError("split fraction must lie in (0, 1)");
  std::mt19937_64 gen(seed);
  SplitIndices out;
  auto groups = by_class(labels, num_classes);
  for (std::size_t k = 0; k < groups.size(); ++k) {
    auto& idx = groups[k];
    if (idx.empty()) continue;
    if (idx.size() < 2) throw DataError("class " + std::to_string(k) + " has fewer than 2 samples; cannot split");
    std::shuffle(idx.begin(), idx.end(), gen);
    auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(idx.size())));
    n_test = std::clamp<std::size_t>(n_test, 1, idx.size() - 1);
    out.test.insert(out.test.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    out.train.insert(out.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

std::pair<RawDataset, RawDataset> split_train_test(const RawDataset& data, double test_fraction, std::uint64_t seed) {
  const auto s = stratified_split(data.labels, data.schema.num_classes(), test_fraction, seed);
  return {data.subset(s.train), data.subset(s.test)};
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& data, double test_fraction, std::uint64_t seed) {
  const auto s = stratified_split(data.y, data.schema.num_classes(), test_fraction, seed);
  return {data.subset(s.train), data.subset(s.test)};
}

std::vector<std::size_t> balanced_indices(const std::vector<int>& labels, int num_classes, std::uint64_t seed) {
  auto groups = by_class(labels, num_classes);
  std::size_t minority = labels.size();
  for (const auto& g : groups) {
    if (g.empty()) throw DataError("cannot balance: a class has no samples");
    minority = std::min(minority, g.size());
  }
  std::mt19937_64 gen(seed);
  std::vector<std::size_t> keep;
  for (auto& g : groups) {
    if (g.size() > minority) {
      std::shuffle(g.begin(), g.end(), gen);
      g.resize(minority);
    }
    keep.insert(keep.end(), g.begin(), g.end());
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

RawDataset downsample_balance(const RawDataset& data, std::uint64_t seed) {
  return data.subset(balanced_indices(data.labels, data.schema.num_classes(), seed));
}

Dataset downsample_balance(const Dataset& data, std::uint64_t seed) {
  return data.subset(balanced_indices(data.y, data.schema.num_classes(), seed));
}

}  // namespace hcx
