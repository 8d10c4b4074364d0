#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "hyconex/dataset.hpp"

namespace hcx {

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Stratified split: each class contributes round(n_c * fraction) rows to the
/// test side, clamped to [1, n_c - 1]. Indices are returned in ascending order.
SplitIndices stratified_split(const std::vector<int>& labels, int num_classes, double test_fraction,
                              std::uint64_t seed);

std::pair<RawDataset, RawDataset> split_train_test(const RawDataset& data, double test_fraction, std::uint64_t seed);
std::pair<Dataset, Dataset> split_train_test(const Dataset& data, double test_fraction, std::uint64_t seed);

/// Subsamples every class without replacement to the minority-class count.
std::vector<std::size_t> balanced_indices(const std::vector<int>& labels, int num_classes, std::uint64_t seed);
RawDataset downsample_balance(const RawDataset& data, std::uint64_t seed);
Dataset downsample_balance(const Dataset& data, std::uint64_t seed);

}  // namespace hcx
