#pragma once

#include <cstdint>

#include <json.hpp>

#include "hyconex/dataset.hpp"

namespace hcx {

enum class Scaling {
  Standard,  // (v - mean) / std, population std
  MinMax,    // (v - min) / (max - min)
};

NLOHMANN_JSON_SERIALIZE_ENUM(Scaling, {{Scaling::Standard, "standard"}, {Scaling::MinMax, "minmax"}})

/// Scales numeric columns with train-split statistics and one-hot encodes
/// categorical columns. Either scaling is stored as a per-coordinate
/// offset and divisor, so transform() is the same affine map.
class Preprocessor {
 public:
  Preprocessor() = default;

  /// Fits on a training split. Throws DataError for constant numeric columns.
  static Preprocessor fit(const RawDataset& train, double noise_sigma = 0.05, Scaling scaling = Scaling::Standard);

  [[nodiscard]] RowVector transform(const RawRow& row) const;
  [[nodiscard]] Matrix transform(const std::vector<RawRow>& rows) const;
  [[nodiscard]] Dataset encode(const RawDataset& data) const;

  /// Numeric columns de-standardised; categorical blocks decoded by argmax.
  [[nodiscard]] RawRow inverse_transform(const RowVector& encoded) const;

  /// Adds N(0, sigma^2) to the one-hot coordinates only, keyed by `seed`.
  void add_dequantization_noise(Matrix& encoded, std::uint64_t seed) const;

  [[nodiscard]] const Schema& schema() const { return schema_; }
  [[nodiscard]] const GroupIndex& groups() const { return groups_; }
  [[nodiscard]] const RowVector& means() const { return mean_; }
  [[nodiscard]] const RowVector& stds() const { return std_; }
  [[nodiscard]] double noise_sigma() const { return noise_sigma_; }

  /// Statistics are stored per encoded coordinate (zero mean, unit std on one-hot coordinates).
  static Preprocessor from_parts(Schema schema, RowVector mean, RowVector std, double noise_sigma);

 private:
  Schema schema_;
  GroupIndex groups_;
  RowVector mean_;
  RowVector std_;
  double noise_sigma_ = 0.05;
};

}  // namespace hcx
