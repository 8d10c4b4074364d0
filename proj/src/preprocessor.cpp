#include "hyconex/preprocessor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "hyconex/error.hpp"
#include "hyconex/rng.hpp"

namespace hcx {

Preprocessor Preprocessor::fit(const RawDataset& train, double noise_sigma, Scaling scaling) {
  if (train.rows.empty()) throw DataError("cannot fit a preprocessor on an empty split");
  const Schema& schema = train.schema;
  const GroupIndex groups = schema.groups();
  RowVector mean = RowVector::Zero(schema.encoded_dim());
  RowVector stdev = RowVector::Ones(schema.encoded_dim());
  const auto n = static_cast<double>(train.rows.size());
  for (const auto& g : groups) {
    if (g.kind != ColumnKind::Numeric) continue;
    double s = 0.0;
    for (const auto& row : train.rows) s += std::get<double>(row[static_cast<std::size_t>(g.column)]);
    double mu = s / n;
    double ss = 0.0;
    for (const auto& row : train.rows) {
      const double d = std::get<double>(row[static_cast<std::size_t>(g.column)]) - mu;
      ss += d * d;
    }
    double sd = std::sqrt(ss / n);
    if (scaling == Scaling::MinMax) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (const auto& row : train.rows) {
        const double v = std::get<double>(row[static_cast<std::size_t>(g.column)]);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      mu = lo;
      sd = hi - lo;
    }
    if (!(sd > 0.0)) {
      throw DataError("numeric column '" + schema.columns[static_cast<std::size_t>(g.column)].name + "' is constant");
    }
    mean(g.offset) = mu;
    stdev(g.offset) = sd;
  }
  return from_parts(schema, std::move(mean), std::move(stdev), noise_sigma);
}

Preprocessor Preprocessor::from_parts(Schema schema, RowVector mean, RowVector std, double noise_sigma) {
  Preprocessor p;
  p.groups_ = schema.groups();
  if (mean.size() != schema.encoded_dim() || std.size() != schema.encoded_dim()) {
    throw DataError("preprocessor statistics do not match the schema");
  }
  p.schema_ = std::move(schema);
  p.mean_ = std::move(mean);
  p.std_ = std::move(std);
  p.noise_sigma_ = noise_sigma;
  return p;
}

RowVector Preprocessor::transform(const RawRow& row) const {
  if (row.size() != schema_.columns.size()) throw DataError("row does not match the schema column count");
  RowVector out = RowVector::Zero(schema_.encoded_dim());
  for (const auto& g : groups_) {
    const Column& col = schema_.columns[static_cast<std::size_t>(g.column)];
    const RawValue& v = row[static_cast<std::size_t>(g.column)];
    if (g.kind == ColumnKind::Numeric) {
      const double* d = std::get_if<double>(&v);
      if (d == nullptr) throw DataError("column '" + col.name + "' expects a number");
      out(g.offset) = (*d - mean_(g.offset)) / std_(g.offset);
    } else {
      const std::string* s = std::get_if<std::string>(&v);
      if (s == nullptr) throw DataError("column '" + col.name + "' expects a category");
      int hit = -1;
      for (std::size_t c = 0; c < col.categories.size(); ++c) {
        if (col.categories[c] == *s) hit = static_cast<int>(c);
      }
      if (hit < 0) throw DataError("unseen category '" + *s + "' in column '" + col.name + "'");
      out(g.offset + hit) = 1.0;
    }
  }
  return out;
}

Matrix Preprocessor::transform(const std::vector<RawRow>& rows) const {
  Matrix out(static_cast<Eigen::Index>(rows.size()), schema_.encoded_dim());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = transform(rows[r]);
  return out;
}

Dataset Preprocessor::encode(const RawDataset& data) const {
  Dataset out;
  out.schema = schema_;
  out.groups = groups_;
  out.x = transform(data.rows);
  out.y = data.labels;
  return out;
}

RawRow Preprocessor::inverse_transform(const RowVector& encoded) const {
  if (encoded.size() != schema_.encoded_dim()) throw DataError("encoded row has the wrong dimension");
  RawRow row(schema_.columns.size());
  for (const auto& g : groups_) {
    if (g.kind == ColumnKind::Numeric) {
      row[static_cast<std::size_t>(g.column)] = encoded(g.offset) * std_(g.offset) + mean_(g.offset);
    } else {
      const Eigen::Index best = argmax(encoded.segment(g.offset, g.width));
      row[static_cast<std::size_t>(g.column)] =
          schema_.columns[static_cast<std::size_t>(g.column)].categories[static_cast<std::size_t>(best)];
    }
  }
  return row;
}

void Preprocessor::add_dequantization_noise(Matrix& encoded, std::uint64_t seed) const {
  if (noise_sigma_ <= 0.0) return;
  std::mt19937_64 gen(mix64(seed));
  std::normal_distribution<double> noise(0.0, noise_sigma_);
  for (const auto& g : groups_) {
    if (g.kind != ColumnKind::Categorical) continue;
    for (Eigen::Index r = 0; r < encoded.rows(); ++r) {
      for (int c = 0; c < g.width; ++c) encoded(r, g.offset + c) += noise(gen);
    }
  }
}

}  // namespace hcx
