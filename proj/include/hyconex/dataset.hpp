#pragma once

#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "hyconex/tensor.hpp"

namespace hcx {

enum class ColumnKind { Numeric, Categorical };

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;
  std::vector<std::string> categories;  // categorical only, in encoding order

  friend bool operator==(const Column&, const Column&) = default;
};

/// Position of one source column inside the encoded feature vector.
struct FeatureGroup {
  int column = 0;
  int offset = 0;
  int width = 1;
  ColumnKind kind = ColumnKind::Numeric;
};

using GroupIndex = std::vector<FeatureGroup>;

struct Schema {
  std::vector<Column> columns;  // feature columns in file order
  std::string target;
  std::vector<std::string> class_labels;

  [[nodiscard]] int num_classes() const { return static_cast<int>(class_labels.size()); }
  [[nodiscard]] int encoded_dim() const;
  [[nodiscard]] GroupIndex groups() const;
  [[nodiscard]] int column_index(const std::string& name) const;  // -1 when absent
  [[nodiscard]] int label_index(const std::string& label) const;  // -1 when absent
  /// Names of the encoded coordinates ("col" or "col=category").
  [[nodiscard]] std::vector<std::string> encoded_names() const;
  [[nodiscard]] bool has_categorical() const;

  /// Throws DataError when names repeat, K < 2 or a categorical column has < 2 categories.
  void validate() const;

  friend bool operator==(const Schema&, const Schema&) = default;
};

using RawValue = std::variant<double, std::string>;
using RawRow = std::vector<RawValue>;

/// Typed but unencoded table.
struct RawDataset {
  Schema schema;
  std::vector<RawRow> rows;
  std::vector<int> labels;

  [[nodiscard]] std::size_t size() const { return rows.size(); }
  [[nodiscard]] RawDataset subset(const std::vector<std::size_t>& indices) const;
};

/// Encoded table: numeric columns standardised, categorical columns one-hot.
struct Dataset {
  Schema schema;
  Matrix x;
  std::vector<int> y;
  GroupIndex groups;

  [[nodiscard]] std::size_t size() const { return y.size(); }
  [[nodiscard]] Dataset subset(const std::vector<std::size_t>& indices) const;
};

std::vector<std::size_t> class_counts(const std::vector<int>& labels, int num_classes);

void to_json(nlohmann::json& j, const Column& c);
void from_json(const nlohmann::json& j, Column& c);
void to_json(nlohmann::json& j, const Schema& s);
void from_json(const nlohmann::json& j, Schema& s);

}  // namespace hcx
