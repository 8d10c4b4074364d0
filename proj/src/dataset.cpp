#include "hyconex/dataset.hpp"

#include <set>

#include "hyconex/error.hpp"

namespace hcx {

int Schema::encoded_dim() const {
  int d = 0;
  for (const auto& c : columns) d += c.kind == ColumnKind::Numeric ? 1 : static_cast<int>(c.categories.size());
  return d;
}

GroupIndex Schema::groups() const {
  GroupIndex out;
  int offset = 0;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    const auto& c = columns[i];
    const int width = c.kind == ColumnKind::Numeric ? 1 : static_cast<int>(c.categories.size());
    out.push_back({static_cast<int>(i), offset, width, c.kind});
    offset += width;
  }
  return out;
}

int Schema::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

int Schema::label_index(const std::string& label) const {
  for (std::size_t i = 0; i < class_labels.size(); ++i) {
    if (class_labels[i] == label) return static_cast<int>(i);
  }
  return -1;
}

std::vector<std::string> Schema::encoded_names() const {
  std::vector<std::string> out;
  for (const auto& c : columns) {
    if (c.kind == ColumnKind::Numeric) {
      out.push_back(c.name);
    } else {
      for (const auto& cat : c.categories) out.push_back(c.name + "=" + cat);
    }
  }
  return out;
}

bool Schema::has_categorical() const {
  for (const auto& c : columns) {
    if (c.kind == ColumnKind::Categorical) return true;
  }
  return false;
}

void Schema::validate() const {
  std::set<std::string> seen;
  for (const auto& c : columns) {
    if (c.name == target) throw DataError("target column '" + target + "' listed as a feature");
    if (!seen.insert(c.name).second) throw DataError("duplicate column name '" + c.name + "'");
    if (c.kind == ColumnKind::Categorical) {
      if (c.categories.size() < 2) throw DataError("categorical column '" + c.name + "' has fewer than 2 categories");
      std::set<std::string> cats(c.categories.begin(), c.categories.end());
      if (cats.size() != c.categories.size()) throw DataError("duplicate category in column '" + c.name + "'");
    }
  }
  if (columns.empty()) throw DataError("schema has no feature columns");
  if (class_labels.size() < 2) throw DataError("target '" + target + "' has fewer than 2 classes");
}

RawDataset RawDataset::subset(const std::vector<std::size_t>& indices) const {
  RawDataset out;
  out.schema = schema;
  out.rows.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (auto i : indices) {
    out.rows.push_back(rows.at(i));
    out.labels.push_back(labels.at(i));
  }
  return out;
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.schema = schema;
  out.groups = groups;
  out.x.resize(static_cast<Eigen::Index>(indices.size()), x.cols());
  out.y.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    out.x.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(indices[r]));
    out.y.push_back(y.at(indices[r]));
  }
  return out;
}

std::vector<std::size_t> class_counts(const std::vector<int>& labels, int num_classes) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (int l : labels) ++counts.at(static_cast<std::size_t>(l));
  return counts;
}

void to_json(nlohmann::json& j, const Column& c) {
  j = {{"name", c.name}, {"kind", c.kind == ColumnKind::Numeric ? "numeric" : "categorical"}};
  if (c.kind == ColumnKind::Categorical) j["categories"] = c.categories;
}

void from_json(const nlohmann::json& j, Column& c) {
  c.name = j.at("name").get<std::string>();
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "numeric") {
    c.kind = ColumnKind::Numeric;
  } else if (kind == "categorical") {
    c.kind = ColumnKind::Categorical;
    c.categories = j.at("categories").get<std::vector<std::string>>();
  } else {
    throw DataError("unknown column kind '" + kind + "'");
  }
}

void to_json(nlohmann::json& j, const Schema& s) {
  j = {{"columns", s.columns}, {"target", s.target}, {"class_labels", s.class_labels}};
}

void from_json(const nlohmann::json& j, Schema& s) {
  s.columns = j.at("columns").get<std::vector<Column>>();
  s.target = j.at("target").get<std::string>();
  s.class_labels = j.at("class_labels").get<std::vector<std::string>>();
}

}  // namespace hcx
