#include "hyconex/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "hyconex/error.hpp"

namespace hcx {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        field.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(ch);
    }
  }
  out.push_back(std::move(field));
  for (auto& f : out) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
};

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Table t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto fields = split_line(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw DataError(path.string() + ": row " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                      " fields, header has " + std::to_string(t.header.size()));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (fields[c].empty()) {
        throw DataError(path.string() + ": missing value at row " + std::to_string(line_no) + ", column '" +
                        t.header[c] + "'");
      }
    }
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(line_no);
  }
  if (t.header.empty()) throw DataError(path.string() + ": no header row");
  if (t.rows.empty()) throw DataError(path.string() + ": no data rows");
  return t;
}

std::vector<std::string> sorted_labels(const std::set<std::string>& values) {
  std::vector<std::string> out(values.begin(), values.end());
  const bool numeric = std::all_of(out.begin(), out.end(), [](const std::string& s) {
    double v = 0.0;
    return parse_double(s, v);
  });
  if (numeric) {
    std::stable_sort(out.begin(), out.end(), [](const std::string& a, const std::string& b) {
      double x = 0.0, y = 0.0;
      parse_double(a, x);
      parse_double(b, y);
      return x < y;
    });
  }
  return out;
}

RawDataset fill(const Table& t, const std::filesystem::path& path, Schema schema, std::size_t target_col,
                const std::vector<int>& header_to_feature) {
  RawDataset data;
  data.schema = std::move(schema);
  data.rows.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& fields = t.rows[r];
    RawRow row(data.schema.columns.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (c == target_col) continue;
      const int f = header_to_feature[c];
      if (f < 0) continue;
      const Column& col = data.schema.columns[static_cast<std::size_t>(f)];
      if (col.kind == ColumnKind::Numeric) {
        double v = 0.0;
        if (!parse_double(fields[c], v)) {
          throw DataError(path.string() + ": unparseable number '" + fields[c] + "' at row " +
                          std::to_string(t.line_numbers[r]) + ", column '" + col.name + "'");
        }
        row[static_cast<std::size_t>(f)] = v;
      } else {
        row[static_cast<std::size_t>(f)] = fields[c];
      }
    }
    const int label = data.schema.label_index(fields[target_col]);
    if (label < 0) {
      throw DataError(path.string() + ": unknown class label '" + fields[target_col] + "' at row " +
                      std::to_string(t.line_numbers[r]));
    }
    data.rows.push_back(std::move(row));
    data.labels.push_back(label);
  }
  return data;
}

}  // namespace

RawDataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  const Table t = read_table(path);
  std::size_t target_col = t.header.size() - 1;
  if (!options.target.empty()) {
    auto it = std::find(t.header.begin(), t.header.end(), options.target);
    if (it == t.header.end()) throw DataError(path.string() + ": unknown target column '" + options.target + "'");
    target_col = static_cast<std::size_t>(it - t.header.begin());
  }
  if (t.header.size() < 2) throw DataError(path.string() + ": need at least one feature and a target column");

  Schema schema;
  schema.target = t.header[target_col];
  std::vector<int> header_to_feature(t.header.size(), -1);
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (c == target_col) continue;
    Column col;
    col.name = t.header[c];
    bool all_numeric = true;
    std::set<std::string> values;
    for (const auto& row : t.rows) {
      double v = 0.0;
      all_numeric = all_numeric && parse_double(row[c], v);
      values.insert(row[c]);
    }
    col.kind = all_numeric ? ColumnKind::Numeric : ColumnKind::Categorical;
    if (auto hint = options.kind_hints.find(col.name); hint != options.kind_hints.end()) col.kind = hint->second;
    if (col.kind == ColumnKind::Categorical) col.categories = sorted_labels(values);
    header_to_feature[c] = static_cast<int>(schema.columns.size());
    schema.columns.push_back(std::move(col));
  }
  std::set<std::string> labels;
  for (const auto& row : t.rows) labels.insert(row[target_col]);
  schema.class_labels = sorted_labels(labels);
  schema.validate();
  return fill(t, path, std::move(schema), target_col, header_to_feature);
}

RawDataset load_csv(const std::filesystem::path& path, const Schema& schema) {
  const Table t = read_table(path);
  auto it = std::find(t.header.begin(), t.header.end(), schema.target);
  if (it == t.header.end()) throw DataError(path.string() + ": missing target column '" + schema.target + "'");
  const auto target_col = static_cast<std::size_t>(it - t.header.begin());
  std::vector<int> header_to_feature(t.header.size(), -1);
  std::vector<bool> present(schema.columns.size(), false);
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    const int f = schema.column_index(t.header[c]);
    if (f >= 0) {
      header_to_feature[c] = f;
      present[static_cast<std::size_t>(f)] = true;
    }
  }
  for (std::size_t f = 0; f < present.size(); ++f) {
    if (!present[f]) throw DataError(path.string() + ": missing column '" + schema.columns[f].name + "'");
  }
  return fill(t, path, schema, target_col, header_to_feature);
}

std::string format_number(double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

void write_csv(const RawDataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& c : data.schema.columns) out << c.name << ',';
  out << data.schema.target << '\n';
  for (std::size_t r = 0; r < data.rows.size(); ++r) {
    for (const auto& v : data.rows[r]) {
      if (const double* d = std::get_if<double>(&v)) {
        out << format_number(*d);
      } else {
        out << std::get<std::string>(v);
      }
      out << ',';
    }
    out << data.schema.class_labels.at(static_cast<std::size_t>(data.labels[r])) << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::filesystem::path manifest_path(const std::filesystem::path& csv) {
  return std::filesystem::path(csv.string() + ".manifest.json");
}

void write_manifest(const std::filesystem::path& csv, const Schema& schema, const nlohmann::json& extra) {
  nlohmann::json j = extra;
  j["schema"] = schema;
  j["target"] = schema.target;
  j["file"] = csv.filename().string();
  std::ofstream out(manifest_path(csv));
  if (!out) throw IoError("cannot write manifest for " + csv.string());
  out << j.dump(2) << '\n';
}

nlohmann::json read_manifest(const std::filesystem::path& csv) {
  std::ifstream in(manifest_path(csv));
  if (!in) throw IoError("no manifest for " + csv.string());
  return nlohmann::json::parse(in);
}

}  // namespace hcx
