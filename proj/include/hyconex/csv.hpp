#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "hyconex/dataset.hpp"

namespace hcx {

struct CsvOptions {
  std::string target;                          // empty: last column
  std::map<std::string, ColumnKind> kind_hints;  // overrides inference per column
};

/// Reads a header-first, comma-separated file and infers the schema: a column
/// whose every value parses as a number is numeric, anything else categorical.
RawDataset load_csv(const std::filesystem::path& path, const CsvOptions& options = {});

/// Reads a file against a known schema (columns matched by header name).
RawDataset load_csv(const std::filesystem::path& path, const Schema& schema);

void write_csv(const RawDataset& data, const std::filesystem::path& path);

/// Sidecar manifest path for a CSV file: "<file>.manifest.json".
std::filesystem::path manifest_path(const std::filesystem::path& csv);
void write_manifest(const std::filesystem::path& csv, const Schema& schema, const nlohmann::json& extra);
nlohmann::json read_manifest(const std::filesystem::path& csv);

std::string format_number(double v);

}  // namespace hcx
