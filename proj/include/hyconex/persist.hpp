#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "hyconex/model.hpp"

namespace hcx {

inline constexpr int kBundleVersion = 1;
inline constexpr const char* kBundleMagic = "HYCONEX-BUNDLE";

/// A model plus free-form metadata (training summary, data manifest) that is
/// stored in the header and covered by the hash.
struct ModelBundle {
  Model model;
  nlohmann::json metadata = nlohmann::json::object();
};

/// Hex SHA-256 over the canonical header (without the hash field) and the payload bytes.
std::string hash_model(const ModelBundle& bundle);

/// Single file: "HYCONEX-BUNDLE <n>\n", an n-byte JSON header listing every
/// payload section with its shape, then the sections as little-endian float64.
/// Returns the header that was written.
nlohmann::json save_bundle(const ModelBundle& bundle, const std::filesystem::path& path);

/// Throws IoError on unreadable, truncated, wrong-version or hash-mismatched files.
ModelBundle load_bundle(const std::filesystem::path& path);

}  // namespace hcx
