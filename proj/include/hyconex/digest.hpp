#pragma once

#include <string>
#include <string_view>

#include "hyconex/params.hpp"

namespace hcx {

/// Lower-case hex SHA-256 of `bytes`.
std::string sha256_hex(std::string_view bytes);

/// Little-endian float64 bytes of every matrix in order, preceded by its name and shape.
std::string canonical_bytes(const ParamSet& params);
std::string digest(const ParamSet& params);

}  // namespace hcx
