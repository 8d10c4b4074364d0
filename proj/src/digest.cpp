#include "hyconex/digest.hpp"

#include <bit>
#include <cstdint>
#include <cstring>

#include <openssl/evp.h>

#include "hyconex/error.hpp"

namespace hcx {

std::string sha256_hex(std::string_view bytes) {
  unsigned char out[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), out, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    hex.push_back(kHex[out[i] >> 4]);
    hex.push_back(kHex[out[i] & 0xf]);
  }
  return hex;
}

namespace {

void append_u64(std::string& s, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace

std::string canonical_bytes(const ParamSet& params) {
  static_assert(std::endian::native == std::endian::little, "payload encoding assumes a little-endian host");
  std::string s;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& m = params[i];
    s += params.name(i);
    s.push_back('\0');
    append_u64(s, static_cast<std::uint64_t>(m.rows()));
    append_u64(s, static_cast<std::uint64_t>(m.cols()));
    const std::size_t n = static_cast<std::size_t>(m.size()) * sizeof(double);
    const std::size_t at = s.size();
    s.resize(at + n);
    std::memcpy(s.data() + at, m.data(), n);
  }
  return s;
}

std::string digest(const ParamSet& params) { return sha256_hex(canonical_bytes(params)); }

}  // namespace hcx
