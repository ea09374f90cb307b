// SPDX-License-Identifier: Apache-2.0
#include "lm/core/digest.hpp"

#include <array>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "lm/core/error.hpp"

namespace lm {

bool Digest::is_valid_hex(std::string_view hex) noexcept {
  if (hex.size() != 64) return false;
  for (char c : hex) {
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  }
  return true;
}

Digest Digest::from_hex(std::string_view hex) {
  if (!is_valid_hex(hex)) {
    throw Error(ErrorCode::integrity, "malformed digest '" + std::string(hex) + "'");
  }
  Digest d;
  d.hex_ = std::string(hex);
  return d;
}

Digest digest(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::io, "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(len * 2);
  for (unsigned i = 0; i < len; ++i) {
    hex.push_back(kHex[md[i] >> 4]);
    hex.push_back(kHex[md[i] & 0xF]);
  }
  return Digest::from_hex(hex);
}

void to_json(nlohmann::json& j, const Digest& d) { j = d.hex(); }
void from_json(const nlohmann::json& j, Digest& d) {
  const auto& s = j.get_ref<const std::string&>();
  d = s.empty() ? Digest{} : Digest::from_hex(s);
}

}  // namespace lm
