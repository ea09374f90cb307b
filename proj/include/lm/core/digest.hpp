// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

namespace lm {

/// SHA-256 content identity, stored as 64 lowercase hex characters.
class Digest {
 public:
  Digest() = default;

  /// Throws `Error(integrity)` unless `hex` is 64 lowercase hex characters.
  static Digest from_hex(std::string_view hex);
  static bool is_valid_hex(std::string_view hex) noexcept;

  static constexpr std::string_view algorithm() { return "sha256"; }
  const std::string& hex() const noexcept { return hex_; }
  bool empty() const noexcept { return hex_.empty(); }

  auto operator<=>(const Digest&) const = default;

 private:
  std::string hex_;
};

Digest digest(std::string_view bytes);

void to_json(nlohmann::json& j, const Digest& d);
void from_json(const nlohmann::json& j, Digest& d);

}  // namespace lm
