// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "lm/core/digest.hpp"

namespace lm {

/// Canonical byte encoding of a JSON value tree: object keys in byte-wise
/// lexicographic order, no whitespace, UTF-8 strings, integers as integers,
/// doubles in shortest round-trip form with no trailing zeros (an integral
/// double prints as an integer). Non-finite numbers, binary values and
/// discarded values throw `Error(encoding)`.
std::string canonical_encode_json(const nlohmann::json& value);

/// Any record with a `to_json` overload.
template <typename Record>
std::string canonical_encode(const Record& record) {
  return canonical_encode_json(nlohmann::json(record));
}

template <typename Record>
Digest canonical_digest(const Record& record) {
  return digest(canonical_encode(record));
}

/// Formats a double the same way the canonical encoder does.
std::string format_decimal(double v);

/// Pieces of the encoder for hand-written encoders of hot records. They emit
/// exactly the bytes `canonical_encode_json` would for the same value.
void append_canonical_number(std::string& out, double v);
/// Quoted and escaped; throws `Error(encoding)` on malformed UTF-8.
void append_canonical_string(std::string& out, std::string_view s);

}  // namespace lm
