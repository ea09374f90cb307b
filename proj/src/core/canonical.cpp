// SPDX-License-Identifier: Apache-2.0
#include "lm/core/canonical.hpp"

#include <charconv>
#include <cmath>
#include <algorithm>
#include <vector>

#include "lm/core/error.hpp"

namespace lm {

void append_canonical_number(std::string& out, double v) {
  if (!std::isfinite(v)) throw Error(ErrorCode::encoding, "non-finite number");
  if (v == 0.0) {  // also folds -0
    out.push_back('0');
    return;
  }
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw Error(ErrorCode::encoding, "number formatting failed");
  out.append(buf, end);
}

std::string format_decimal(double v) {
  std::string out;
  append_canonical_number(out, v);
  return out;
}

namespace {

// Length of the well-formed UTF-8 sequence starting at s[i] (RFC 3629), or 0.
std::size_t utf8_sequence(std::string_view s, std::size_t i) {
  const auto b = [&](std::size_t k) { return static_cast<unsigned char>(s[i + k]); };
  const auto cont = [&](std::size_t k) { return i + k < s.size() && (b(k) & 0xC0) == 0x80; };
  const unsigned char c = b(0);
  if (c < 0x80) return 1;
  if (c >= 0xC2 && c <= 0xDF) return cont(1) ? 2 : 0;
  if (c >= 0xE0 && c <= 0xEF) {
    if (!cont(1) || !cont(2)) return 0;
    if (c == 0xE0 && b(1) < 0xA0) return 0;  // overlong
    if (c == 0xED && b(1) > 0x9F) return 0;  // surrogates
    return 3;
  }
  if (c >= 0xF0 && c <= 0xF4) {
    if (!cont(1) || !cont(2) || !cont(3)) return 0;
    if (c == 0xF0 && b(1) < 0x90) return 0;  // overlong
    if (c == 0xF4 && b(1) > 0x8F) return 0;  // above U+10FFFF
    return 4;
  }
  return 0;
}

}  // namespace

void append_canonical_string(std::string& out, std::string_view s) {
  static constexpr char kHex[] = "0123456789abcdef";
  out.push_back('"');
  for (std::size_t i = 0; i < s.size();) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (c >= 0x80) {
      const std::size_t n = utf8_sequence(s, i);
      if (n == 0) throw Error(ErrorCode::encoding, "invalid UTF-8 text at byte " + std::to_string(i));
      out.append(s.data() + i, n);
      i += n;
      continue;
    }
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c < 0x20) {
          out += "\\u00";
          out.push_back(kHex[c >> 4]);
          out.push_back(kHex[c & 0xF]);
        } else {
          out.push_back(static_cast<char>(c));
        }
    }
    ++i;
  }
  out.push_back('"');
}

namespace {

void encode_into(const nlohmann::json& v, std::string& out) {
  using T = nlohmann::json::value_t;
  switch (v.type()) {
    case T::null: out += "null"; return;
    case T::boolean: out += v.get<bool>() ? "true" : "false"; return;
    case T::number_integer: out += std::to_string(v.get<std::int64_t>()); return;
    case T::number_unsigned: out += std::to_string(v.get<std::uint64_t>()); return;
    case T::number_float: append_canonical_number(out, v.get<double>()); return;
    case T::string: append_canonical_string(out, v.get_ref<const std::string&>()); return;
    case T::array: {
      out.push_back('[');
      bool first = true;
      for (const auto& e : v) {
        if (!first) out.push_back(',');
        first = false;
        encode_into(e, out);
      }
      out.push_back(']');
      return;
    }
    case T::object: {
      // The std::map backing already iterates in byte order; only sort when
      // that ever stops being true.
      const auto& obj = v.get_ref<const nlohmann::json::object_t&>();
      const std::string* prev = nullptr;
      bool ordered = true;
      for (const auto& [k, _] : obj) {
        if (prev && !(*prev < k)) ordered = false;
        prev = &k;
      }
      std::vector<std::pair<const std::string*, const nlohmann::json*>> items;
      items.reserve(obj.size());
      for (const auto& [k, val] : obj) items.emplace_back(&k, &val);
      if (!ordered)
        std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return *a.first < *b.first; });
      out.push_back('{');
      bool first = true;
      for (const auto& [k, val] : items) {
        if (!first) out.push_back(',');
        first = false;
        append_canonical_string(out, *k);
        out.push_back(':');
        encode_into(*val, out);
      }
      out.push_back('}');
      return;
    }
    case T::binary: throw Error(ErrorCode::encoding, "binary values are not encodable");
    case T::discarded: throw Error(ErrorCode::encoding, "discarded value");
  }
  throw Error(ErrorCode::encoding, "unsupported value type");
}

}  // namespace

std::string canonical_encode_json(const nlohmann::json& value) {
  std::string out;
  encode_into(value, out);
  return out;
}

}  // namespace lm
