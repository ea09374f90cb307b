// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace lm {

/// Day-granular calendar date with no time zone. Claims data is recorded per
/// day, so every as-of comparison in the system is a comparison of these.
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(std::chrono::sys_days days) : days_(days) {}

  static constexpr Date from_days(std::int64_t days_since_epoch) {
    return Date(std::chrono::sys_days(std::chrono::days(days_since_epoch)));
  }
  static Date from_ymd(int year, unsigned month, unsigned day);

  /// Strict `YYYY-MM-DD`. Throws `Error(config)` on malformed or impossible dates.
  static Date parse(std::string_view iso);
  static std::optional<Date> try_parse(std::string_view iso) noexcept;

  constexpr std::int64_t days_since_epoch() const {
    return days_.time_since_epoch().count();
  }
  constexpr Date plus_days(std::int64_t n) const {
    return Date(days_ + std::chrono::days(n));
  }
  std::string iso() const;

  constexpr auto operator<=>(const Date&) const = default;

 private:
  std::chrono::sys_days days_{};
};

/// `to - from` in days.
constexpr std::int64_t days_between(Date from, Date to) {
  return to.days_since_epoch() - from.days_since_epoch();
}

/// UTC wall-clock timestamp, ISO-8601 with millisecond precision.
std::string utc_timestamp_now();

}  // namespace lm
