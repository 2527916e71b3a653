// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <fmt/format.h>

#include "rastro/error.hpp"

namespace rastro {

/// A UTC instant with second precision. Renders as `YYYY-MM-DDTHH:MM:SSZ`.
class Timestamp {
 public:
  using Seconds = std::chrono::sys_seconds;

  constexpr Timestamp() = default;
  constexpr explicit Timestamp(Seconds s) : value_(s) {}

  static Timestamp now() {
    return Timestamp(std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()));
  }

  static Timestamp from_civil(int year, unsigned month, unsigned day, int hour = 0, int minute = 0,
                              int second = 0) {
    using namespace std::chrono;
    const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
    if (!ymd.ok() || hour < 0 || hour > 23 || minute < 0 || minute > 59 || second < 0 || second > 60) {
      throw InvalidArgument(fmt::format("invalid civil time {}-{}-{} {}:{}:{}", year, month, day, hour,
                                        minute, second));
    }
    return Timestamp(sys_days{ymd} + hours{hour} + minutes{minute} + seconds{second});
  }

  constexpr Seconds time_point() const { return value_; }
  constexpr std::int64_t epoch_seconds() const { return value_.time_since_epoch().count(); }

  std::chrono::sys_days date() const { return std::chrono::floor<std::chrono::days>(value_); }

  std::string iso8601() const {
    using namespace std::chrono;
    const auto day_point = date();
    const year_month_day ymd{day_point};
    const hh_mm_ss hms{value_ - day_point};
    return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}Z", static_cast<int>(ymd.year()),
                       static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                       hms.hours().count(), hms.minutes().count(), hms.seconds().count());
  }

  friend constexpr auto operator<=>(const Timestamp&, const Timestamp&) = default;

 private:
  Seconds value_{};
};

namespace detail {

inline bool read_digits(std::string_view s, std::size_t pos, std::size_t count, int& out) {
  if (pos + count > s.size()) return false;
  int v = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const char c = s[pos + i];
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
  }
  out = v;
  return true;
}

inline std::optional<std::chrono::sys_days> parse_date_prefix(std::string_view s) {
  int y = 0, m = 0, d = 0;
  if (s.size() < 10 || !read_digits(s, 0, 4, y) || s[4] != '-' || !read_digits(s, 5, 2, m) ||
      s[7] != '-' || !read_digits(s, 8, 2, d)) {
    return std::nullopt;
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  return std::chrono::sys_days{ymd};
}

}  // namespace detail

/// Parses `YYYY-MM-DD` only.
inline std::optional<std::chrono::sys_days> parse_date(std::string_view s) {
  if (s.size() != 10) return std::nullopt;
  return detail::parse_date_prefix(s);
}

/// Parses `YYYY-MM-DDTHH:MM:SS` followed by `Z` or a `+HH:MM` / `-HH:MM`
/// offset. The result is normalized to UTC.
inline std::optional<Timestamp> parse_timestamp(std::string_view s) {
  using namespace std::chrono;
  const auto day = detail::parse_date_prefix(s);
  if (!day || s.size() < 20 || s[10] != 'T') return std::nullopt;
  int hh = 0, mm = 0, ss = 0;
  if (!detail::read_digits(s, 11, 2, hh) || s[13] != ':' || !detail::read_digits(s, 14, 2, mm) ||
      s[16] != ':' || !detail::read_digits(s, 17, 2, ss)) {
    return std::nullopt;
  }
  if (hh > 23 || mm > 59 || ss > 60) return std::nullopt;
  auto tp = sys_seconds{*day} + hours{hh} + minutes{mm} + seconds{ss};
  const auto zone = s.substr(19);
  if (zone == "Z") return Timestamp(tp);
  int oh = 0, om = 0;
  if (zone.size() != 6 || (zone[0] != '+' && zone[0] != '-') || !detail::read_digits(zone, 1, 2, oh) ||
      zone[3] != ':' || !detail::read_digits(zone, 4, 2, om) || oh > 23 || om > 59) {
    return std::nullopt;
  }
  const auto offset = hours{oh} + minutes{om};
  tp = zone[0] == '+' ? tp - offset : tp + offset;
  return Timestamp(tp);
}

inline Timestamp require_timestamp(std::string_view s) {
  auto t = parse_timestamp(s);
  if (!t) throw InvalidArgument("not an ISO-8601 timestamp: '" + std::string(s) + "'");
  return *t;
}

}  // namespace rastro
