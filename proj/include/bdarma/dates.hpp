#pragma once

// ISO-8601 calendar dates (YYYY-MM-DD) on top of <chrono>.

#include <chrono>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "bdarma/error.hpp"

namespace bdarma::dates {

inline std::chrono::year_month_day parse(std::string_view s) {
  int y = 0;
  unsigned m = 0, d = 0;
  const std::string buf(s);
  char tail = 0;
  if (std::sscanf(buf.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3)
    throw FormatError("not an ISO date: '" + buf + "'");
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw FormatError("invalid calendar date: '" + buf + "'");
  return ymd;
}

inline std::string format(std::chrono::year_month_day ymd) {
  char out[16];
  std::snprintf(out, sizeof out, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return out;
}

/// Same calendar day `years` earlier; Feb 29 clamps to Feb 28.
inline std::string minus_years(std::string_view iso, int years) {
  auto ymd = parse(iso);
  std::chrono::year_month_day shifted{ymd.year() - std::chrono::years{years}, ymd.month(), ymd.day()};
  if (!shifted.ok()) shifted = std::chrono::year_month_day{shifted.year(), shifted.month(), std::chrono::day{28}};
  return format(shifted);
}

/// `n` weekly dates starting at `first`.
inline std::vector<std::string> weekly(std::string_view first, std::size_t n) {
  std::vector<std::string> out;
  out.reserve(n);
  std::chrono::sys_days day{parse(first)};
  for (std::size_t i = 0; i < n; ++i, day += std::chrono::days{7}) out.push_back(format(std::chrono::year_month_day{day}));
  return out;
}

}  // namespace bdarma::dates
