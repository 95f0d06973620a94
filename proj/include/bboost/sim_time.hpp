#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace bboost {

// Simulated time. Integer microseconds keep sums of decimal-millisecond
// inputs (23.7 ms, 3.1 ms, ...) exact.
using Duration = std::chrono::microseconds;

constexpr Duration millis(std::int64_t ms) { return Duration{ms * 1000}; }

inline double to_millis(Duration d) {
  return static_cast<double>(d.count()) / 1000.0;
}

// Parses "23.7", "150", "0.125" or "40ms" into a duration. At most three
// fractional digits; negative values are rejected.
std::optional<Duration> parse_millis(std::string_view text);

// Shortest decimal-millisecond spelling that parse_millis reads back exactly.
std::string format_millis(Duration d);

}  // namespace bboost
