#include "bboost/sim_time.hpp"

#include <cctype>
#include <cstdio>

namespace bboost {

std::optional<Duration> parse_millis(std::string_view text) {
  if (text.size() >= 2 && text.substr(text.size() - 2) == "ms") {
    text.remove_suffix(2);
  }
  if (text.empty()) return std::nullopt;

  std::int64_t whole = 0;
  std::size_t i = 0;
  for (; i < text.size() && text[i] != '.'; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) return std::nullopt;
    whole = whole * 10 + (text[i] - '0');
    if (whole > 1'000'000'000'000) return std::nullopt;
  }
  if (i == 0) return std::nullopt;

  std::int64_t frac = 0;
  int digits = 0;
  if (i < text.size()) {
    ++i;  // '.'
    if (i == text.size()) return std::nullopt;
    for (; i < text.size(); ++i) {
      if (!std::isdigit(static_cast<unsigned char>(text[i])) || digits == 3) {
        return std::nullopt;
      }
      frac = frac * 10 + (text[i] - '0');
      ++digits;
    }
  }
  for (; digits < 3; ++digits) frac *= 10;
  return Duration{whole * 1000 + frac};
}

std::string format_millis(Duration d) {
  const auto us = d.count();
  const bool negative = us < 0;
  const auto mag = negative ? -us : us;
  std::string out = std::to_string(mag / 1000);
  if (auto frac = mag % 1000; frac != 0) {
    char buf[4];
    std::snprintf(buf, sizeof buf, "%03lld", static_cast<long long>(frac));
    std::string f(buf);
    while (f.back() == '0') f.pop_back();
    out += '.';
    out += f;
  }
  return negative ? "-" + out : out;
}

}  // namespace bboost
