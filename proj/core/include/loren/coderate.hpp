#pragma once

#include <cmath>
#include <compare>
#include <vector>

#include "loren/errors.hpp"

namespace loren {

// Canonical code-rate handle. Rates are keyed by round(1000 * rate); a
// configured 0.66 (or anything within 0.005 of 2/3) means exactly 2/3, which
// keys as 667 and prints as 0.667.
struct CodeRate {
  int milli = 0;
  double value = 0.0;  // exact rate used for code construction

  static CodeRate from_double(double rate) {
    if (!(rate > 0.0 && rate < 1.0))
      throw ConfigError("code rate must lie in (0, 1), got " + std::to_string(rate));
    constexpr double kTwoThirds = 2.0 / 3.0;
    if (std::abs(rate - kTwoThirds) < 0.005) return {667, kTwoThirds};
    return {static_cast<int>(std::llround(rate * 1000.0)), rate};
  }

  double display() const { return static_cast<double>(milli) / 1000.0; }

  friend bool operator==(const CodeRate& a, const CodeRate& b) { return a.milli == b.milli; }
  friend auto operator<=>(const CodeRate& a, const CodeRate& b) { return a.milli <=> b.milli; }
};

inline std::vector<CodeRate> code_rates_from(const std::vector<double>& rates) {
  std::vector<CodeRate> out;
  out.reserve(rates.size());
  for (double r : rates) out.push_back(CodeRate::from_double(r));
  return out;
}

}  // namespace loren
