#pragma once

#include <cstdint>
#include <string>

namespace mladi {

// Dialectness thresholds are carried around as exact integer ratios (1/9 and
// 7/9 come from a three-annotator scale with steps of 1/3) and only lowered to
// double at the comparison site. Manifests print the ratio, never a decimal
// approximation.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  constexpr double value() const { return static_cast<double>(num) / static_cast<double>(den); }

  std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }

  friend constexpr bool operator<(double x, const Rational& r) { return x < r.value(); }
  friend constexpr bool operator>(double x, const Rational& r) { return x > r.value(); }
  friend constexpr bool operator<=(double x, const Rational& r) { return x <= r.value(); }
  friend constexpr bool operator>=(double x, const Rational& r) { return x >= r.value(); }
};

// ALDi scale boundaries.
inline constexpr Rational kMsaThreshold{1, 9};            // below: MSA
inline constexpr Rational kHighDialectnessThreshold{7, 9};  // above: highly dialectal
inline constexpr Rational kLowMidBoundary{44, 100};       // diagnostic/curriculum split

}  // namespace mladi
