// IEEE 754 binary16 encode/decode in software. Encoding goes through a
// bracketing step (the two adjacent representables around a value) so the
// nearest-even and stochastic rounding modes share one code path.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

#include "shark/rng.hpp"

namespace shark {

inline constexpr double kFp16Max = 65504.0;       // largest finite binary16
inline constexpr double kFp16MinNormal = 0x1.0p-14;

// Bit layout: 1 sign, 5 exponent (bias 15), 10 fraction.
inline double fp16_to_double(std::uint16_t bits) {
  const int exp = (bits >> 10) & 0x1f;
  const int frac = bits & 0x3ff;
  double mag;
  if (exp == 0) {
    mag = std::ldexp(frac, -24);  // subnormal or zero
  } else if (exp == 31) {
    mag = frac ? std::numeric_limits<double>::quiet_NaN()
               : std::numeric_limits<double>::infinity();
  } else {
    mag = std::ldexp(1024 + frac, exp - 25);
  }
  return (bits & 0x8000) ? -mag : mag;
}

namespace detail {

// Grid spacing of binary16 at magnitude `a`, for a in [0, kFp16Max].
inline double fp16_spacing(double a) {
  if (a < kFp16MinNormal) return 0x1.0p-24;
  int e = std::ilogb(a);  // a in [2^e, 2^(e+1))
  return std::ldexp(1.0, e - 10);
}

// Encodes a nonnegative magnitude that is exactly representable.
inline std::uint16_t fp16_bits_from_exact(double a) {
  if (a == 0.0) return 0;
  if (a < kFp16MinNormal) {
    return static_cast<std::uint16_t>(std::llround(std::ldexp(a, 24)));
  }
  const int e = std::ilogb(a);
  const auto frac = static_cast<std::uint32_t>(std::llround(std::ldexp(a, 10 - e)) - 1024);
  return static_cast<std::uint16_t>(((e + 15) << 10) | frac);
}

}  // namespace detail

// Adjacent representable magnitudes around `a` (0 <= a <= kFp16Max):
// lo <= a <= hi, lo == hi iff a is representable.
inline void fp16_bracket(double a, double& lo, double& hi) {
  const double step = detail::fp16_spacing(a);
  lo = std::floor(a / step) * step;  // exact: step is a power of two
  hi = (lo == a) ? lo : lo + step;
}

// Round to nearest, ties to even mantissa. |v| above kFp16Max saturates to
// kFp16Max (callers scale values into range first).
inline std::uint16_t fp16_round_nearest(double v) {
  const std::uint16_t sign = std::signbit(v) ? 0x8000 : 0;
  double a = std::abs(v);
  if (a > kFp16Max) a = kFp16Max;
  double lo, hi;
  fp16_bracket(a, lo, hi);
  std::uint16_t bits;
  if (lo == hi) {
    bits = detail::fp16_bits_from_exact(lo);
  } else if (a - lo < hi - a) {
    bits = detail::fp16_bits_from_exact(lo);
  } else if (a - lo > hi - a) {
    bits = detail::fp16_bits_from_exact(hi);
  } else {
    bits = detail::fp16_bits_from_exact(lo);
    if (bits & 1) ++bits;  // tie: pick the even mantissa
  }
  return static_cast<std::uint16_t>(bits | sign);
}

// Rounds toward the upper neighbour with probability (|v| - lo) / (hi - lo),
// so the rounded value is unbiased: E[result] = v.
inline std::uint16_t fp16_round_stochastic(double v, Rng& rng) {
  const std::uint16_t sign = std::signbit(v) ? 0x8000 : 0;
  double a = std::abs(v);
  if (a > kFp16Max) a = kFp16Max;
  double lo, hi;
  fp16_bracket(a, lo, hi);
  std::uint16_t bits;
  if (lo == hi) {
    bits = detail::fp16_bits_from_exact(lo);
  } else {
    const double p_hi = (a - lo) / (hi - lo);
    bits = detail::fp16_bits_from_exact(uniform01(rng) < p_hi ? hi : lo);
  }
  return static_cast<std::uint16_t>(bits | sign);
}

}  // namespace shark
