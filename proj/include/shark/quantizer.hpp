// Row-vector quantization: per-row scales, int8/fp16 payload encode/decode,
// nearest and stochastic rounding. Arithmetic runs in double; scales are
// carried as 32-bit floats to match the on-disk record.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "shark/errors.hpp"
#include "shark/float16.hpp"
#include "shark/rng.hpp"

namespace shark {

// Tag values double as the on-disk precision byte.
enum class Tier : std::uint8_t { kFp32 = 0, kFp16 = 1, kInt8 = 2 };

inline constexpr int kInt8Max = 127;   //  2^(b-1) - 1
inline constexpr int kInt8Min = -128;  // -2^(b-1)

inline std::size_t tier_value_bytes(Tier tier) {
  switch (tier) {
    case Tier::kFp32: return 4;
    case Tier::kFp16: return 2;
    case Tier::kInt8: return 1;
  }
  throw InternalError("tier_value_bytes: bad tier tag");
}

inline const char* tier_name(Tier tier) {
  switch (tier) {
    case Tier::kFp32: return "fp32";
    case Tier::kFp16: return "fp16";
    case Tier::kInt8: return "int8";
  }
  return "?";
}

// How the int8 scale denominator is chosen. kSymmetric maps the row's
// absolute maximum to I_max, so nearest rounding stays within range.
// kFullRange divides by the whole integer span (I_max - I_min); the largest
// coordinate then lands at ~2*I_max and gets clipped. Kept selectable for
// comparison; kSymmetric is the default.
enum class ScalePolicy { kSymmetric, kFullRange };

// Rounding applied when a value falls between representables. Stochastic
// rounding returns floor(x) with probability ceil(x) - x, else ceil(x),
// keeping E[rounded] = x; it carries its own seeded engine.
class RoundingMode {
 public:
  static RoundingMode nearest() { return RoundingMode(false, 0); }
  static RoundingMode stochastic(std::uint64_t seed) { return RoundingMode(true, seed); }

  bool is_stochastic() const { return stochastic_; }

  // Integer rounding (int8 path). Nearest mode: ties away from zero.
  double round_integer(double x) {
    if (!stochastic_) return std::round(x);
    const double lo = std::floor(x);
    const double frac = x - lo;
    if (frac == 0.0) return lo;  // on-grid values draw no randomness
    return uniform01(rng_) < frac ? lo + 1.0 : lo;
  }

  std::uint16_t round_fp16(double x) {
    return stochastic_ ? fp16_round_stochastic(x, rng_) : fp16_round_nearest(x);
  }

 private:
  RoundingMode(bool stochastic, std::uint64_t seed) : stochastic_(stochastic), rng_(seed) {}

  bool stochastic_;
  Rng rng_;
};

// Per-row scale (Eq. "scale = absmax / denominator" family).
//   int8:  absmax / 127 (symmetric) or absmax / 255 (full range)
//   fp16:  1 unless absmax exceeds the largest finite half, then absmax / 65504
//   fp32:  1 (identity tier; the scale is carried for record framing only)
// All-zero rows get scale 0 at every tier; quantize/dequantize treat scale 0
// as "payload and result are all zeros".
inline float compute_scale(std::span<const double> row, Tier tier,
                           ScalePolicy policy = ScalePolicy::kSymmetric) {
  double abs_max = 0.0;
  for (double v : row) {
    if (!std::isfinite(v)) throw NumericError("compute_scale: non-finite value in row");
    abs_max = std::max(abs_max, std::abs(v));
  }
  if (abs_max == 0.0) return 0.0f;
  switch (tier) {
    case Tier::kFp32:
      return 1.0f;
    case Tier::kFp16:
      return abs_max > kFp16Max ? static_cast<float>(abs_max / kFp16Max) : 1.0f;
    case Tier::kInt8: {
      const double denominator =
          policy == ScalePolicy::kSymmetric ? kInt8Max : (kInt8Max - kInt8Min);
      return static_cast<float>(abs_max / denominator);
    }
  }
  throw InternalError("compute_scale: bad tier tag");
}

// Encodes one row at the given tier. int8 values are clamped to
// [-128, 127] after rounding; fp32 is a bitwise float cast.
inline std::vector<std::uint8_t> quantize_row(std::span<const double> row, Tier tier,
                                              float scale, RoundingMode& rounding) {
  std::vector<std::uint8_t> payload(row.size() * tier_value_bytes(tier));
  if (scale == 0.0f && tier != Tier::kFp32) return payload;  // all-zero row
  const double s = scale;
  switch (tier) {
    case Tier::kFp32:
      for (std::size_t j = 0; j < row.size(); ++j) {
        const auto v = static_cast<float>(row[j]);
        std::memcpy(payload.data() + 4 * j, &v, 4);
      }
      break;
    case Tier::kFp16:
      for (std::size_t j = 0; j < row.size(); ++j) {
        const std::uint16_t h = rounding.round_fp16(row[j] / s);
        payload[2 * j] = static_cast<std::uint8_t>(h & 0xff);
        payload[2 * j + 1] = static_cast<std::uint8_t>(h >> 8);
      }
      break;
    case Tier::kInt8:
      for (std::size_t j = 0; j < row.size(); ++j) {
        const double q = rounding.round_integer(row[j] / s);
        const double clamped = std::clamp(q, static_cast<double>(kInt8Min),
                                          static_cast<double>(kInt8Max));
        payload[j] = static_cast<std::uint8_t>(static_cast<std::int8_t>(clamped));
      }
      break;
  }
  return payload;
}

// Decodes a payload produced by quantize_row with the same (tier, scale).
inline std::vector<double> dequantize_row(std::span<const std::uint8_t> payload, Tier tier,
                                          float scale, std::size_t dim) {
  if (payload.size() != dim * tier_value_bytes(tier)) {
    throw FormatError("dequantize_row: payload is " + std::to_string(payload.size()) +
                      " bytes, expected " + std::to_string(dim * tier_value_bytes(tier)) +
                      " for " + tier_name(tier) + " dim " + std::to_string(dim));
  }
  std::vector<double> out(dim, 0.0);
  if (scale == 0.0f && tier != Tier::kFp32) return out;
  const double s = scale;
  switch (tier) {
    case Tier::kFp32:
      for (std::size_t j = 0; j < dim; ++j) {
        float v;
        std::memcpy(&v, payload.data() + 4 * j, 4);
        out[j] = v;
      }
      break;
    case Tier::kFp16:
      for (std::size_t j = 0; j < dim; ++j) {
        const auto h = static_cast<std::uint16_t>(payload[2 * j] |
                                                  (payload[2 * j + 1] << 8));
        out[j] = fp16_to_double(h) * s;
      }
      break;
    case Tier::kInt8:
      for (std::size_t j = 0; j < dim; ++j) {
        out[j] = static_cast<std::int8_t>(payload[j]) * s;
      }
      break;
  }
  return out;
}

}  // namespace shark
