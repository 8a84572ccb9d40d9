#pragma once

#include <cstdint>
#include <span>

namespace see {

/// Dyadic rescale: a real ratio approximated as multiplier / 2^shift.
struct QuantParams {
  std::uint32_t multiplier = 0;  // < 2^31
  std::uint8_t shift = 0;        // 0..31
  double real_scale = 0.0;       // the ratio being approximated; informational only

  double value() const { return static_cast<double>(multiplier) / static_cast<double>(std::uint64_t{1} << shift); }
  friend bool operator==(const QuantParams& a, const QuantParams& b) {
    return a.multiplier == b.multiplier && a.shift == b.shift;
  }
};

enum class TensorKind { weight, activation };

inline constexpr int kQuantMax = 127;
inline constexpr int kQuantMin = -128;

/// Per-tensor symmetric scale max|v| / 127; 1 when every value is zero.
/// Throws ArgumentError on empty input.
double calibrate_scale(std::span<const float> values, TensorKind kind);
double calibrate_scale(std::span<const double> values, TensorKind kind);

/// round-half-away-from-zero(v / scale), clamped to [-128, 127].
std::int8_t quantize(double v, double scale);
/// Weight variant, clamped to the symmetric range [-127, 127].
std::int8_t quantize_weight(double v, double scale);
inline double dequantize(std::int32_t q, double scale) { return static_cast<double>(q) * scale; }

/// Largest shift n <= 31 with round(s * 2^n) < 2^31. Throws RangeError when even n = 0
/// overflows, ArgumentError for s <= 0 or non-finite s.
QuantParams dyadic_approx(double real_scale);

/// acc * m / 2^n rounded half away from zero, using a 64-bit product; no saturation.
inline std::int64_t rescale(std::int64_t acc, const QuantParams& q) {
  const std::int64_t prod = acc * static_cast<std::int64_t>(q.multiplier);
  if (q.shift == 0) return prod;
  const std::int64_t half = std::int64_t{1} << (q.shift - 1);
  return prod >= 0 ? (prod + half) >> q.shift : -((half - prod) >> q.shift);
}

inline std::int32_t saturate(std::int64_t v, std::int32_t lo, std::int32_t hi) {
  return static_cast<std::int32_t>(v < lo ? lo : (v > hi ? hi : v));
}

/// Integer-only requantization of an int32 accumulator to int8.
inline std::int8_t requantize(std::int32_t acc, const QuantParams& q) {
  return static_cast<std::int8_t>(saturate(rescale(acc, q), kQuantMin, kQuantMax));
}

}  // namespace see
