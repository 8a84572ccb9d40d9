#include "see/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "see/errors.hpp"

namespace see {

namespace {

template <typename R>
double max_abs_scale(std::span<const R> values) {
  if (values.empty()) throw ArgumentError("cannot calibrate a scale from no values");
  double m = 0.0;
  for (const R v : values) m = std::max(m, std::abs(static_cast<double>(v)));
  return m == 0.0 ? 1.0 : m / kQuantMax;
}

double round_away(double v) { return std::round(v); }

}  // namespace

// Weights and activations share the max-abs rule; the kind is kept in the interface so a
// percentile activation rule can slot in without touching callers.
double calibrate_scale(std::span<const float> values, TensorKind) { return max_abs_scale(values); }
double calibrate_scale(std::span<const double> values, TensorKind) { return max_abs_scale(values); }

std::int8_t quantize(double v, double scale) {
  const double r = round_away(v / scale);
  return static_cast<std::int8_t>(std::clamp(r, static_cast<double>(kQuantMin), static_cast<double>(kQuantMax)));
}

std::int8_t quantize_weight(double v, double scale) {
  const double r = round_away(v / scale);
  return static_cast<std::int8_t>(std::clamp(r, -static_cast<double>(kQuantMax), static_cast<double>(kQuantMax)));
}

QuantParams dyadic_approx(double real_scale) {
  if (!(real_scale > 0.0) || !std::isfinite(real_scale))
    throw ArgumentError("dyadic scale must be positive and finite");
  constexpr double kLimit = 2147483648.0;  // 2^31
  for (int n = 31; n >= 0; --n) {
    const double m = std::round(std::ldexp(real_scale, n));
    if (m < kLimit) {
      if (m < 1.0) throw RangeError("scale " + std::to_string(real_scale) + " underflows the dyadic multiplier");
      return QuantParams{static_cast<std::uint32_t>(m), static_cast<std::uint8_t>(n), real_scale};
    }
  }
  throw RangeError("scale " + std::to_string(real_scale) + " too large for a 31-bit multiplier");
}

}  // namespace see
