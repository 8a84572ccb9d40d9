#include <doctest.h>

#include <cmath>

#include "see/errors.hpp"
#include "see/quantizer.hpp"
#include "support.hpp"

using namespace see;
using namespace see::testing;

TEST_CASE("calibrate_scale") {
  const std::vector<float> v{0.5f, -2.54f, 1.0f};
  CHECK(calibrate_scale(v, TensorKind::weight) == doctest::Approx(2.54 / 127));
  CHECK(calibrate_scale(std::vector<float>{0, 0}, TensorKind::activation) == 1.0);
  CHECK_THROWS_AS(calibrate_scale(std::vector<float>{}, TensorKind::weight), ArgumentError);
}

TEST_CASE("quantize rounds half away and clamps") {
  CHECK(quantize(2.5, 1.0) == 3);
  CHECK(quantize(-2.5, 1.0) == -3);
  CHECK(quantize(1000, 1.0) == 127);
  CHECK(quantize(-1000, 1.0) == -128);
  CHECK(quantize_weight(-1000, 1.0) == -127);
  CHECK(dequantize(-4, 0.25) == -1.0);
}

TEST_CASE("dyadic_approx picks the widest multiplier") {
  const QuantParams q = dyadic_approx(0.5);
  CHECK(q.multiplier == (1u << 30));
  CHECK(q.shift == 31);
  const QuantParams big = dyadic_approx(100.0);
  CHECK(big.multiplier < (1u << 31));
  CHECK(big.multiplier >= (1u << 30));
  CHECK_THROWS_AS(dyadic_approx(0.0), ArgumentError);
  CHECK_THROWS_AS(dyadic_approx(-1.0), ArgumentError);
  CHECK_THROWS_AS(dyadic_approx(NAN), ArgumentError);
  CHECK_THROWS_AS(dyadic_approx(3e9), RangeError);
  CHECK_THROWS_AS(dyadic_approx(1e-12), RangeError);
}

TEST_CASE("requantize matches exact rounding and saturates") {
  Rng rng(31);
  for (int i = 0; i < 20000; ++i) {
    const QuantParams q = random_dyadic(rng);
    const auto acc = static_cast<std::int32_t>(rng());
    CHECK(rescale(acc, q) == exact_round_dyadic(acc, q.multiplier, q.shift));
  }
  const QuantParams half{1u << 30, 31, 0.5};
  CHECK(requantize(3, half) == 2);    // 1.5 -> 2
  CHECK(requantize(-3, half) == -2);  // -1.5 -> -2
  CHECK(requantize(1000, half) == 127);
  CHECK(requantize(-1000, half) == -128);
  CHECK(requantize(0, half) == 0);
}
