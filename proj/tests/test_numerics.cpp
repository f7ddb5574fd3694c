// Copyright 2026 hetpart contributors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cfenv>
#include <cmath>
#include <cstdint>
#include <limits>

#include "hetpart/numerics.hpp"
#include "hetpart/rng.hpp"

namespace num = hetpart::numerics;
using hetpart::Matrix;
using hetpart::Precision;
using hetpart::Rng;

namespace {

// Reference rounding built on double arithmetic instead of bit twiddling.
// Every finite float32 is exact in double, and scaling by powers of two is
// exact, so ties land exactly on .5 and std::nearbyint (round half to even
// under the default FE_TONEAREST mode) decides them the way the hardware
// would. This shares no code with the production converters.
double round_to_format(double d, int mant_bits, int min_exp, int max_exp) {
  if (std::isnan(d)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(d) || d == 0.0) return d;
  const double mag = std::fabs(d);
  int exp2;
  std::frexp(mag, &exp2);      // mag = f * 2^exp2, f in [0.5, 1)
  int e = exp2 - 1;            // unbiased exponent of mag
  double q, step;
  if (e < min_exp) {
    step = std::ldexp(1.0, min_exp - mant_bits);  // subnormal ulp
    q = std::nearbyint(mag / step);
  } else {
    step = std::ldexp(1.0, e - mant_bits);
    q = std::nearbyint(mag / step);
    if (q >= std::ldexp(1.0, mant_bits + 1)) {    // rounded up to next binade
      ++e;
      step = std::ldexp(1.0, e - mant_bits);
      q = std::ldexp(1.0, mant_bits);
    }
    if (e > max_exp || q * step > std::ldexp(2.0 - std::ldexp(1.0, -mant_bits), max_exp)) {
      return std::copysign(std::numeric_limits<double>::infinity(), d);
    }
  }
  return std::copysign(q * step, d);
}

float ref_fp16_round(float x) {
  return static_cast<float>(round_to_format(static_cast<double>(x), 10, -14, 15));
}

float ref_bf16_round(float x) {
  return static_cast<float>(round_to_format(static_cast<double>(x), 7, -126, 127));
}

bool bits_equal(float a, float b) {
  return std::bit_cast<std::uint32_t>(a) == std::bit_cast<std::uint32_t>(b);
}

}  // namespace

TEST_CASE("fp16 narrowing matches the double-arithmetic reference") {
  REQUIRE(std::fegetround() == FE_TONEAREST);

  // Hand-picked boundary values first.
  REQUIRE(num::fp16_from_f32(65504.0f) == 0x7BFF);          // max finite
  REQUIRE(num::f32_from_fp16(0x7BFF) == 65504.0f);
  REQUIRE(num::fp16_from_f32(65519.996f) == 0x7BFF);        // just under the tie
  REQUIRE(num::fp16_from_f32(65520.0f) == 0x7C00);          // tie rounds to infinity
  REQUIRE(num::fp16_from_f32(-65520.0f) == 0xFC00);
  REQUIRE(num::fp16_from_f32(100000.0f) == 0x7C00);
  REQUIRE(num::fp16_from_f32(0.0f) == 0x0000);
  REQUIRE(num::fp16_from_f32(-0.0f) == 0x8000);
  REQUIRE(num::fp16_from_f32(std::ldexp(1.0f, -24)) == 0x0001);   // min subnormal
  REQUIRE(num::fp16_from_f32(std::ldexp(1.0f, -25)) == 0x0000);   // half of it: tie to even
  REQUIRE(num::fp16_from_f32(std::ldexp(1.0f, -14)) == 0x0400);   // min normal
  REQUIRE(num::fp16_from_f32(std::numeric_limits<float>::quiet_NaN()) == num::kFp16QuietNan);
  REQUIRE(num::fp16_from_f32(std::numeric_limits<float>::infinity()) == 0x7C00);

  Rng rng(0xF16F16u);
  int checked = 0;
  for (int i = 0; i < 2'000'000; ++i) {
    const std::uint32_t bits = rng.next_u32();
    const float x = std::bit_cast<float>(bits);
    const float got = num::f32_from_fp16(num::fp16_from_f32(x));
    if (std::isnan(x)) {
      REQUIRE(num::fp16_from_f32(x) == num::kFp16QuietNan);
      continue;
    }
    const float want = ref_fp16_round(x);
    if (!bits_equal(got, want)) {
      CAPTURE(bits, x, got, want);
      REQUIRE(bits_equal(got, want));
    }
    ++checked;
  }
  REQUIRE(checked > 1'000'000);
}

TEST_CASE("bf16 narrowing matches the double-arithmetic reference") {
  REQUIRE(num::bf16_from_f32(1.0f) == 0x3F80);
  REQUIRE(num::f32_from_bf16(0x3F80) == 1.0f);
  // 1 + 2^-8 sits exactly between 1.0 and the next bf16; even mantissa wins.
  REQUIRE(num::bf16_from_f32(1.0f + 0x1.0p-8f) == 0x3F80);
  // 1 + 3*2^-8 is the next tie up; it rounds to the even neighbor above.
  REQUIRE(num::bf16_from_f32(1.0f + 3 * 0x1.0p-8f) == 0x3F82);
  REQUIRE(num::bf16_from_f32(std::numeric_limits<float>::max()) == 0x7F80);  // rounds to inf
  REQUIRE(num::bf16_from_f32(std::numeric_limits<float>::quiet_NaN()) == num::kBf16QuietNan);
  REQUIRE(num::bf16_from_f32(-0.0f) == 0x8000);

  Rng rng(0xBF16u);
  for (int i = 0; i < 2'000'000; ++i) {
    const std::uint32_t bits = rng.next_u32();
    const float x = std::bit_cast<float>(bits);
    if (std::isnan(x)) {
      REQUIRE(num::bf16_from_f32(x) == num::kBf16QuietNan);
      continue;
    }
    const float got = num::f32_from_bf16(num::bf16_from_f32(x));
    const float want = ref_bf16_round(x);
    if (!bits_equal(got, want)) {
      CAPTURE(bits, x, got, want);
      REQUIRE(bits_equal(got, want));
    }
  }
}

TEST_CASE("all 65536 fp16 bit patterns survive widen then narrow") {
  for (std::uint32_t h = 0; h <= 0xFFFFu; ++h) {
    const std::uint16_t in = static_cast<std::uint16_t>(h);
    const float wide = num::f32_from_fp16(in);
    const std::uint16_t back = num::fp16_from_f32(wide);
    const bool is_nan = ((in >> 10) & 0x1F) == 0x1F && (in & 0x3FF) != 0;
    if (is_nan) {
      REQUIRE(back == num::kFp16QuietNan);
    } else {
      if (back != in) {
        CAPTURE(in, wide, back);
      }
      REQUIRE(back == in);
      // The widened value must also be numerically exact.
      if (!std::isinf(wide)) {
        const std::uint32_t e = (in >> 10) & 0x1F;
        const std::uint32_t m = in & 0x3FF;
        const double exact = (e == 0) ? std::ldexp(static_cast<double>(m), -24)
                                      : std::ldexp(1.0 + m / 1024.0, static_cast<int>(e) - 15);
        REQUIRE(static_cast<double>(std::fabs(wide)) == exact);
      }
    }
  }
}

TEST_CASE("all 65536 bf16 bit patterns survive widen then narrow") {
  for (std::uint32_t h = 0; h <= 0xFFFFu; ++h) {
    const std::uint16_t in = static_cast<std::uint16_t>(h);
    const float wide = num::f32_from_bf16(in);
    const std::uint16_t back = num::bf16_from_f32(wide);
    const bool is_nan = ((in >> 7) & 0xFF) == 0xFF && (in & 0x7F) != 0;
    if (is_nan) {
      REQUIRE(back == num::kBf16QuietNan);
    } else {
      REQUIRE(back == in);
    }
  }
}

TEST_CASE("round-trip error bounds hold across the normal ranges") {
  Rng rng(77u);
  for (int i = 0; i < 200'000; ++i) {
    // Log-uniform magnitudes so small and large binades get equal coverage.
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;

    // bf16: relative error at most 2^-8 up to the bf16 max finite (beyond it
    // narrowing overflows to infinity by design).
    {
      const double e = rng.uniform(-126.0, 128.0);
      double mag = std::exp2(e);
      if (mag > 0x1.FCp127) mag = 0x1.FCp127;
      const float x = static_cast<float>(sign * mag);
      const float rt = num::quantize(x, Precision::BF16);
      REQUIRE(std::fabs(rt - x) <= std::ldexp(std::fabs(static_cast<double>(x)), -8));
    }
    // fp16: relative error at most 2^-11 on normals, absolute 2^-25 below.
    {
      const double e = rng.uniform(-14.0, 16.0);
      double mag = std::exp2(e);
      if (mag > 65504.0) mag = 65504.0;
      const float x = static_cast<float>(sign * mag);
      const float rt = num::quantize(x, Precision::FP16);
      REQUIRE(std::fabs(rt - x) <= std::ldexp(std::fabs(static_cast<double>(x)), -11));
    }
    {
      const float x = static_cast<float>(sign * std::exp2(rng.uniform(-25.0, -14.0)));
      const float rt = num::quantize(x, Precision::FP16);
      REQUIRE(std::fabs(static_cast<double>(rt) - static_cast<double>(x)) <= std::ldexp(1.0, -25));
    }
  }
}

TEST_CASE("gemm narrows operands and accumulates in fp32") {
  Rng rng(1234u);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = 1 + static_cast<int>(rng.uniform_int(6));
    const int k = 1 + static_cast<int>(rng.uniform_int(6));
    const int n = 1 + static_cast<int>(rng.uniform_int(6));
    Matrix a(m, k), b(k, n);
    for (float& v : a.data) v = static_cast<float>(rng.uniform(-3.0, 3.0));
    for (float& v : b.data) v = static_cast<float>(rng.uniform(-3.0, 3.0));

    // FP32 must be the plain product, bit for bit (no narrowing applied).
    const Matrix c32 = num::gemm(a, b, Precision::FP32);
    const Matrix plain = hetpart::matmul(a, b);
    REQUIRE(c32.data == plain.data);

    // 16-bit paths equal an independently written i-j-k loop over operands
    // narrowed by the reference converter, accumulated in float.
    for (Precision p : {Precision::FP16, Precision::BF16}) {
      const Matrix c = num::gemm(a, b, p);
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
          float acc = 0.0f;
          for (int kk = 0; kk < k; ++kk) {
            const float qa = p == Precision::FP16 ? ref_fp16_round(a(i, kk)) : ref_bf16_round(a(i, kk));
            const float qb = p == Precision::FP16 ? ref_fp16_round(b(kk, j)) : ref_bf16_round(b(kk, j));
            acc += qa * qb;
          }
          REQUIRE(bits_equal(c(i, j), acc));
        }
      }
    }
  }

  Matrix bad_a(2, 3), bad_b(4, 2);
  REQUIRE_THROWS_AS(num::gemm(bad_a, bad_b, Precision::FP32), hetpart::DimensionError);
}

TEST_CASE("overflowed fp16 operands poison the product") {
  Matrix a(1, 2), b(2, 1);
  a(0, 0) = 1e6f;  // far beyond fp16 range: narrows to +inf
  a(0, 1) = 0.0f;
  b(0, 0) = 0.0f;  // inf * 0 -> NaN must surface, not be skipped
  b(1, 0) = 1.0f;
  const Matrix c = num::gemm(a, b, Precision::FP16);
  REQUIRE(std::isnan(c(0, 0)));
  // The same product in bf16 keeps the large magnitude finite.
  const Matrix cb = num::gemm(a, b, Precision::BF16);
  REQUIRE(std::isfinite(cb(0, 0)));
}

TEST_CASE("loss scaler backoff and growth") {
  num::LossScaler s;
  REQUIRE(s.scale == 65536.0);

  s.update(true);
  REQUIRE(s.scale == 32768.0);
  REQUIRE(s.good_steps == 0);

  for (int i = 0; i < 199; ++i) s.update(false);
  REQUIRE(s.scale == 32768.0);  // growth needs the full window
  s.update(false);
  REQUIRE(s.scale == 65536.0);
  REQUIRE(s.good_steps == 0);

  // An overflow in the middle of a window restarts the count.
  for (int i = 0; i < 150; ++i) s.update(false);
  s.update(true);
  REQUIRE(s.scale == 32768.0);
  for (int i = 0; i < 199; ++i) s.update(false);
  REQUIRE(s.scale == 32768.0);
}

TEST_CASE("loss scaler stays a power of two within bounds") {
  num::LossScaler s;
  Rng rng(99u);
  for (int i = 0; i < 50'000; ++i) {
    s.update(rng.uniform() < 0.02);
    REQUIRE(s.scale >= s.min_scale);
    REQUIRE(s.scale <= s.max_scale);
    int exp2;
    const double frac = std::frexp(s.scale, &exp2);
    REQUIRE(frac == 0.5);  // exactly a power of two
  }
  // Saturation at the floor: repeated overflow cannot push below min_scale.
  for (int i = 0; i < 100; ++i) s.update(true);
  REQUIRE(s.scale == s.min_scale);
}
