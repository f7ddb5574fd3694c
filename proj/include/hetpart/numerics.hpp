// Copyright 2026 hetpart contributors
// SPDX-License-Identifier: Apache-2.0

#ifndef HETPART_NUMERICS_HPP_
#define HETPART_NUMERICS_HPP_

// Software emulation of the two 16-bit formats the accelerator fabric
// computes in:
//
//   bf16  1 sign, 8 exponent, 7 mantissa bits.  Same exponent range as
//         float32 (normal exponents -126..127), so narrowing only drops
//         mantissa bits and never overflows a finite float32.
//   fp16  1 sign, 5 exponent, 10 mantissa bits.  Normal exponents -14..15,
//         max finite 65504; values are flushed through a subnormal range
//         down to 2^-24 before underflowing to zero.
//
// Narrowing rounds to nearest, ties to even, like the hardware. NaNs
// canonicalize to a single quiet pattern per format. All arithmetic on
// narrowed values happens after widening back to float32, which is exact.

#include <bit>
#include <cstdint>

#include "hetpart/common.hpp"
#include "hetpart/matrix.hpp"

namespace hetpart::numerics {

inline constexpr std::uint16_t kBf16QuietNan = 0x7FC0;
inline constexpr std::uint16_t kFp16QuietNan = 0x7E00;

// ---------------------------------------------------------------------------
// bf16

inline std::uint16_t bf16_from_f32(float f) {
  const std::uint32_t x = std::bit_cast<std::uint32_t>(f);
  if ((x & 0x7FFFFFFFu) > 0x7F800000u) {
    return kBf16QuietNan;
  }
  // Round to nearest even by adding half an ulp of the 16-bit result plus
  // the round-to-even bit; the carry ripples into the exponent naturally
  // (max finite + half ulp becomes infinity, as required).
  const std::uint32_t rounded = x + 0x7FFFu + ((x >> 16) & 1u);
  return static_cast<std::uint16_t>(rounded >> 16);
}

inline float f32_from_bf16(std::uint16_t b) {
  return std::bit_cast<float>(static_cast<std::uint32_t>(b) << 16);
}

// ---------------------------------------------------------------------------
// fp16

inline std::uint16_t fp16_from_f32(float f) {
  const std::uint32_t x = std::bit_cast<std::uint32_t>(f);
  const std::uint16_t sign = static_cast<std::uint16_t>((x >> 16) & 0x8000u);
  const std::uint32_t mag = x & 0x7FFFFFFFu;

  if (mag >= 0x7F800000u) {
    // Infinity keeps its sign; every NaN collapses to the quiet pattern.
    return mag == 0x7F800000u ? static_cast<std::uint16_t>(sign | 0x7C00u)
                              : kFp16QuietNan;
  }

  const int e = static_cast<int>(mag >> 23) - 127 + 15;  // biased fp16 exponent
  const std::uint32_t mant = mag & 0x7FFFFFu;

  if (e >= 31) {
    // Above the normal range. 65520 and up round away to infinity.
    return static_cast<std::uint16_t>(sign | 0x7C00u);
  }

  if (e <= 0) {
    // Subnormal target (or underflow). The result is round(M * 2^(e-14))
    // where M is the 24-bit significand including the hidden bit.
    if (e < -10) {
      return sign;  // below half the smallest subnormal: rounds to zero
    }
    const std::uint32_t m24 = mant | 0x800000u;
    const int shift = 14 - e;  // 14..24
    std::uint32_t half = 1u << (shift - 1);
    std::uint32_t rem = m24 & ((1u << shift) - 1u);
    std::uint32_t q = m24 >> shift;
    if (rem > half || (rem == half && (q & 1u))) ++q;
    // q can carry to 0x400, which is exactly the smallest normal encoding.
    return static_cast<std::uint16_t>(sign | q);
  }

  // Normal target: keep the top 10 mantissa bits, round on the lower 13.
  std::uint16_t out = static_cast<std::uint16_t>((e << 10) | (mant >> 13));
  const std::uint32_t rem = mant & 0x1FFFu;
  if (rem > 0x1000u || (rem == 0x1000u && (out & 1u))) {
    ++out;  // may carry into the exponent; 0x7BFF + 1 = infinity, correct
  }
  return static_cast<std::uint16_t>(sign | out);
}

inline float f32_from_fp16(std::uint16_t h) {
  const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000u) << 16;
  const std::uint32_t e = (h >> 10) & 0x1Fu;
  std::uint32_t m = h & 0x3FFu;

  if (e == 31) {
    return std::bit_cast<float>(sign | 0x7F800000u | (m << 13));
  }
  if (e == 0) {
    if (m == 0) {
      return std::bit_cast<float>(sign);  // signed zero
    }
    // Normalize the subnormal: shift the leading 1 up to the hidden position.
    int exp = -14;
    while (!(m & 0x400u)) {
      m <<= 1;
      --exp;
    }
    m &= 0x3FFu;
    return std::bit_cast<float>(sign | (static_cast<std::uint32_t>(exp + 127) << 23) | (m << 13));
  }
  return std::bit_cast<float>(sign | ((e - 15 + 127) << 23) | (m << 13));
}

// ---------------------------------------------------------------------------
// Round trips

// widen(narrow(x)) at the given precision; FP32 is the identity.
inline float quantize(float x, Precision p) {
  switch (p) {
    case Precision::FP32: return x;
    case Precision::FP16: return f32_from_fp16(fp16_from_f32(x));
    case Precision::BF16: return f32_from_bf16(bf16_from_f32(x));
  }
  return x;
}

inline void quantize_in_place(Matrix& m, Precision p) {
  if (p == Precision::FP32) return;
  for (float& v : m.data) v = quantize(v, p);
}

inline Matrix quantized(const Matrix& m, Precision p) {
  Matrix out = m;
  quantize_in_place(out, p);
  return out;
}

// Matrix product with operand narrowing. Both operands are pushed through
// the 16-bit format first (FP32 passes through untouched, bit for bit),
// then multiplied with 32-bit accumulation, matching fabric kernels that
// read 16-bit operands into 32-bit accumulators.
inline Matrix gemm(const Matrix& a, const Matrix& b, Precision p) {
  if (a.cols != b.rows) {
    throw DimensionError("gemm: inner dimensions differ (" + std::to_string(a.cols) +
                         " vs " + std::to_string(b.rows) + ")");
  }
  if (p == Precision::FP32) {
    return matmul(a, b);
  }
  return matmul(quantized(a, p), quantized(b, p));
}

// ---------------------------------------------------------------------------
// Dynamic loss scaling

// Power-of-two loss scale with multiplicative backoff on overflow and
// periodic growth after a run of clean steps. fp16 gradients need this;
// bf16 runs leave the scale at 1.
struct LossScaler {
  double scale = 65536.0;         // 2^16
  double growth_factor = 2.0;
  double backoff_factor = 0.5;
  int growth_interval = 200;      // clean steps between growth attempts
  double min_scale = 1.0;
  double max_scale = 0x1.0p60;
  int good_steps = 0;

  // Call once per optimizer step with whether any gradient was non-finite.
  // Overflow halves the scale (never below min_scale) and restarts the
  // clean-step count; growth_interval clean steps double it (capped).
  void update(bool found_nonfinite) {
    if (found_nonfinite) {
      scale = scale * backoff_factor;
      if (scale < min_scale) scale = min_scale;
      good_steps = 0;
    } else {
      ++good_steps;
      if (good_steps >= growth_interval) {
        scale = scale * growth_factor;
        if (scale > max_scale) scale = max_scale;
        good_steps = 0;
      }
    }
  }
};

}  // namespace hetpart::numerics

#endif  // HETPART_NUMERICS_HPP_
