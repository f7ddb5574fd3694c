// Copyright 2026 hetpart contributors
// SPDX-License-Identifier: Apache-2.0

#ifndef HETPART_RNG_HPP_
#define HETPART_RNG_HPP_

#include <cstdint>
#include <random>
#include <unordered_set>
#include <vector>

namespace hetpart {

// Deterministic random source. std::mt19937 output is specified bit for bit,
// but the std::*_distribution adapters are not, so we derive floats and
// bounded ints ourselves to keep runs reproducible across toolchains.
class Rng {
 public:
  explicit Rng(std::uint32_t seed) : gen_(seed) {}

  std::uint32_t next_u32() { return gen_(); }

  // Uniform in [0, 1).
  double uniform() { return next_u32() * 0x1.0p-32; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Multiply-high mapping; the bias of at most
  // n / 2^32 is irrelevant at the range sizes used here.
  std::uint32_t uniform_int(std::uint32_t n) {
    return static_cast<std::uint32_t>(
        (static_cast<std::uint64_t>(next_u32()) * n) >> 32);
  }

  // k distinct indices from [0, n), k <= n. Floyd's algorithm: O(k) draws,
  // no shuffle of the base range.
  std::vector<std::uint32_t> sample_without_replacement(std::uint32_t n,
                                                        std::uint32_t k) {
    std::vector<std::uint32_t> out;
    out.reserve(k);
    std::unordered_set<std::uint32_t> seen;
    for (std::uint32_t j = n - k; j < n; ++j) {
      std::uint32_t t = uniform_int(j + 1);
      if (seen.insert(t).second) {
        out.push_back(t);
      } else {
        seen.insert(j);
        out.push_back(j);
      }
    }
    return out;
  }

 private:
  std::mt19937 gen_;
};

}  // namespace hetpart

#endif  // HETPART_RNG_HPP_
