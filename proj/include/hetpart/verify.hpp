// Copyright 2026 hetpart contributors
// SPDX-License-Identifier: Apache-2.0

#ifndef HETPART_VERIFY_HPP_
#define HETPART_VERIFY_HPP_

// Self-check suites runnable from the command line. Each suite returns a
// count of checks performed and the failures it found (capped, with enough
// context to reproduce). They are the same checks the test suite pins,
// packaged so a deployment can re-run them against the shipped binary.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hetpart/mlp.hpp"
#include "hetpart/numerics.hpp"
#include "hetpart/partition.hpp"
#include "hetpart/rng.hpp"
#include "hetpart/testing.hpp"

namespace hetpart::verify {

struct SuiteResult {
  std::string suite;
  std::int64_t checks = 0;
  std::vector<std::string> failures;  // capped at kMaxFailures

  bool passed() const { return failures.empty(); }
};

inline constexpr std::size_t kMaxFailures = 20;

namespace detail {

inline void fail(SuiteResult& r, const std::string& msg) {
  if (r.failures.size() < kMaxFailures) r.failures.push_back(msg);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// formats: every 16-bit pattern must survive widen->narrow, the overflow
// and NaN conventions must hold, and round-trip error must stay within half
// an ulp across sampled magnitudes.

inline SuiteResult run_formats_suite() {
  namespace num = hetpart::numerics;
  SuiteResult r;
  r.suite = "formats";

  for (std::uint32_t h = 0; h <= 0xFFFFu; ++h) {
    const auto in = static_cast<std::uint16_t>(h);
    ++r.checks;
    {
      const float wide = num::f32_from_fp16(in);
      const std::uint16_t back = num::fp16_from_f32(wide);
      const bool is_nan = ((in >> 10) & 0x1F) == 0x1F && (in & 0x3FF) != 0;
      const std::uint16_t want = is_nan ? num::kFp16QuietNan : in;
      if (back != want) {
        detail::fail(r, "fp16 round trip broke pattern 0x" + std::to_string(in));
      }
    }
    ++r.checks;
    {
      const float wide = num::f32_from_bf16(in);
      const std::uint16_t back = num::bf16_from_f32(wide);
      const bool is_nan = ((in >> 7) & 0xFF) == 0xFF && (in & 0x7F) != 0;
      const std::uint16_t want = is_nan ? num::kBf16QuietNan : in;
      if (back != want) {
        detail::fail(r, "bf16 round trip broke pattern 0x" + std::to_string(in));
      }
    }
  }

  // Overflow boundary and specials.
  const auto expect = [&r](bool ok, const std::string& what) {
    ++r.checks;
    if (!ok) detail::fail(r, what);
  };
  expect(num::fp16_from_f32(65504.0f) == 0x7BFF, "fp16 max finite must stay finite");
  expect(num::fp16_from_f32(65520.0f) == 0x7C00, "fp16 tie at 65520 must round to inf");
  expect(num::fp16_from_f32(-65520.0f) == 0xFC00, "fp16 negative overflow sign");
  expect(num::bf16_from_f32(std::numeric_limits<float>::quiet_NaN()) == num::kBf16QuietNan,
         "bf16 NaN canonicalization");
  expect(num::fp16_from_f32(std::numeric_limits<float>::quiet_NaN()) == num::kFp16QuietNan,
         "fp16 NaN canonicalization");

  // Sampled round-trip error bounds.
  Rng rng(0xF0F0u);
  for (int i = 0; i < 100000; ++i) {
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    {
      double mag = std::exp2(rng.uniform(-126.0, 128.0));
      if (mag > 0x1.FCp127) mag = 0x1.FCp127;
      const float x = static_cast<float>(sign * mag);
      const float rt = num::quantize(x, Precision::BF16);
      ++r.checks;
      if (std::fabs(rt - x) > std::ldexp(std::fabs(static_cast<double>(x)), -8)) {
        detail::fail(r, "bf16 round-trip error bound violated at " + std::to_string(x));
      }
    }
    {
      double mag = std::exp2(rng.uniform(-14.0, 16.0));
      if (mag > 65504.0) mag = 65504.0;
      const float x = static_cast<float>(sign * mag);
      const float rt = num::quantize(x, Precision::FP16);
      ++r.checks;
      if (std::fabs(rt - x) > std::ldexp(std::fabs(static_cast<double>(x)), -11)) {
        detail::fail(r, "fp16 round-trip error bound violated at " + std::to_string(x));
      }
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// small-ilp: the exact solver against exhaustive enumeration on random
// instances, including infeasible and capacity-bound ones.

inline SuiteResult run_small_ilp_suite(std::uint32_t seed = 20260815u, int instances = 200,
                                       int max_mm_nodes = 12) {
  SuiteResult r;
  r.suite = "small-ilp";
  Rng rng(seed);
  for (int i = 0; i < instances; ++i) {
    auto inst = testing::random_ilp_instance(rng, max_mm_nodes, i % 2 == 1);
    const std::string tag = "instance " + std::to_string(i) + " (seed " + std::to_string(seed) + ")";

    bool solver_infeasible = false, oracle_infeasible = false;
    partition::SolveResult sr;
    std::pair<partition::Assignment, double> oracle;
    try {
      sr = partition::solve_exact(partition::build_ilp(inst.g, inst.table));
    } catch (const InfeasibleError&) {
      solver_infeasible = true;
    }
    try {
      oracle = partition::brute_force_optimum(inst.g, inst.table);
    } catch (const InfeasibleError&) {
      oracle_infeasible = true;
    }
    ++r.checks;
    if (solver_infeasible != oracle_infeasible) {
      detail::fail(r, tag + ": feasibility disagreement");
      continue;
    }
    if (solver_infeasible) continue;
    ++r.checks;
    if (sr.makespan_s != oracle.second) {
      detail::fail(r, tag + ": value mismatch " + std::to_string(sr.makespan_s) + " vs " +
                          std::to_string(oracle.second));
    }
    ++r.checks;
    if (sr.assignment.device_of != oracle.first.device_of) {
      detail::fail(r, tag + ": tie-break mismatch");
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// gradients: backprop against central differences of a double-precision
// forward replica on random small networks.

namespace detail {

inline double forward_loss_double(const train::Mlp& net, const Matrix& x,
                                  const std::vector<int>& act, const std::vector<double>& y) {
  std::vector<std::vector<double>> cur(static_cast<std::size_t>(x.rows));
  for (int i = 0; i < x.rows; ++i) {
    for (int j = 0; j < x.cols; ++j) cur[static_cast<std::size_t>(i)].push_back(x(i, j));
  }
  for (std::size_t e = 0; e < net.spec.size(); ++e) {
    const auto& l = net.spec[e];
    if (l.kind == train::LayerKind::Dense) {
      const auto& dl = net.dense[static_cast<std::size_t>(net.dense_index[e])];
      for (auto& row : cur) {
        std::vector<double> nxt(static_cast<std::size_t>(l.out_dim));
        for (int j = 0; j < l.out_dim; ++j) {
          double acc = dl.b[static_cast<std::size_t>(j)];
          for (int k = 0; k < l.in_dim; ++k) {
            acc += row[static_cast<std::size_t>(k)] * dl.w(k, j);
          }
          nxt[static_cast<std::size_t>(j)] = acc;
        }
        row = nxt;
      }
    } else if (l.kind == train::LayerKind::ReLU) {
      for (auto& row : cur) {
        for (double& v : row) v = v > 0.0 ? v : 0.0;
      }
    } else {
      for (auto& row : cur) {
        for (double& v : row) v = std::tanh(v);
      }
    }
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < cur.size(); ++i) {
    const double resid = cur[i][static_cast<std::size_t>(act[i])] - y[i];
    loss += resid * resid;
  }
  return loss / static_cast<double>(cur.size());
}

}  // namespace detail

// Infinity-norm relative error between backprop and finite differences,
// h = 1e-3, threshold 1e-4, over `nets` random smooth networks.
inline SuiteResult run_gradients_suite(std::uint32_t seed = 2718u, int nets = 20,
                                       double tolerance = 1e-4) {
  SuiteResult r;
  r.suite = "gradients";
  Rng rng(seed);
  const double h = 1e-3;

  for (int trial = 0; trial < nets; ++trial) {
    const int in = 2 + static_cast<int>(rng.uniform_int(4));
    const int hid = 2 + static_cast<int>(rng.uniform_int(6));
    const int out = 2 + static_cast<int>(rng.uniform_int(3));
    const bool deep = rng.uniform() < 0.5;
    std::vector<train::LayerSpec> spec{{train::LayerKind::Dense, in, hid},
                                       {train::LayerKind::Tanh, 0, 0}};
    if (deep) {
      spec.push_back({train::LayerKind::Dense, hid, hid});
      spec.push_back({train::LayerKind::Tanh, 0, 0});
    }
    spec.push_back({train::LayerKind::Dense, hid, out});

    train::Mlp net = train::Mlp::init_he_uniform(spec, rng);
    const int bs = 2 + static_cast<int>(rng.uniform_int(3));
    Matrix x(bs, in);
    for (float& v : x.data) v = static_cast<float>(rng.uniform(-1.5, 1.5));
    std::vector<int> act;
    std::vector<double> y;
    for (int i = 0; i < bs; ++i) {
      act.push_back(static_cast<int>(rng.uniform_int(static_cast<std::uint32_t>(out))));
      y.push_back(rng.uniform(-1.0, 1.0));
    }

    train::ForwardCache cache;
    const Matrix q = train::mlp_forward(net, x, &cache);
    Matrix grad_out(bs, out);
    for (int i = 0; i < bs; ++i) {
      const double resid =
          q(i, act[static_cast<std::size_t>(i)]) - y[static_cast<std::size_t>(i)];
      grad_out(i, act[static_cast<std::size_t>(i)]) = static_cast<float>(2.0 * resid / bs);
    }
    const train::Gradients g = train::mlp_backward(net, x, cache, grad_out);

    double max_fd = 0.0, max_diff = 0.0;
    const auto probe = [&](float* param, double analytic) {
      const float saved = *param;
      *param = saved + static_cast<float>(h);
      const double up = detail::forward_loss_double(net, x, act, y);
      *param = saved - static_cast<float>(h);
      const double down = detail::forward_loss_double(net, x, act, y);
      *param = saved;
      const double fd = (up - down) / (2.0 * h);
      max_fd = std::max(max_fd, std::fabs(fd));
      max_diff = std::max(max_diff, std::fabs(fd - analytic));
    };
    for (std::size_t d = 0; d < net.dense.size(); ++d) {
      for (std::size_t i = 0; i < net.dense[d].w.data.size(); ++i) {
        probe(&net.dense[d].w.data[i], g.dw[d].data[i]);
      }
      for (std::size_t i = 0; i < net.dense[d].b.size(); ++i) {
        probe(&net.dense[d].b[i], g.db[d][i]);
      }
    }
    ++r.checks;
    const double rel = max_diff / std::max(max_fd, 1e-12);
    if (!(rel <= tolerance)) {
      detail::fail(r, "net " + std::to_string(trial) + ": relative gradient error " +
                          std::to_string(rel));
    }
  }
  return r;
}

}  // namespace hetpart::verify

#endif  // HETPART_VERIFY_HPP_
