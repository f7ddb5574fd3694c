// Copyright 2026 hetpart contributors
// SPDX-License-Identifier: Apache-2.0

#ifndef HETPART_MLP_HPP_
#define HETPART_MLP_HPP_

// Small MLP with hand-rolled forward/backward and Adam, in plain float32.
// The per-entry helpers (dense_forward, relu_backward, ...) are the single
// implementation of each op: the fp32 reference path calls them on raw
// tensors, the mixed-precision engine calls the very same functions on
// narrowed copies, so the two paths are bitwise identical whenever no
// narrowing happens.

#include <cmath>
#include <cstdint>
#include <vector>

#include "hetpart/graph.hpp"
#include "hetpart/matrix.hpp"
#include "hetpart/rng.hpp"

namespace hetpart::train {

using graph::LayerKind;
using graph::LayerSpec;

struct DenseLayer {
  Matrix w;               // in x out
  std::vector<float> b;   // out
};

struct Mlp {
  std::vector<LayerSpec> spec;
  std::vector<DenseLayer> dense;   // one per dense entry, in order
  std::vector<int> dense_index;    // per entry: index into `dense`, -1 otherwise

  // He-uniform init: w ~ U(-sqrt(6/fan_in), +sqrt(6/fan_in)), zero biases.
  // Weights are drawn row-major per layer so the stream of RNG draws is a
  // fixed function of the layer list.
  static Mlp init_he_uniform(const std::vector<LayerSpec>& spec, Rng& rng) {
    graph::validate_network(spec);
    Mlp net;
    net.spec = spec;
    net.dense_index.assign(spec.size(), -1);
    for (std::size_t e = 0; e < spec.size(); ++e) {
      if (spec[e].kind != LayerKind::Dense) continue;
      DenseLayer l;
      l.w = Matrix(spec[e].in_dim, spec[e].out_dim);
      l.b.assign(static_cast<std::size_t>(spec[e].out_dim), 0.0f);
      const double limit = std::sqrt(6.0 / spec[e].in_dim);
      for (float& v : l.w.data) v = static_cast<float>(rng.uniform(-limit, limit));
      net.dense_index[e] = static_cast<int>(net.dense.size());
      net.dense.push_back(std::move(l));
    }
    return net;
  }

  int output_dim() const { return graph::network_output_dim(spec); }
};

// ---------------------------------------------------------------------------
// Per-entry ops

inline Matrix dense_forward(const Matrix& x, const DenseLayer& l) {
  Matrix out = matmul(x, l.w);
  for (int i = 0; i < out.rows; ++i) {
    for (int j = 0; j < out.cols; ++j) out(i, j) += l.b[static_cast<std::size_t>(j)];
  }
  return out;
}

inline Matrix relu_forward(const Matrix& x) {
  Matrix out = x;
  for (float& v : out.data) v = v > 0.0f ? v : 0.0f;
  return out;
}

inline Matrix tanh_forward(const Matrix& x) {
  Matrix out = x;
  for (float& v : out.data) v = std::tanh(v);
  return out;
}

// grad through relu given the pre-activation values.
inline Matrix relu_backward(const Matrix& grad, const Matrix& pre) {
  Matrix out = grad;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (!(pre.data[i] > 0.0f)) out.data[i] = 0.0f;
  }
  return out;
}

// grad through tanh given the post-activation values.
inline Matrix tanh_backward(const Matrix& grad, const Matrix& post) {
  Matrix out = grad;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] *= 1.0f - post.data[i] * post.data[i];
  }
  return out;
}

// Weight, bias and (optionally) input gradients of a dense layer.
inline void dense_backward(const Matrix& grad, const Matrix& input, const DenseLayer& l,
                           bool want_dx, Matrix* dw, std::vector<float>* db, Matrix* dx) {
  *dw = matmul(transposed(input), grad);
  db->assign(static_cast<std::size_t>(grad.cols), 0.0f);
  for (int i = 0; i < grad.rows; ++i) {
    for (int j = 0; j < grad.cols; ++j) (*db)[static_cast<std::size_t>(j)] += grad(i, j);
  }
  if (want_dx) *dx = matmul(grad, transposed(l.w));
}

// ---------------------------------------------------------------------------
// Whole-network reference path

struct ForwardCache {
  std::vector<Matrix> out;  // per entry: the entry's output
};

inline Matrix mlp_forward(const Mlp& net, const Matrix& x, ForwardCache* cache = nullptr) {
  if (cache) cache->out.assign(net.spec.size(), Matrix());
  Matrix cur = x;
  for (std::size_t e = 0; e < net.spec.size(); ++e) {
    switch (net.spec[e].kind) {
      case LayerKind::Dense:
        cur = dense_forward(cur, net.dense[static_cast<std::size_t>(net.dense_index[e])]);
        break;
      case LayerKind::ReLU:
        cur = relu_forward(cur);
        break;
      case LayerKind::Tanh:
        cur = tanh_forward(cur);
        break;
    }
    if (cache) cache->out[e] = cur;
  }
  return cur;
}

struct Gradients {
  std::vector<Matrix> dw;                 // per dense layer
  std::vector<std::vector<float>> db;

  bool all_finite() const {
    for (const auto& m : dw) {
      for (float v : m.data) {
        if (!std::isfinite(v)) return false;
      }
    }
    for (const auto& v : db) {
      for (float x : v) {
        if (!std::isfinite(x)) return false;
      }
    }
    return true;
  }

  void scale_all(float s) {
    for (auto& m : dw) {
      for (float& v : m.data) v *= s;
    }
    for (auto& v : db) {
      for (float& x : v) x *= s;
    }
  }
};

// Backward through the whole net from dL/d(output). The input gradient of
// the first entry is never needed and is skipped.
inline Gradients mlp_backward(const Mlp& net, const Matrix& x, const ForwardCache& cache,
                              const Matrix& grad_out) {
  Gradients g;
  g.dw.resize(net.dense.size());
  g.db.resize(net.dense.size());
  Matrix grad = grad_out;
  for (int e = static_cast<int>(net.spec.size()) - 1; e >= 0; --e) {
    const Matrix& input = e == 0 ? x : cache.out[static_cast<std::size_t>(e) - 1];
    switch (net.spec[static_cast<std::size_t>(e)].kind) {
      case LayerKind::Dense: {
        const int d = net.dense_index[static_cast<std::size_t>(e)];
        Matrix dx;
        dense_backward(grad, input, net.dense[static_cast<std::size_t>(d)], e > 0,
                       &g.dw[static_cast<std::size_t>(d)], &g.db[static_cast<std::size_t>(d)],
                       &dx);
        if (e > 0) grad = std::move(dx);
        break;
      }
      case LayerKind::ReLU:
        grad = relu_backward(grad, input);
        break;
      case LayerKind::Tanh:
        grad = tanh_backward(grad, cache.out[static_cast<std::size_t>(e)]);
        break;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  std::vector<Matrix> mw, vw;
  std::vector<std::vector<float>> mb, vb;
  std::int64_t t = 0;
  double beta1_pow = 1.0, beta2_pow = 1.0;  // running beta^t, no pow() calls

  static AdamState for_net(const Mlp& net) {
    AdamState s;
    for (const auto& l : net.dense) {
      s.mw.emplace_back(l.w.rows, l.w.cols);
      s.vw.emplace_back(l.w.rows, l.w.cols);
      s.mb.emplace_back(l.b.size(), 0.0f);
      s.vb.emplace_back(l.b.size(), 0.0f);
    }
    return s;
  }
};

inline void adam_step(Mlp& net, const Gradients& g, AdamState& s, float lr,
                      float beta1 = 0.9f, float beta2 = 0.999f, float eps = 1e-8f) {
  ++s.t;
  s.beta1_pow *= beta1;
  s.beta2_pow *= beta2;
  const float c1 = static_cast<float>(1.0 / (1.0 - s.beta1_pow));
  const float c2 = static_cast<float>(1.0 / (1.0 - s.beta2_pow));
  for (std::size_t d = 0; d < net.dense.size(); ++d) {
    auto& w = net.dense[d].w.data;
    const auto& dw = g.dw[d].data;
    auto& mw = s.mw[d].data;
    auto& vw = s.vw[d].data;
    for (std::size_t i = 0; i < w.size(); ++i) {
      mw[i] = beta1 * mw[i] + (1.0f - beta1) * dw[i];
      vw[i] = beta2 * vw[i] + (1.0f - beta2) * dw[i] * dw[i];
      w[i] -= lr * (mw[i] * c1) / (std::sqrt(vw[i] * c2) + eps);
    }
    auto& b = net.dense[d].b;
    const auto& db = g.db[d];
    auto& mb = s.mb[d];
    auto& vb = s.vb[d];
    for (std::size_t i = 0; i < b.size(); ++i) {
      mb[i] = beta1 * mb[i] + (1.0f - beta1) * db[i];
      vb[i] = beta2 * vb[i] + (1.0f - beta2) * db[i] * db[i];
      b[i] -= lr * (mb[i] * c1) / (std::sqrt(vb[i] * c2) + eps);
    }
  }
}

}  // namespace hetpart::train

#endif  // HETPART_MLP_HPP_
