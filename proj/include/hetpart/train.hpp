// Copyright 2026 hetpart contributors
// SPDX-License-Identifier: Apache-2.0

#ifndef HETPART_TRAIN_HPP_
#define HETPART_TRAIN_HPP_

// Value-learner training on cart-pole with a device-aware mixed-precision
// execution engine.
//
// The engine executes the same per-entry ops as the fp32 reference path,
// but before each node's op it narrows that node's inputs to the format of
// the device the node is assigned to (fp16 on the fabric, bf16 on the AI
// engines, untouched on the host). Accumulation stays in fp32 and every
// node hands fp32 tensors downstream, which models 16-bit ingest with
// 32-bit accumulators. Weights live in an fp32 master copy; each node
// reads a narrowed snapshot, and a fabric node whose graph neighbors sit
// on the AI engines reads its snapshot through bf16 first (the interface
// format both sides can exchange).
//
// fp16 gradients pass through dynamic loss scaling: the TD residual is
// multiplied by the current scale before backprop when the loss node runs
// on the fabric, gradients are unscaled before Adam, any non-finite
// gradient skips the step (weights and optimizer state untouched) and
// halves the scale, and a window of clean steps doubles it again.

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <vector>

#include "hetpart/cartpole.hpp"
#include "hetpart/common.hpp"
#include "hetpart/errors.hpp"
#include "hetpart/graph.hpp"
#include "hetpart/mlp.hpp"
#include "hetpart/numerics.hpp"
#include "hetpart/partition.hpp"
#include "hetpart/rng.hpp"

namespace hetpart::train {

struct Transition {
  std::array<float, 4> s{};
  std::array<float, 4> s2{};
  int a = 0;
  float r = 0.0f;
  bool done = false;
};

// Fixed-capacity ring; oldest entries are overwritten first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}

  void push(const Transition& t) {
    if (data_.size() < capacity_) {
      data_.push_back(t);
    } else {
      data_[head_] = t;
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return data_.size(); }
  const Transition& operator[](std::size_t i) const { return data_[i]; }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Transition> data_;
};

struct DqnConfig {
  std::vector<LayerSpec> network{
      {LayerKind::Dense, 4, 64}, {LayerKind::ReLU, 0, 0},
      {LayerKind::Dense, 64, 64}, {LayerKind::ReLU, 0, 0},
      {LayerKind::Dense, 64, 2},
  };
  int batch_size = 32;
  double gamma = 0.99;
  double eps_start = 1.0;
  double eps_end = 0.05;
  int eps_decay_steps = 10000;
  int target_sync_period = 500;     // in optimizer steps
  double learning_rate = 1e-3;
  int episodes = 600;
  int max_steps_per_episode = 500;
  int replay_capacity = 50000;
  int warmup_steps = 1000;          // transitions before learning starts
  int train_period = 1;             // env steps between optimizer steps
  double grad_clip_norm = 0.0;      // global L2 clip on fp32 grads; 0 = off
  std::uint32_t seed = 1;

  double scale_init = 65536.0;
  double scale_growth = 2.0;
  double scale_backoff = 0.5;
  int scale_window = 200;
  double scale_min = 1.0;

  // Accepted for schema compatibility with profiling configs; the trainer
  // has no use for a quantization delay and ignores it.
  double quantization_delay_s = 0.0;

  int divergence_window = 100;      // consecutive non-finite losses allowed

  void validate() const {
    graph::validate_network(network);
    if (network.front().in_dim != CartPole::kStateDim) {
      throw ConfigError("network input width must be 4 (cart-pole state)");
    }
    if (graph::network_output_dim(network) != CartPole::kNumActions) {
      throw ConfigError("network output width must be 2 (cart-pole actions)");
    }
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must be in (0, 1)");
    if (eps_decay_steps < 1) throw ConfigError("eps_decay_steps must be >= 1");
    if (eps_start < eps_end) throw ConfigError("eps_start must be >= eps_end");
    if (eps_end < 0.0 || eps_start > 1.0) throw ConfigError("epsilon range must lie in [0, 1]");
    if (target_sync_period < 1) throw ConfigError("target_sync_period must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (episodes < 1) throw ConfigError("episodes must be >= 1");
    if (max_steps_per_episode < 1) throw ConfigError("max_steps_per_episode must be >= 1");
    if (replay_capacity < batch_size) throw ConfigError("replay_capacity must hold a batch");
    if (warmup_steps < batch_size) throw ConfigError("warmup_steps must cover a batch");
    if (train_period < 1) throw ConfigError("train_period must be >= 1");
    if (grad_clip_norm < 0.0) throw ConfigError("grad_clip_norm must be >= 0");
    if (scale_init < scale_min) throw ConfigError("scale_init must be >= scale_min");
    if (scale_growth <= 1.0) throw ConfigError("scale_growth must exceed 1");
    if (!(scale_backoff > 0.0 && scale_backoff < 1.0)) {
      throw ConfigError("scale_backoff must be in (0, 1)");
    }
    if (scale_window < 1) throw ConfigError("scale_window must be >= 1");
    if (quantization_delay_s < 0.0) throw ConfigError("quantization_delay must be >= 0");
    if (divergence_window < 1) throw ConfigError("divergence_window must be >= 1");
  }
};

// Linear anneal from eps_start to eps_end over eps_decay_steps env steps.
inline double epsilon_at(const DqnConfig& c, std::int64_t env_step) {
  const double frac = std::min(1.0, static_cast<double>(env_step) / c.eps_decay_steps);
  return c.eps_start + (c.eps_end - c.eps_start) * frac;
}

enum class EngineMode { PlainFp32, Mixed };

// ---------------------------------------------------------------------------
// Device-format plan for the engine

struct EnginePlan {
  // Per layer entry, the compute format of the three chains.
  std::vector<Precision> target_fwd, online_fwd, backward;
  // Per layer entry, the interchange format applied to fabric weight
  // snapshots (bf16 when the node borders the AI engines, fp32 otherwise).
  std::vector<Precision> target_iface, online_iface, backward_iface;
  Precision loss = Precision::FP32;
  bool scale_active = false;   // loss node on the fabric -> fp16 residual path
  // Overflow handling belongs to the 16-bit path: when nothing narrows,
  // non-finite gradients are applied as-is so the run visibly diverges like
  // the reference trainer rather than silently stalling.
  bool overflow_skip = false;

  static Precision device_format(Device d) {
    switch (d) {
      case Device::PS:  return Precision::FP32;
      case Device::PL:  return Precision::FP16;
      case Device::AIE: return Precision::BF16;
    }
    return Precision::FP32;
  }

  static EnginePlan from_assignment(const graph::ComputeGraph& g,
                                    const partition::Assignment& asg) {
    const graph::DqnLayout lay = graph::dqn_layout(g);
    const auto preds = g.predecessors();
    const auto succs = g.successors();
    const std::size_t entries = lay.online_forward.size();

    const auto fmt = [&](int node) { return device_format(asg.at(node)); };
    // A fabric node bordering the AI engines exchanges tensors in bf16, so
    // its weight snapshot passes through bf16 before fp16.
    const auto iface = [&](int node) {
      if (asg.at(node) != Device::PL) return Precision::FP32;
      for (int p : preds[static_cast<std::size_t>(node)]) {
        if (asg.at(p) == Device::AIE) return Precision::BF16;
      }
      for (int s : succs[static_cast<std::size_t>(node)]) {
        if (asg.at(s) == Device::AIE) return Precision::BF16;
      }
      return Precision::FP32;
    };

    EnginePlan plan;
    plan.target_fwd.resize(entries);
    plan.online_fwd.resize(entries);
    plan.backward.resize(entries);
    plan.target_iface.resize(entries, Precision::FP32);
    plan.online_iface.resize(entries, Precision::FP32);
    plan.backward_iface.resize(entries, Precision::FP32);
    for (std::size_t e = 0; e < entries; ++e) {
      plan.target_fwd[e] = fmt(lay.target_forward[e]);
      plan.online_fwd[e] = fmt(lay.online_forward[e]);
      plan.backward[e] = fmt(lay.backward[e]);
      plan.target_iface[e] = iface(lay.target_forward[e]);
      plan.online_iface[e] = iface(lay.online_forward[e]);
      plan.backward_iface[e] = iface(lay.backward[e]);
    }
    plan.loss = fmt(lay.loss);
    plan.scale_active = asg.at(lay.loss) == Device::PL;
    const auto any16 = [](const std::vector<Precision>& v) {
      return std::any_of(v.begin(), v.end(),
                         [](Precision p) { return p != Precision::FP32; });
    };
    plan.overflow_skip = any16(plan.target_fwd) || any16(plan.online_fwd) ||
                         any16(plan.backward) || plan.loss != Precision::FP32;
    return plan;
  }

  // Everything on the host: formats are all fp32, no scaling. The engine
  // then performs exactly the reference arithmetic.
  static EnginePlan all_fp32(const std::vector<LayerSpec>& spec) {
    EnginePlan plan;
    plan.target_fwd.assign(spec.size(), Precision::FP32);
    plan.online_fwd.assign(spec.size(), Precision::FP32);
    plan.backward.assign(spec.size(), Precision::FP32);
    plan.target_iface.assign(spec.size(), Precision::FP32);
    plan.online_iface.assign(spec.size(), Precision::FP32);
    plan.backward_iface.assign(spec.size(), Precision::FP32);
    plan.loss = Precision::FP32;
    plan.scale_active = false;
    return plan;
  }
};

// ---------------------------------------------------------------------------
// One optimizer step

struct StepOutcome {
  float loss = 0.0f;
  bool skipped = false;
};

namespace detail {

inline Matrix gather_states(const ReplayBuffer& buf, const std::vector<std::uint32_t>& idx,
                            bool next) {
  Matrix m(static_cast<int>(idx.size()), 4);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto& t = buf[idx[i]];
    const auto& s = next ? t.s2 : t.s;
    for (int j = 0; j < 4; ++j) m(static_cast<int>(i), j) = s[static_cast<std::size_t>(j)];
  }
  return m;
}

// TD targets y_i = r_i + gamma * max_a Q_target(s'_i, a), zero bootstrap on
// terminal transitions. Plain float math shared by both paths.
inline std::vector<float> td_targets(const Matrix& q_next, const ReplayBuffer& buf,
                                     const std::vector<std::uint32_t>& idx, float gamma) {
  std::vector<float> y(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto& t = buf[idx[i]];
    float best = q_next(static_cast<int>(i), 0);
    for (int j = 1; j < q_next.cols; ++j) {
      best = std::max(best, q_next(static_cast<int>(i), j));
    }
    y[i] = t.r + (t.done ? 0.0f : gamma * best);
  }
  return y;
}

// Narrow a dense layer for one node: master -> interchange -> node format.
inline DenseLayer snapshot_layer(const DenseLayer& master, Precision node_fmt,
                                 Precision iface_fmt) {
  DenseLayer l = master;
  if (iface_fmt != Precision::FP32) {
    numerics::quantize_in_place(l.w, iface_fmt);
    for (float& v : l.b) v = numerics::quantize(v, iface_fmt);
  }
  if (node_fmt != Precision::FP32) {
    numerics::quantize_in_place(l.w, node_fmt);
    for (float& v : l.b) v = numerics::quantize(v, node_fmt);
  }
  return l;
}

// Forward one chain under per-entry formats. Every node narrows its input
// activation and its weight snapshot, computes in fp32, and emits fp32.
inline Matrix chain_forward(const Mlp& net, const Matrix& x,
                            const std::vector<Precision>& fmt,
                            const std::vector<Precision>& iface, ForwardCache* cache) {
  if (cache) cache->out.assign(net.spec.size(), Matrix());
  Matrix cur = x;
  for (std::size_t e = 0; e < net.spec.size(); ++e) {
    const Precision p = fmt[e];
    switch (net.spec[e].kind) {
      case LayerKind::Dense: {
        const auto& master = net.dense[static_cast<std::size_t>(net.dense_index[e])];
        if (p == Precision::FP32) {
          cur = dense_forward(cur, master);
        } else {
          cur = dense_forward(numerics::quantized(cur, p), snapshot_layer(master, p, iface[e]));
        }
        break;
      }
      case LayerKind::ReLU:
        cur = p == Precision::FP32 ? relu_forward(cur)
                                   : relu_forward(numerics::quantized(cur, p));
        break;
      case LayerKind::Tanh:
        cur = p == Precision::FP32 ? tanh_forward(cur)
                                   : tanh_forward(numerics::quantized(cur, p));
        break;
    }
    if (cache) cache->out[e] = cur;
  }
  return cur;
}

// Backward under per-entry formats, mirroring mlp_backward. Each node
// narrows its incoming gradient and its reused forward tensors.
inline Gradients chain_backward(const Mlp& net, const Matrix& x, const ForwardCache& cache,
                                const Matrix& grad_out, const std::vector<Precision>& fmt,
                                const std::vector<Precision>& iface) {
  Gradients g;
  g.dw.resize(net.dense.size());
  g.db.resize(net.dense.size());
  Matrix grad = grad_out;
  for (int e = static_cast<int>(net.spec.size()) - 1; e >= 0; --e) {
    const std::size_t eu = static_cast<std::size_t>(e);
    const Precision p = fmt[eu];
    const Matrix& input = e == 0 ? x : cache.out[eu - 1];
    switch (net.spec[eu].kind) {
      case LayerKind::Dense: {
        const int d = net.dense_index[eu];
        const auto& master = net.dense[static_cast<std::size_t>(d)];
        Matrix dx;
        if (p == Precision::FP32) {
          dense_backward(grad, input, master, e > 0, &g.dw[static_cast<std::size_t>(d)],
                         &g.db[static_cast<std::size_t>(d)], &dx);
        } else {
          dense_backward(numerics::quantized(grad, p), numerics::quantized(input, p),
                         snapshot_layer(master, p, iface[eu]), e > 0,
                         &g.dw[static_cast<std::size_t>(d)], &g.db[static_cast<std::size_t>(d)],
                         &dx);
        }
        if (e > 0) grad = std::move(dx);
        break;
      }
      case LayerKind::ReLU:
        grad = p == Precision::FP32
                   ? relu_backward(grad, input)
                   : relu_backward(numerics::quantized(grad, p), numerics::quantized(input, p));
        break;
      case LayerKind::Tanh:
        grad = p == Precision::FP32
                   ? tanh_backward(grad, cache.out[eu])
                   : tanh_backward(numerics::quantized(grad, p),
                                   numerics::quantized(cache.out[eu], p));
        break;
    }
  }
  return g;
}

}  // namespace detail

// Executes optimizer steps for a fixed plan. The fp32 plan reproduces the
// reference trainer bit for bit; any 16-bit entry changes only the tensors
// that node touches.
class StepEngine {
 public:
  StepEngine(const DqnConfig& cfg, const EnginePlan& plan) : cfg_(cfg), plan_(plan) {
    scaler_.scale = cfg.scale_init;
    scaler_.growth_factor = cfg.scale_growth;
    scaler_.backoff_factor = cfg.scale_backoff;
    scaler_.growth_interval = cfg.scale_window;
    scaler_.min_scale = cfg.scale_min;
  }

  const numerics::LossScaler& scaler() const { return scaler_; }

  StepOutcome step(Mlp& net, const Mlp& target, AdamState& adam, const ReplayBuffer& buf,
                   const std::vector<std::uint32_t>& idx) {
    const int bs = static_cast<int>(idx.size());
    const Matrix s = detail::gather_states(buf, idx, false);
    const Matrix s2 = detail::gather_states(buf, idx, true);

    const Matrix q_next =
        detail::chain_forward(target, s2, plan_.target_fwd, plan_.target_iface, nullptr);
    const std::vector<float> y =
        detail::td_targets(q_next, buf, idx, static_cast<float>(cfg_.gamma));

    ForwardCache cache;
    const Matrix q = detail::chain_forward(net, s, plan_.online_fwd, plan_.online_iface, &cache);

    // Loss node: residual between the chosen action's value and its target,
    // both narrowed to the loss node's format first.
    const float scale = plan_.scale_active ? static_cast<float>(scaler_.scale) : 1.0f;
    const float grad_coeff = 2.0f / static_cast<float>(bs);
    Matrix grad_out(bs, q.cols);
    float loss_acc = 0.0f;
    for (int i = 0; i < bs; ++i) {
      const int a = buf[idx[static_cast<std::size_t>(i)]].a;
      const float qs = numerics::quantize(q(i, a), plan_.loss);
      const float yq = numerics::quantize(y[static_cast<std::size_t>(i)], plan_.loss);
      const float resid = qs - yq;
      loss_acc += resid * resid;
      float r = resid;
      if (scale != 1.0f) r *= scale;
      grad_out(i, a) = grad_coeff * r;
    }
    const float loss = loss_acc / static_cast<float>(bs);

    Gradients g =
        detail::chain_backward(net, s, cache, grad_out, plan_.backward, plan_.backward_iface);

    StepOutcome out;
    out.loss = loss;
    if (plan_.overflow_skip && !g.all_finite()) {
      // Overflow in the 16-bit path: drop the step, weights and moments
      // untouched, and back the scale off.
      out.skipped = true;
      scaler_.update(true);
      return out;
    }
    if (scale != 1.0f) {
      g.scale_all(static_cast<float>(1.0 / static_cast<double>(scale)));
    }
    // Optional global-norm clip on the unscaled fp32 gradients. Applied
    // identically in both engine modes, so it never breaks their parity.
    if (cfg_.grad_clip_norm > 0.0) {
      double sq = 0.0;
      for (const auto& m : g.dw) {
        for (float v : m.data) sq += static_cast<double>(v) * v;
      }
      for (const auto& v : g.db) {
        for (float x : v) sq += static_cast<double>(x) * x;
      }
      const double norm = std::sqrt(sq);
      if (norm > cfg_.grad_clip_norm) {
        g.scale_all(static_cast<float>(cfg_.grad_clip_norm / norm));
      }
    }
    adam_step(net, g, adam, static_cast<float>(cfg_.learning_rate));
    scaler_.update(false);
    return out;
  }

 private:
  DqnConfig cfg_;
  EnginePlan plan_;
  numerics::LossScaler scaler_;
};

// ---------------------------------------------------------------------------
// Full training run

struct TrainReport {
  EngineMode mode = EngineMode::PlainFp32;
  std::uint32_t seed = 0;
  std::vector<double> episode_reward;
  std::vector<double> moving_avg;     // trailing window, up to 100 episodes
  std::vector<double> loss_scale;     // scale at each episode's end
  std::int64_t env_steps = 0;
  std::int64_t train_steps = 0;
  std::int64_t skipped_steps = 0;
  double wall_env_s = 0.0;
  double wall_inference_s = 0.0;
  double wall_train_s = 0.0;

  double final_moving_avg() const { return moving_avg.empty() ? 0.0 : moving_avg.back(); }
};

inline constexpr int kRewardWindow = 100;

// Trains one run. `assignment` selects the 16-bit formats per node for
// Mixed mode and is ignored for PlainFp32. Both modes share this driver,
// so they consume the RNG stream identically and any reward difference
// comes from the arithmetic alone.
inline TrainReport train_run(const DqnConfig& cfg, EngineMode mode,
                             const partition::Assignment* assignment, std::uint32_t seed) {
  cfg.validate();

  EnginePlan plan;
  if (mode == EngineMode::Mixed) {
    if (!assignment) throw ConfigError("mixed mode needs a device assignment");
    const graph::ComputeGraph g =
        graph::build_training_graph(cfg.network, Algorithm::DQN, cfg.batch_size);
    plan = EnginePlan::from_assignment(g, *assignment);
  } else {
    plan = EnginePlan::all_fp32(cfg.network);
  }

  using clock = std::chrono::steady_clock;
  const auto seconds_since = [](clock::time_point t0) {
    return std::chrono::duration<double>(clock::now() - t0).count();
  };

  Rng rng(seed);
  Mlp net = Mlp::init_he_uniform(cfg.network, rng);
  Mlp target = net;
  AdamState adam = AdamState::for_net(net);
  ReplayBuffer buf(static_cast<std::size_t>(cfg.replay_capacity));
  StepEngine engine(cfg, plan);
  CartPole env;

  TrainReport rep;
  rep.mode = mode;
  rep.seed = seed;

  int nonfinite_run = 0;
  Matrix obs_row(1, 4);

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    env.reset(rng);
    double ep_reward = 0.0;
    for (int t = 0; t < cfg.max_steps_per_episode; ++t) {
      // Epsilon-greedy on the fp32 master net; acting is not part of the
      // partitioned training step.
      const std::array<float, 4> obs = env.observation();
      int action;
      if (rng.uniform() < epsilon_at(cfg, rep.env_steps)) {
        action = static_cast<int>(rng.uniform_int(CartPole::kNumActions));
      } else {
        const auto t0 = clock::now();
        for (int j = 0; j < 4; ++j) obs_row(0, j) = obs[static_cast<std::size_t>(j)];
        const Matrix qrow = mlp_forward(net, obs_row);
        action = argmax_row(qrow, 0);
        rep.wall_inference_s += seconds_since(t0);
      }

      const auto t_env = clock::now();
      const CartPole::StepResult sr = env.step(action);
      rep.wall_env_s += seconds_since(t_env);

      Transition tr;
      tr.s = obs;
      tr.s2 = env.observation();
      tr.a = action;
      tr.r = static_cast<float>(sr.reward);
      tr.done = sr.done;
      buf.push(tr);
      ++rep.env_steps;
      ep_reward += sr.reward;

      if (buf.size() >= static_cast<std::size_t>(std::max(cfg.warmup_steps, cfg.batch_size)) &&
          rep.env_steps % cfg.train_period == 0) {
        const auto idx = rng.sample_without_replacement(
            static_cast<std::uint32_t>(buf.size()), static_cast<std::uint32_t>(cfg.batch_size));
        const auto t_train = clock::now();
        const StepOutcome so = engine.step(net, target, adam, buf, idx);
        rep.wall_train_s += seconds_since(t_train);
        ++rep.train_steps;
        if (so.skipped) {
          ++rep.skipped_steps;
        } else if (!std::isfinite(so.loss)) {
          if (++nonfinite_run >= cfg.divergence_window) {
            throw DivergenceError("loss non-finite for " + std::to_string(nonfinite_run) +
                                  " consecutive steps (seed " + std::to_string(seed) + ")");
          }
        } else {
          nonfinite_run = 0;
        }
        if (rep.train_steps % cfg.target_sync_period == 0) {
          target = net;
        }
      }
      if (sr.done) break;
    }

    rep.episode_reward.push_back(ep_reward);
    const std::size_t n = rep.episode_reward.size();
    const std::size_t w = std::min<std::size_t>(n, kRewardWindow);
    double sum = 0.0;
    for (std::size_t i = n - w; i < n; ++i) sum += rep.episode_reward[i];
    rep.moving_avg.push_back(sum / static_cast<double>(w));
    rep.loss_scale.push_back(engine.scaler().scale);
  }
  return rep;
}

// Relative gap, in percent, between the pooled final rewards of a
// quantized run set and its fp32 baseline: 100 * |q - f| / f over the
// mean final moving-average reward of each set.
inline double reward_error_percent(const std::vector<TrainReport>& quantized,
                                   const std::vector<TrainReport>& baseline) {
  if (quantized.empty() || baseline.empty()) {
    throw ConfigError("reward error needs at least one run per variant");
  }
  const auto mean_final = [](const std::vector<TrainReport>& rs) {
    double s = 0.0;
    for (const auto& r : rs) s += r.final_moving_avg();
    return s / static_cast<double>(rs.size());
  };
  const double f = mean_final(baseline);
  const double q = mean_final(quantized);
  if (f == 0.0) throw ConfigError("baseline reward is zero; relative error undefined");
  return 100.0 * std::fabs(q - f) / f;
}

}  // namespace hetpart::train

#endif  // HETPART_TRAIN_HPP_
