// Copyright 2026 hetpart contributors
// SPDX-License-Identifier: Apache-2.0

#ifndef HETPART_GRAPH_HPP_
#define HETPART_GRAPH_HPP_

// Layer-granularity compute graphs for one training step of an off-policy
// RL learner. A network description (dense/activation layer list) expands
// into a DAG of nodes, each tagged as MM (matrix multiply, eligible for
// either accelerator) or NonMM (elementwise glue, pinned to the fabric).
// FLOP and byte counts follow the usual dense-layer arithmetic:
//
//   dense forward      2 * batch * in * out        (multiply-accumulate)
//   dense backward     4 * batch * in * out        (dW and dX together)
//   activation         batch * width, both passes
//   loss               3 * batch * out
//   weight update      2 * params, batch independent
//
// Byte counts are nominal FP32 tensor sizes; they feed the transfer-time
// estimate when an edge crosses devices.

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hetpart/common.hpp"
#include "hetpart/errors.hpp"

namespace hetpart::graph {

enum class LayerKind { Dense, ReLU, Tanh };

struct LayerSpec {
  LayerKind kind;
  int in_dim = 0;   // dense only
  int out_dim = 0;  // dense only
};

inline std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Dense: return "dense";
    case LayerKind::ReLU:  return "relu";
    case LayerKind::Tanh:  return "tanh";
  }
  return "?";
}

inline LayerKind layer_kind_from_string(std::string_view s) {
  if (s == "dense") return LayerKind::Dense;
  if (s == "relu") return LayerKind::ReLU;
  if (s == "tanh") return LayerKind::Tanh;
  throw SchemaError("unknown layer kind '" + std::string(s) + "'");
}

// Checks the layer list is a well-formed MLP and returns its output width.
inline int validate_network(const std::vector<LayerSpec>& net) {
  if (net.empty()) throw GraphError("network has no layers");
  if (net.front().kind != LayerKind::Dense) {
    throw GraphError("network must start with a dense layer");
  }
  int width = net.front().in_dim;
  if (width <= 0) throw GraphError("first dense layer needs in_dim >= 1");
  for (std::size_t i = 0; i < net.size(); ++i) {
    const LayerSpec& l = net[i];
    if (l.kind == LayerKind::Dense) {
      if (l.in_dim != width) {
        throw GraphError("layer " + std::to_string(i) + ": dense in_dim " +
                         std::to_string(l.in_dim) + " does not match incoming width " +
                         std::to_string(width));
      }
      if (l.out_dim <= 0) {
        throw GraphError("layer " + std::to_string(i) + ": dense out_dim must be >= 1");
      }
      width = l.out_dim;
    }
    // Activations keep the width.
  }
  return width;
}

enum class NodeKind { MM, NonMM };
enum class PassKind { Forward, Backward, Update };

// What the node computes, by role in the training step. The q_* roles come
// from the value-learner template, the rest from the actor-critic one.
enum class NodeRole {
  QTargetForward, QOnlineForward, QLoss, QBackward, QUpdate,
  ActorTargetForward, CriticTargetForward, CriticForward, CriticLoss,
  CriticBackward, CriticUpdate, ActorForward, CriticChainForward,
  CriticChainBackward, ActorBackward, ActorUpdate,
};

inline std::string_view to_string(NodeKind k) {
  return k == NodeKind::MM ? "mm" : "non_mm";
}

inline std::string_view to_string(PassKind p) {
  switch (p) {
    case PassKind::Forward:  return "forward";
    case PassKind::Backward: return "backward";
    case PassKind::Update:   return "update";
  }
  return "?";
}

inline std::string_view to_string(NodeRole r) {
  switch (r) {
    case NodeRole::QTargetForward:      return "q_target_fwd";
    case NodeRole::QOnlineForward:      return "q_online_fwd";
    case NodeRole::QLoss:               return "q_loss";
    case NodeRole::QBackward:           return "q_bwd";
    case NodeRole::QUpdate:             return "q_update";
    case NodeRole::ActorTargetForward:  return "actor_target_fwd";
    case NodeRole::CriticTargetForward: return "critic_target_fwd";
    case NodeRole::CriticForward:       return "critic_fwd";
    case NodeRole::CriticLoss:          return "critic_loss";
    case NodeRole::CriticBackward:      return "critic_bwd";
    case NodeRole::CriticUpdate:        return "critic_update";
    case NodeRole::ActorForward:        return "actor_fwd";
    case NodeRole::CriticChainForward:  return "critic_chain_fwd";
    case NodeRole::CriticChainBackward: return "critic_chain_bwd";
    case NodeRole::ActorBackward:       return "actor_bwd";
    case NodeRole::ActorUpdate:         return "actor_update";
  }
  return "?";
}

struct ComputeNode {
  int id = -1;
  NodeKind kind = NodeKind::NonMM;
  PassKind pass = PassKind::Forward;
  NodeRole role = NodeRole::QOnlineForward;
  int layer = -1;  // index into the network's layer list, -1 for loss nodes
  std::int64_t flops = 0;
  std::int64_t bytes_in = 0;
  std::int64_t bytes_out = 0;
  std::int64_t param_count = 0;  // parameters resident on the device
};

struct ComputeGraph {
  Algorithm algorithm = Algorithm::DQN;
  int batch_size = 1;
  std::vector<ComputeNode> nodes;              // indexed by id
  std::vector<std::pair<int, int>> edges;      // (from, to)

  const ComputeNode& node(int id) const { return nodes.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(nodes.size()); }

  std::vector<std::vector<int>> predecessors() const {
    std::vector<std::vector<int>> p(nodes.size());
    for (const auto& [u, v] : edges) p[static_cast<std::size_t>(v)].push_back(u);
    return p;
  }
  std::vector<std::vector<int>> successors() const {
    std::vector<std::vector<int>> s(nodes.size());
    for (const auto& [u, v] : edges) s[static_cast<std::size_t>(u)].push_back(v);
    return s;
  }

  std::int64_t total_flops() const {
    std::int64_t t = 0;
    for (const auto& n : nodes) t += n.flops;
    return t;
  }

  int mm_node_count() const {
    return static_cast<int>(std::count_if(nodes.begin(), nodes.end(), [](const ComputeNode& n) {
      return n.kind == NodeKind::MM;
    }));
  }

  void validate() const;
};

// Kahn's algorithm with an ascending-id frontier, so the order is a unique
// function of the graph. Throws on cycles.
inline std::vector<int> topological_order(const ComputeGraph& g) {
  const int n = g.size();
  std::vector<int> indeg(static_cast<std::size_t>(n), 0);
  const auto succ = g.successors();
  for (const auto& [u, v] : g.edges) ++indeg[static_cast<std::size_t>(v)];
  std::vector<int> frontier;
  for (int i = 0; i < n; ++i) {
    if (indeg[static_cast<std::size_t>(i)] == 0) frontier.push_back(i);
  }
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(n));
  while (!frontier.empty()) {
    std::pop_heap(frontier.begin(), frontier.end(), std::greater<>{});
    const int u = frontier.back();
    frontier.pop_back();
    order.push_back(u);
    for (int v : succ[static_cast<std::size_t>(u)]) {
      if (--indeg[static_cast<std::size_t>(v)] == 0) {
        frontier.push_back(v);
        std::push_heap(frontier.begin(), frontier.end(), std::greater<>{});
      }
    }
  }
  if (static_cast<int>(order.size()) != n) {
    throw GraphError("graph contains a cycle");
  }
  return order;
}

inline void ComputeGraph::validate() const {
  if (batch_size < 1) throw GraphError("batch_size must be >= 1");
  for (int i = 0; i < size(); ++i) {
    const ComputeNode& n = nodes[static_cast<std::size_t>(i)];
    if (n.id != i) throw GraphError("node ids must be dense and ascending");
    if (n.flops < 0 || n.bytes_in < 0 || n.bytes_out < 0 || n.param_count < 0) {
      throw GraphError("node " + std::to_string(i) + " has a negative size field");
    }
  }
  std::map<std::pair<int, int>, int> seen;
  for (const auto& [u, v] : edges) {
    if (u < 0 || v < 0 || u >= size() || v >= size()) {
      throw GraphError("edge (" + std::to_string(u) + "," + std::to_string(v) +
                       ") references a missing node");
    }
    if (u == v) throw GraphError("self-loop on node " + std::to_string(u));
    if (++seen[{u, v}] > 1) {
      throw GraphError("duplicate edge (" + std::to_string(u) + "," + std::to_string(v) + ")");
    }
  }
  topological_order(*this);  // throws on cycles
}

namespace detail {

struct Builder {
  ComputeGraph g;

  int add(NodeKind kind, PassKind pass, NodeRole role, int layer, std::int64_t flops,
          std::int64_t bytes_in, std::int64_t bytes_out, std::int64_t params) {
    ComputeNode n;
    n.id = g.size();
    n.kind = kind;
    n.pass = pass;
    n.role = role;
    n.layer = layer;
    n.flops = flops;
    n.bytes_in = bytes_in;
    n.bytes_out = bytes_out;
    n.param_count = params;
    g.nodes.push_back(n);
    return n.id;
  }

  void edge(int u, int v) { g.edges.emplace_back(u, v); }

  // Forward chain over the network; returns the node id per layer entry.
  // `flops_scale` is 2 for a plain forward pass. A node with layer index e
  // depends on the previous entry's node.
  std::vector<int> forward_chain(const std::vector<LayerSpec>& net, NodeRole role,
                                 std::int64_t bs, int prev_tail = -1) {
    std::vector<int> ids;
    int prev = prev_tail;
    int width = net.front().in_dim;
    for (std::size_t e = 0; e < net.size(); ++e) {
      const LayerSpec& l = net[e];
      int id;
      if (l.kind == LayerKind::Dense) {
        const std::int64_t params = static_cast<std::int64_t>(l.in_dim) * l.out_dim + l.out_dim;
        id = add(NodeKind::MM, PassKind::Forward, role, static_cast<int>(e),
                 2 * bs * l.in_dim * l.out_dim, 4 * bs * l.in_dim, 4 * bs * l.out_dim, params);
        width = l.out_dim;
      } else {
        id = add(NodeKind::NonMM, PassKind::Forward, role, static_cast<int>(e),
                 bs * width, 4 * bs * width, 4 * bs * width, 0);
      }
      if (prev >= 0) edge(prev, id);
      prev = id;
      ids.push_back(id);
    }
    return ids;
  }

  // Backward chain in reverse layer order. Dense nodes produce both weight
  // and input gradients unless `input_grad_only`, which models the path
  // that back-propagates through a frozen network. Each node also needs the
  // forward activation cached at its layer, hence the extra dependency on
  // the matching forward node.
  std::vector<int> backward_chain(const std::vector<LayerSpec>& net, NodeRole role,
                                  std::int64_t bs, int grad_source,
                                  const std::vector<int>& fwd_ids, bool input_grad_only) {
    // Entry widths before each layer, for activation byte counts.
    std::vector<int> in_width(net.size());
    int width = net.front().in_dim;
    for (std::size_t e = 0; e < net.size(); ++e) {
      in_width[e] = width;
      if (net[e].kind == LayerKind::Dense) width = net[e].out_dim;
    }
    std::vector<int> ids(net.size(), -1);
    int prev = grad_source;
    for (int e = static_cast<int>(net.size()) - 1; e >= 0; --e) {
      const LayerSpec& l = net[static_cast<std::size_t>(e)];
      int id;
      if (l.kind == LayerKind::Dense) {
        const std::int64_t params = static_cast<std::int64_t>(l.in_dim) * l.out_dim + l.out_dim;
        const std::int64_t flops = (input_grad_only ? 2 : 4) * bs * l.in_dim * l.out_dim;
        const std::int64_t bytes_out =
            4 * bs * l.in_dim + (input_grad_only ? 0 : 4 * params);
        id = add(NodeKind::MM, PassKind::Backward, role, e, flops,
                 4 * bs * (l.in_dim + l.out_dim), bytes_out, params);
      } else {
        const int w = in_width[static_cast<std::size_t>(e)];
        id = add(NodeKind::NonMM, PassKind::Backward, role, e, bs * w, 8 * bs * w, 4 * bs * w, 0);
      }
      edge(prev, id);
      if (e > 0) edge(fwd_ids[static_cast<std::size_t>(e) - 1], id);  // cached activation
      prev = id;
      ids[static_cast<std::size_t>(e)] = id;
    }
    return ids;
  }

  void update_nodes(const std::vector<LayerSpec>& net, NodeRole role,
                    const std::vector<int>& bwd_ids) {
    for (std::size_t e = 0; e < net.size(); ++e) {
      if (net[e].kind != LayerKind::Dense) continue;
      const std::int64_t params =
          static_cast<std::int64_t>(net[e].in_dim) * net[e].out_dim + net[e].out_dim;
      const int id = add(NodeKind::NonMM, PassKind::Update, role, static_cast<int>(e),
                         2 * params, 8 * params, 4 * params, params);
      edge(bwd_ids[e], id);
    }
  }
};

}  // namespace detail

// Width of the network output.
inline int network_output_dim(const std::vector<LayerSpec>& net) {
  int width = net.front().in_dim;
  for (const auto& l : net) {
    if (l.kind == LayerKind::Dense) width = l.out_dim;
  }
  return width;
}

// The critic paired with a given actor: same hidden widths, ReLU between
// them, state+action input, scalar output.
inline std::vector<LayerSpec> derive_critic(const std::vector<LayerSpec>& actor) {
  validate_network(actor);
  std::vector<int> hidden;
  for (const auto& l : actor) {
    if (l.kind == LayerKind::Dense) hidden.push_back(l.out_dim);
  }
  const int action_dim = hidden.back();
  hidden.pop_back();  // drop the actor output width
  const int state_dim = actor.front().in_dim;
  std::vector<LayerSpec> critic;
  int width = state_dim + action_dim;
  for (int h : hidden) {
    critic.push_back({LayerKind::Dense, width, h});
    critic.push_back({LayerKind::ReLU, 0, 0});
    width = h;
  }
  critic.push_back({LayerKind::Dense, width, 1});
  return critic;
}

// Expands one training step of the given learner over `network` into a
// compute DAG. For the value learner (dqn) the step is: target forward,
// online forward, TD loss, backward, per-layer weight updates. For the
// actor-critic learner (ddpg) it is the critic update followed by the actor
// update, with the policy gradient flowing back through a frozen critic.
inline ComputeGraph build_training_graph(const std::vector<LayerSpec>& network,
                                         Algorithm algorithm, int batch_size) {
  if (batch_size < 1) throw GraphError("batch_size must be >= 1");
  validate_network(network);
  const std::int64_t bs = batch_size;
  detail::Builder b;
  b.g.algorithm = algorithm;
  b.g.batch_size = batch_size;

  if (algorithm == Algorithm::DQN) {
    const int out = network_output_dim(network);
    const auto tgt = b.forward_chain(network, NodeRole::QTargetForward, bs);
    const auto onl = b.forward_chain(network, NodeRole::QOnlineForward, bs);
    const int loss = b.add(NodeKind::NonMM, PassKind::Forward, NodeRole::QLoss, -1,
                           3 * bs * out, 8 * bs * out, 4 * bs * out, 0);
    b.edge(tgt.back(), loss);
    b.edge(onl.back(), loss);
    const auto bwd = b.backward_chain(network, NodeRole::QBackward, bs, loss, onl, false);
    b.update_nodes(network, NodeRole::QUpdate, bwd);
  } else {
    const auto critic = derive_critic(network);
    // Critic step: y = r + gamma * Qt(s', At(s')), minimize (Q(s,a) - y)^2.
    const auto actor_tgt = b.forward_chain(network, NodeRole::ActorTargetForward, bs);
    const auto critic_tgt =
        b.forward_chain(critic, NodeRole::CriticTargetForward, bs, actor_tgt.back());
    const auto critic_fwd = b.forward_chain(critic, NodeRole::CriticForward, bs);
    const int loss = b.add(NodeKind::NonMM, PassKind::Forward, NodeRole::CriticLoss, -1,
                           3 * bs, 8 * bs, 4 * bs, 0);
    b.edge(critic_tgt.back(), loss);
    b.edge(critic_fwd.back(), loss);
    const auto critic_bwd =
        b.backward_chain(critic, NodeRole::CriticBackward, bs, loss, critic_fwd, false);
    b.update_nodes(critic, NodeRole::CriticUpdate, critic_bwd);
    // Actor step: ascend Q(s, pi(s)); the gradient passes through the critic
    // without touching its weights, then drives the actor update.
    const auto actor_fwd = b.forward_chain(network, NodeRole::ActorForward, bs);
    const auto chain_fwd =
        b.forward_chain(critic, NodeRole::CriticChainForward, bs, actor_fwd.back());
    const auto chain_bwd = b.backward_chain(critic, NodeRole::CriticChainBackward, bs,
                                            chain_fwd.back(), chain_fwd, true);
    const auto actor_bwd = b.backward_chain(network, NodeRole::ActorBackward, bs,
                                            chain_bwd.front(), actor_fwd, false);
    b.update_nodes(network, NodeRole::ActorUpdate, actor_bwd);
  }

  b.g.validate();
  return b.g;
}

// Node ids of each stage of the value-learner step, for driving execution.
struct DqnLayout {
  std::vector<int> target_forward;  // per layer entry
  std::vector<int> online_forward;
  std::vector<int> backward;        // per layer entry
  std::vector<int> update;          // per layer entry, -1 for activations
  int loss = -1;
};

inline DqnLayout dqn_layout(const ComputeGraph& g) {
  if (g.algorithm != Algorithm::DQN) {
    throw GraphError("layout requested for a non-dqn graph");
  }
  int entries = 0;
  for (const auto& n : g.nodes) entries = std::max(entries, n.layer + 1);
  DqnLayout lay;
  lay.target_forward.assign(static_cast<std::size_t>(entries), -1);
  lay.online_forward.assign(static_cast<std::size_t>(entries), -1);
  lay.backward.assign(static_cast<std::size_t>(entries), -1);
  lay.update.assign(static_cast<std::size_t>(entries), -1);
  for (const auto& n : g.nodes) {
    switch (n.role) {
      case NodeRole::QTargetForward: lay.target_forward[static_cast<std::size_t>(n.layer)] = n.id; break;
      case NodeRole::QOnlineForward: lay.online_forward[static_cast<std::size_t>(n.layer)] = n.id; break;
      case NodeRole::QBackward:      lay.backward[static_cast<std::size_t>(n.layer)] = n.id; break;
      case NodeRole::QUpdate:        lay.update[static_cast<std::size_t>(n.layer)] = n.id; break;
      case NodeRole::QLoss:          lay.loss = n.id; break;
      default:
        throw GraphError("unexpected node role in a dqn graph");
    }
  }
  for (int e = 0; e < entries; ++e) {
    if (lay.target_forward[static_cast<std::size_t>(e)] < 0 ||
        lay.online_forward[static_cast<std::size_t>(e)] < 0 ||
        lay.backward[static_cast<std::size_t>(e)] < 0) {
      throw GraphError("incomplete dqn graph: layer entry " + std::to_string(e));
    }
  }
  if (lay.loss < 0) throw GraphError("dqn graph has no loss node");
  return lay;
}

}  // namespace hetpart::graph

#endif  // HETPART_GRAPH_HPP_
