// Copyright 2026 hetpart contributors
// SPDX-License-Identifier: Apache-2.0

#ifndef HETPART_PARTITION_HPP_
#define HETPART_PARTITION_HPP_

// Exact makespan-minimizing assignment of compute nodes to accelerators.
//
// The optimization model is the integer program
//
//   minimize   T
//   s.t.       sum_j x_ij = 1                                   (one device per node)
//              S_n >= x_ij t_ij + sum_{k in pred(i)} x_kj t_kj  (n after its inputs,
//                                                                for each i in pred(n))
//              T   >= S_i + x_ij t_ij                            (T covers every node)
//              sum_{i on j} a_ij <= A_j                          (footprint capacity)
//
// with binary x_ij over the two accelerators for MM nodes (NonMM glue is
// pinned to the fabric). The start-time constraints are evaluated exactly
// as written: the tightest S_n is the max over predecessors i of
// (t_i + sum of t over i's own predecessors). That quantity, not a full
// simulation, is the objective the solver and both oracles share, so their
// results are comparable bit for bit. A separate event-driven simulator
// (simulate_schedule) yields the physical timeline, which can differ; the
// two are reported side by side.
//
// solve_exact is branch and bound over the MM nodes in ascending id order,
// fabric branch first, pruned by a critical-path lower bound and by the
// capacity budget. A second sweep with the optimal value as a hard bound
// returns the first optimal leaf in branch order, which makes the returned
// assignment the deterministic tie-break: prefer PL, then lower ids.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "hetpart/common.hpp"
#include "hetpart/cost.hpp"
#include "hetpart/errors.hpp"
#include "hetpart/graph.hpp"

namespace hetpart::partition {

// Exhaustive search explodes past a few dozen binary nodes; refuse early.
inline constexpr int kMaxMmNodesExact = 32;
inline constexpr int kMaxMmNodesBruteForce = 20;

struct Assignment {
  std::map<int, Device> device_of;

  Device at(int node) const {
    auto it = device_of.find(node);
    if (it == device_of.end()) {
      throw ConfigError("assignment is missing node " + std::to_string(node));
    }
    return it->second;
  }

  int count_on(Device d) const {
    int c = 0;
    for (const auto& [node, dev] : device_of) {
      (void)node;
      if (dev == d) ++c;
    }
    return c;
  }
};

enum class ScheduleMode { ModelForm, Simulated };

struct Schedule {
  ScheduleMode mode = ScheduleMode::ModelForm;
  std::vector<double> start_s;  // indexed by node id
  std::vector<double> end_s;
  double makespan_s = 0.0;
};

namespace detail {

// Tightest start times and makespan of the model's constraint system for
// fixed durations d: S_n = max_{i in pred(n)} (d_i + sum_{k in pred(i)} d_k),
// T = max_n (S_n + d_n). Summation follows stored predecessor order, so the
// floating-point result is a pure function of the graph.
inline double model_makespan(const std::vector<std::vector<int>>& preds,
                             const std::vector<double>& d,
                             std::vector<double>* starts_out = nullptr) {
  const std::size_t n = d.size();
  std::vector<double> pred_sum(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (int k : preds[i]) pred_sum[i] += d[static_cast<std::size_t>(k)];
  }
  if (starts_out) starts_out->assign(n, 0.0);
  double t = 0.0;
  for (std::size_t v = 0; v < n; ++v) {
    double s = 0.0;
    for (int i : preds[v]) {
      const std::size_t ii = static_cast<std::size_t>(i);
      s = std::max(s, d[ii] + pred_sum[ii]);
    }
    if (starts_out) (*starts_out)[v] = s;
    t = std::max(t, s + d[v]);
  }
  return t;
}

}  // namespace detail

// The solver-facing view of one instance.
struct IlpModel {
  const graph::ComputeGraph* g = nullptr;
  const cost::CostTable* table = nullptr;
  std::vector<std::vector<int>> preds;
  std::vector<int> mm_nodes;                   // ascending ids
  std::vector<std::vector<Device>> choices;    // per node: candidate devices
  std::map<Device, double> capacity;

  int num_binary_vars() const { return 2 * static_cast<int>(mm_nodes.size()); }
  int num_continuous_vars() const { return (g ? g->size() : 0) + 1; }  // S_i and T
};

// Candidate devices per node: both accelerators for MM nodes, fabric only
// for glue. A node whose footprint alone exceeds a device's budget loses
// that candidate up front (the single-variable implication of the capacity
// constraint); losing both makes the instance infeasible at solve time.
inline IlpModel build_ilp(const graph::ComputeGraph& g, const cost::CostTable& table) {
  g.validate();
  IlpModel m;
  m.g = &g;
  m.table = &table;
  m.preds = g.predecessors();
  m.capacity = table.capacity_bytes;
  m.choices.resize(static_cast<std::size_t>(g.size()));
  for (const auto& n : g.nodes) {
    std::vector<Device> cand;
    const std::vector<Device> all = n.kind == graph::NodeKind::MM
                                        ? std::vector<Device>{Device::PL, Device::AIE}
                                        : std::vector<Device>{Device::PL};
    for (Device d : all) {
      if (!table.has(n.id, d)) {
        throw ConfigError("cost table lacks node " + std::to_string(n.id) + " on " +
                          std::string(to_string(d)));
      }
      auto cap = m.capacity.find(d);
      const double budget = cap == m.capacity.end() ? std::numeric_limits<double>::infinity()
                                                    : cap->second;
      if (table.footprint_of(n.id, d) <= budget) cand.push_back(d);
    }
    m.choices[static_cast<std::size_t>(n.id)] = cand;
    if (n.kind == graph::NodeKind::MM) m.mm_nodes.push_back(n.id);
  }
  return m;
}

struct SolveResult {
  Assignment assignment;
  Schedule schedule;        // model-form start times
  double makespan_s = 0.0;
  std::int64_t nodes_explored = 0;
};

namespace detail {

struct SearchState {
  const IlpModel* m;
  std::vector<double> dur;       // current durations; min over candidates when unassigned
  std::vector<double> min_dur;   // per node, min over candidate devices
  std::vector<Device> dev;       // current device per node (fixed for NonMM)
  std::map<Device, double> used;
  std::int64_t explored = 0;
};

// Depth-first over MM nodes. `bound_mode` false: improve a best-value
// incumbent (prune on lb >= best). true: hunt the first leaf matching
// `best` exactly (prune on lb > best).
inline bool dfs(SearchState& st, std::size_t idx, bool bound_mode, double& best,
                std::vector<Device>* out) {
  const IlpModel& m = *st.m;
  ++st.explored;
  const double lb = model_makespan(m.preds, st.dur);
  if (bound_mode ? lb > best : lb >= best) return false;
  if (idx == m.mm_nodes.size()) {
    // All binaries fixed; durations are final, lb is the true value.
    if (bound_mode) {
      *out = st.dev;
      best = lb;
      return true;
    }
    best = lb;
    if (out) *out = st.dev;
    return true;
  }
  const int node = m.mm_nodes[idx];
  bool found = false;
  for (Device d : m.choices[static_cast<std::size_t>(node)]) {
    const double fp = m.table->footprint_of(node, d);
    if (st.used[d] + fp > m.capacity.at(d)) continue;
    st.used[d] += fp;
    const double saved = st.dur[static_cast<std::size_t>(node)];
    st.dur[static_cast<std::size_t>(node)] = m.table->time_of(node, d);
    st.dev[static_cast<std::size_t>(node)] = d;
    const bool hit = dfs(st, idx + 1, bound_mode, best, out);
    st.dur[static_cast<std::size_t>(node)] = saved;
    st.used[d] -= fp;
    found = found || hit;
    if (bound_mode && hit) return true;
  }
  return found;
}

}  // namespace detail

// Model-form start times for a fixed assignment.
inline Schedule model_schedule(const graph::ComputeGraph& g, const cost::CostTable& table,
                               const Assignment& asg) {
  std::vector<double> dur(static_cast<std::size_t>(g.size()), 0.0);
  for (const auto& n : g.nodes) {
    dur[static_cast<std::size_t>(n.id)] = table.time_of(n.id, asg.at(n.id));
  }
  Schedule s;
  s.mode = ScheduleMode::ModelForm;
  s.makespan_s = detail::model_makespan(g.predecessors(), dur, &s.start_s);
  s.end_s.resize(dur.size());
  for (std::size_t i = 0; i < dur.size(); ++i) s.end_s[i] = s.start_s[i] + dur[i];
  return s;
}

inline double model_makespan_of(const graph::ComputeGraph& g, const cost::CostTable& table,
                                const Assignment& asg) {
  return model_schedule(g, table, asg).makespan_s;
}

// Lower bound used by the search: every node at its fastest candidate.
inline double critical_path_lower_bound(const IlpModel& m) {
  std::vector<double> dur(static_cast<std::size_t>(m.g->size()));
  for (const auto& n : m.g->nodes) {
    double best = std::numeric_limits<double>::infinity();
    for (Device d : m.choices[static_cast<std::size_t>(n.id)]) {
      best = std::min(best, m.table->time_of(n.id, d));
    }
    dur[static_cast<std::size_t>(n.id)] = best;
  }
  return detail::model_makespan(m.preds, dur);
}

inline SolveResult solve_exact(const IlpModel& m) {
  if (static_cast<int>(m.mm_nodes.size()) > kMaxMmNodesExact) {
    throw LimitError("instance has " + std::to_string(m.mm_nodes.size()) +
                     " MM nodes; exact search is capped at " + std::to_string(kMaxMmNodesExact));
  }
  for (Device d : {Device::PL, Device::AIE}) {
    if (!m.capacity.count(d)) {
      throw ConfigError("capacity missing for device " + std::string(to_string(d)));
    }
  }
  // Any node with no surviving candidate is unplaceable on its own.
  for (const auto& n : m.g->nodes) {
    if (m.choices[static_cast<std::size_t>(n.id)].empty()) {
      throw InfeasibleError("node " + std::to_string(n.id) +
                                " exceeds the capacity of every eligible device",
                            n.id);
    }
  }

  detail::SearchState st;
  st.m = &m;
  const std::size_t n = static_cast<std::size_t>(m.g->size());
  st.dur.resize(n);
  st.dev.assign(n, Device::PL);
  st.used[Device::PL] = 0.0;
  st.used[Device::AIE] = 0.0;
  // NonMM nodes are fixed; seed their durations and footprints. MM nodes
  // start at their fastest candidate so partial evaluations lower-bound
  // every completion.
  for (const auto& node : m.g->nodes) {
    const auto& cand = m.choices[static_cast<std::size_t>(node.id)];
    double fastest = std::numeric_limits<double>::infinity();
    for (Device d : cand) fastest = std::min(fastest, m.table->time_of(node.id, d));
    st.dur[static_cast<std::size_t>(node.id)] = fastest;
    if (node.kind != graph::NodeKind::MM) {
      const Device d = cand.front();
      st.dev[static_cast<std::size_t>(node.id)] = d;
      st.used[d] += m.table->footprint_of(node.id, d);
      if (st.used[d] > m.capacity.at(d)) {
        throw InfeasibleError("fixed nodes alone exceed the capacity of " +
                                  std::string(to_string(d)),
                              node.id);
      }
      st.dur[static_cast<std::size_t>(node.id)] = m.table->time_of(node.id, d);
    }
  }

  // Pass 1: optimal value. Pass 2: first leaf attaining it in branch order
  // (fabric first, ascending ids), the canonical tie-break.
  double best = std::numeric_limits<double>::infinity();
  std::vector<Device> ignore;
  const bool feasible = detail::dfs(st, 0, false, best, &ignore);
  if (!feasible) {
    throw InfeasibleError("no assignment satisfies the device capacities", -1);
  }
  std::vector<Device> winner;
  detail::dfs(st, 0, true, best, &winner);

  SolveResult r;
  for (const auto& node : m.g->nodes) {
    r.assignment.device_of[node.id] = winner[static_cast<std::size_t>(node.id)];
  }
  r.makespan_s = best;
  r.schedule = model_schedule(*m.g, *m.table, r.assignment);
  r.nodes_explored = st.explored;
  return r;
}

// Exhaustive reference: every device combination over the MM nodes, mask
// bit 0 of the highest-order bit mapped to the lowest node id so that
// enumeration order equals the solver's branch order. Strict improvement
// keeps the earliest optimum, matching the solver's tie-break.
inline std::pair<Assignment, double> brute_force_optimum(const graph::ComputeGraph& g,
                                                         const cost::CostTable& table) {
  const IlpModel m = build_ilp(g, table);
  const int mm = static_cast<int>(m.mm_nodes.size());
  if (mm > kMaxMmNodesBruteForce) {
    throw LimitError("brute force capped at " + std::to_string(kMaxMmNodesBruteForce) +
                     " MM nodes");
  }
  Assignment best_asg;
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> dur(static_cast<std::size_t>(g.size()), 0.0);
  std::vector<int> mm_pos(static_cast<std::size_t>(g.size()), -1);
  for (int i = 0; i < mm; ++i) mm_pos[static_cast<std::size_t>(m.mm_nodes[static_cast<std::size_t>(i)])] = i;

  for (std::uint64_t mask = 0; mask < (1ull << mm); ++mask) {
    Assignment asg;
    std::map<Device, double> used{{Device::PL, 0.0}, {Device::AIE, 0.0}};
    bool ok = true;
    for (const auto& n : g.nodes) {
      Device d = Device::PL;
      if (n.kind == graph::NodeKind::MM) {
        const int pos = mm_pos[static_cast<std::size_t>(n.id)];
        d = (mask >> (mm - 1 - pos)) & 1ull ? Device::AIE : Device::PL;
      }
      if (!table.has(n.id, d)) {
        ok = false;
        break;
      }
      used[d] += table.footprint_of(n.id, d);
      asg.device_of[n.id] = d;
    }
    if (!ok) continue;
    bool fits = true;
    for (const auto& [d, u] : used) {
      auto cap = table.capacity_bytes.find(d);
      if (cap != table.capacity_bytes.end() && u > cap->second) fits = false;
    }
    if (!fits) continue;
    for (const auto& n : g.nodes) {
      dur[static_cast<std::size_t>(n.id)] = table.time_of(n.id, asg.at(n.id));
    }
    const double t = detail::model_makespan(m.preds, dur);
    if (t < best) {
      best = t;
      best_asg = asg;
    }
  }
  if (!std::isfinite(best)) {
    throw InfeasibleError("no assignment satisfies the device capacities", -1);
  }
  return {best_asg, best};
}

// Physical timeline for a fixed assignment: one sequential executor per
// device, nodes started in topological order, cross-device edges paying
// the link transfer time for the producer's output bytes.
inline Schedule simulate_schedule(const Assignment& asg, const graph::ComputeGraph& g,
                                  const cost::CostTable& table,
                                  const cost::ProfileSet& profiles) {
  const auto preds = g.predecessors();
  const auto order = graph::topological_order(g);
  Schedule s;
  s.mode = ScheduleMode::Simulated;
  s.start_s.assign(static_cast<std::size_t>(g.size()), 0.0);
  s.end_s.assign(static_cast<std::size_t>(g.size()), 0.0);
  std::map<Device, double> free_at;
  for (int v : order) {
    const Device dv = asg.at(v);
    double ready = free_at[dv];
    for (int u : preds[static_cast<std::size_t>(v)]) {
      const Device du = asg.at(u);
      double arrival = s.end_s[static_cast<std::size_t>(u)];
      if (du != dv) {
        const cost::LinkProfile* link = profiles.find_link(du, dv);
        if (!link) {
          throw ConfigError("no link between " + std::string(to_string(du)) + " and " +
                            std::string(to_string(dv)));
        }
        arrival += cost::estimate_transfer_time(g.node(u).bytes_out, *link);
      }
      ready = std::max(ready, arrival);
    }
    const double dur = table.time_of(v, dv);
    s.start_s[static_cast<std::size_t>(v)] = ready;
    s.end_s[static_cast<std::size_t>(v)] = ready + dur;
    free_at[dv] = ready + dur;
    s.makespan_s = std::max(s.makespan_s, ready + dur);
  }
  return s;
}

}  // namespace hetpart::partition

#endif  // HETPART_PARTITION_HPP_
