// Copyright 2026 hetpart contributors
// SPDX-License-Identifier: Apache-2.0

#ifndef HETPART_TESTING_HPP_
#define HETPART_TESTING_HPP_

// Random instance generation for self-checks: small synthetic DAGs with
// arbitrary cost tables, some with tight capacities so that infeasible and
// capacity-bound cases show up regularly.

#include <utility>
#include <vector>

#include "hetpart/cost.hpp"
#include "hetpart/graph.hpp"
#include "hetpart/rng.hpp"

namespace hetpart::testing {

struct RandomInstance {
  graph::ComputeGraph g;
  cost::CostTable table;
};

inline RandomInstance random_ilp_instance(Rng& rng, int max_mm_nodes, bool tight_capacity) {
  RandomInstance inst;
  const int mm = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint32_t>(max_mm_nodes)));
  const int nonmm = static_cast<int>(rng.uniform_int(5));
  const int n = mm + nonmm;

  // Random kind layout over n nodes with exactly `mm` MM nodes.
  std::vector<graph::NodeKind> kinds(static_cast<std::size_t>(n), graph::NodeKind::NonMM);
  {
    auto idx = rng.sample_without_replacement(static_cast<std::uint32_t>(n),
                                              static_cast<std::uint32_t>(mm));
    for (auto i : idx) kinds[i] = graph::NodeKind::MM;
  }

  inst.g.algorithm = Algorithm::DQN;
  inst.g.batch_size = 1;
  for (int i = 0; i < n; ++i) {
    graph::ComputeNode node;
    node.id = i;
    node.kind = kinds[static_cast<std::size_t>(i)];
    node.role = graph::NodeRole::QOnlineForward;
    node.flops = 1 + rng.uniform_int(1000);
    node.bytes_out = static_cast<std::int64_t>(rng.uniform_int(4096));
    node.bytes_in = static_cast<std::int64_t>(rng.uniform_int(4096));
    node.param_count = static_cast<std::int64_t>(rng.uniform_int(64));
    inst.g.nodes.push_back(node);
  }
  // Edges only from lower to higher ids keeps the graph acyclic.
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) {
      if (rng.uniform() < 0.3) inst.g.edges.emplace_back(u, v);
    }
  }
  inst.g.validate();

  double total_fp = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t_pl = rng.uniform(0.1, 10.0);
    const double fp = rng.uniform(0.0, 5.0);
    inst.table.time_s[{i, Device::PL}] = t_pl;
    inst.table.footprint_bytes[{i, Device::PL}] = fp;
    if (kinds[static_cast<std::size_t>(i)] == graph::NodeKind::MM) {
      inst.table.time_s[{i, Device::AIE}] = rng.uniform(0.1, 10.0);
      inst.table.footprint_bytes[{i, Device::AIE}] = fp;
    }
    total_fp += fp;
  }
  for (const auto& e : inst.g.edges) {
    auto& per_pair = inst.table.transfer_s[e];
    for (Device a : {Device::PL, Device::AIE}) {
      for (Device b : {Device::PL, Device::AIE}) {
        if (a != b) per_pair[{a, b}] = rng.uniform(0.01, 1.0);
      }
    }
  }
  if (tight_capacity) {
    // Around half the total footprint per device: feasible about as often
    // as not, and frequently capacity-bound when feasible.
    inst.table.capacity_bytes[Device::PL] = rng.uniform(0.2, 0.8) * total_fp;
    inst.table.capacity_bytes[Device::AIE] = rng.uniform(0.2, 0.8) * total_fp;
  } else {
    inst.table.capacity_bytes[Device::PL] = total_fp + 1.0;
    inst.table.capacity_bytes[Device::AIE] = total_fp + 1.0;
  }
  return inst;
}

}  // namespace hetpart::testing

#endif  // HETPART_TESTING_HPP_
