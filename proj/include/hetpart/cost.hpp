// Copyright 2026 hetpart contributors
// SPDX-License-Identifier: Apache-2.0

#ifndef HETPART_COST_HPP_
#define HETPART_COST_HPP_

// Analytical device cost model. Node time on a device is
//
//   t = init_time + flops / (flops_per_cycle * clock_hz)
//            + (bytes_in + bytes_out) / mem_bandwidth
//
// i.e. a fixed kernel-launch overhead, a throughput term and a local memory
// term. Transfers between devices cost latency + bytes / link_bandwidth.
// The AIE array has a large launch overhead but much higher throughput than
// the fabric, so each MM size has a crossover point; the solver exploits it.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hetpart/common.hpp"
#include "hetpart/errors.hpp"
#include "hetpart/graph.hpp"

namespace hetpart::cost {

struct DeviceProfile {
  Device id = Device::PL;
  double clock_hz = 0.0;
  // MACs-per-cycle throughput per supported precision. A missing entry
  // means the device cannot compute at that precision.
  std::map<Precision, double> flops_per_cycle;
  double init_time_s = 0.0;
  double mem_bandwidth_bytes_per_s = 0.0;
  double resource_capacity_bytes = 0.0;  // on-device parameter budget

  bool supports(Precision p) const { return flops_per_cycle.count(p) != 0; }
};

struct LinkProfile {
  Device src = Device::PS;
  Device dst = Device::PL;
  double bandwidth_bytes_per_s = 0.0;
  double latency_s = 0.0;
};

struct ProfileSet {
  std::vector<DeviceProfile> devices;
  std::vector<LinkProfile> links;

  const DeviceProfile* find_device(Device d) const {
    for (const auto& p : devices) {
      if (p.id == d) return &p;
    }
    return nullptr;
  }

  const LinkProfile* find_link(Device a, Device b) const {
    for (const auto& l : links) {
      if (l.src == a && l.dst == b) return &l;
    }
    return nullptr;
  }

  const DeviceProfile& device(Device d) const {
    const DeviceProfile* p = find_device(d);
    if (!p) {
      throw CapabilityError("profile set has no device " + std::string(to_string(d)));
    }
    return *p;
  }

  void validate() const {
    std::map<Device, int> count;
    for (const auto& p : devices) {
      ++count[p.id];
      if (p.clock_hz <= 0) throw SchemaError("device clock_hz must be positive");
      if (p.mem_bandwidth_bytes_per_s <= 0) throw SchemaError("device mem_bandwidth must be positive");
      if (p.init_time_s < 0) throw SchemaError("device init_time must be >= 0");
      if (p.resource_capacity_bytes < 0) throw SchemaError("device capacity must be >= 0");
      for (const auto& [prec, fpc] : p.flops_per_cycle) {
        (void)prec;
        if (fpc <= 0) throw SchemaError("flops_per_cycle entries must be positive");
      }
      // The platform fixes which formats each device class computes in.
      switch (p.id) {
        case Device::PS:
          if (!p.supports(Precision::FP32) || p.flops_per_cycle.size() != 1) {
            throw SchemaError("PS must support exactly fp32");
          }
          break;
        case Device::PL:
          if (!p.supports(Precision::FP16) || !p.supports(Precision::FP32) ||
              p.flops_per_cycle.size() != 2) {
            throw SchemaError("PL must support exactly fp16 and fp32");
          }
          break;
        case Device::AIE:
          if (!p.supports(Precision::BF16) || p.flops_per_cycle.size() != 1) {
            throw SchemaError("AIE must support exactly bf16");
          }
          break;
      }
    }
    for (const auto& [d, c] : count) {
      (void)d;
      if (c > 1) throw SchemaError("duplicate device profile");
    }
    for (const auto& l : links) {
      if (l.src == l.dst) throw SchemaError("link endpoints must differ");
      if (l.bandwidth_bytes_per_s <= 0) throw SchemaError("link bandwidth must be positive");
      if (l.latency_s < 0) throw SchemaError("link latency must be >= 0");
      if (!find_device(l.src) || !find_device(l.dst)) {
        throw SchemaError("link references a device without a profile");
      }
    }
  }
};

// Calibration for the reference board: a 1.2 GHz host core, a 245 MHz
// fabric with wide fp16 MAC arrays, and a 1 GHz AI-engine array whose
// kernels cost ~50 us to launch but stream bf16 MACs very fast.
inline ProfileSet default_profiles() {
  ProfileSet ps;
  {
    DeviceProfile d;
    d.id = Device::PS;
    d.clock_hz = 1.2e9;
    d.flops_per_cycle[Precision::FP32] = 8.0;
    d.init_time_s = 0.0;
    d.mem_bandwidth_bytes_per_s = 8e9;
    d.resource_capacity_bytes = 4e9;
    ps.devices.push_back(d);
  }
  {
    DeviceProfile d;
    d.id = Device::PL;
    d.clock_hz = 245e6;
    d.flops_per_cycle[Precision::FP16] = 160.0;
    d.flops_per_cycle[Precision::FP32] = 64.0;
    d.init_time_s = 1e-6;
    d.mem_bandwidth_bytes_per_s = 1.6e10;
    d.resource_capacity_bytes = 4e9;
    ps.devices.push_back(d);
  }
  {
    DeviceProfile d;
    d.id = Device::AIE;
    d.clock_hz = 1e9;
    d.flops_per_cycle[Precision::BF16] = 512.0;
    d.init_time_s = 50e-6;
    d.mem_bandwidth_bytes_per_s = 3.2e10;
    d.resource_capacity_bytes = 4e9;
    ps.devices.push_back(d);
  }
  const auto link = [&ps](Device a, Device b, double bw, double lat) {
    ps.links.push_back({a, b, bw, lat});
    ps.links.push_back({b, a, bw, lat});
  };
  link(Device::PL, Device::AIE, 8e9, 2e-6);
  link(Device::PS, Device::PL, 4e9, 5e-6);
  link(Device::PS, Device::AIE, 4e9, 10e-6);
  return ps;
}

inline double estimate_node_time(const graph::ComputeNode& n, const DeviceProfile& dev,
                                 Precision prec) {
  if (!dev.supports(prec)) {
    throw CapabilityError("device " + std::string(to_string(dev.id)) +
                          " does not compute in " + std::string(to_string(prec)));
  }
  const double compute = static_cast<double>(n.flops) / (dev.flops_per_cycle.at(prec) * dev.clock_hz);
  const double memory =
      static_cast<double>(n.bytes_in + n.bytes_out) / dev.mem_bandwidth_bytes_per_s;
  return dev.init_time_s + compute + memory;
}

inline double estimate_transfer_time(std::int64_t bytes, const LinkProfile& link) {
  return link.latency_s + static_cast<double>(bytes) / link.bandwidth_bytes_per_s;
}

// The per-step precision each device computes MM nodes in.
inline Precision native_mm_precision(Device d) {
  switch (d) {
    case Device::PS:  return Precision::FP32;
    case Device::PL:  return Precision::FP16;
    case Device::AIE: return Precision::BF16;
  }
  return Precision::FP32;
}

// Per-node, per-device time and footprint table plus per-edge transfer
// times, the solver's entire view of the hardware.
struct CostTable {
  std::map<std::pair<int, Device>, double> time_s;          // t[i,j]
  std::map<std::pair<int, Device>, double> footprint_bytes; // a[i,j]
  // transfer[(u,v)][(dev_u,dev_v)] in seconds; same-device pairs are 0 and
  // not stored.
  std::map<std::pair<int, int>, std::map<std::pair<Device, Device>, double>> transfer_s;
  std::map<Device, double> capacity_bytes;                  // A[j]

  bool has(int node, Device d) const { return time_s.count({node, d}) != 0; }

  double time_of(int node, Device d) const {
    auto it = time_s.find({node, d});
    if (it == time_s.end()) {
      throw ConfigError("no cost entry for node " + std::to_string(node) + " on " +
                        std::string(to_string(d)));
    }
    return it->second;
  }

  double footprint_of(int node, Device d) const {
    auto it = footprint_bytes.find({node, d});
    return it == footprint_bytes.end() ? 0.0 : it->second;
  }

  double transfer_of(int u, int v, Device du, Device dv) const {
    if (du == dv) return 0.0;
    auto eit = transfer_s.find({u, v});
    if (eit != transfer_s.end()) {
      auto pit = eit->second.find({du, dv});
      if (pit != eit->second.end()) return pit->second;
    }
    throw ConfigError("no transfer entry for edge (" + std::to_string(u) + "," +
                      std::to_string(v) + ") across " + std::string(to_string(du)) + "->" +
                      std::string(to_string(dv)));
  }

  std::vector<Device> devices_of(int node) const {
    std::vector<Device> out;
    for (Device d : {Device::PS, Device::PL, Device::AIE}) {
      if (has(node, d)) out.push_back(d);
    }
    return out;
  }
};

// Builds the solver's cost table for a graph: MM nodes get entries on both
// accelerators at their native formats (fp16 on PL, bf16 on AIE); NonMM
// glue is pinned to the fabric. Footprints charge 2 bytes per resident
// parameter, the 16-bit storage cost.
inline CostTable build_cost_table(const graph::ComputeGraph& g, const ProfileSet& profiles) {
  profiles.validate();
  const DeviceProfile* pl = profiles.find_device(Device::PL);
  const DeviceProfile* aie = profiles.find_device(Device::AIE);
  if (!pl) throw CapabilityError("profile set has no PL device");
  if (!aie) throw CapabilityError("profile set has no AIE device");

  CostTable t;
  for (const auto& n : g.nodes) {
    t.time_s[{n.id, Device::PL}] = estimate_node_time(n, *pl, Precision::FP16);
    t.footprint_bytes[{n.id, Device::PL}] = 2.0 * static_cast<double>(n.param_count);
    if (n.kind == graph::NodeKind::MM) {
      t.time_s[{n.id, Device::AIE}] = estimate_node_time(n, *aie, Precision::BF16);
      t.footprint_bytes[{n.id, Device::AIE}] = 2.0 * static_cast<double>(n.param_count);
    }
  }
  for (const auto& [u, v] : g.edges) {
    const std::int64_t bytes = g.node(u).bytes_out;
    auto& per_pair = t.transfer_s[{u, v}];
    for (const auto& link : profiles.links) {
      per_pair[{link.src, link.dst}] = estimate_transfer_time(bytes, link);
    }
  }
  t.capacity_bytes[Device::PL] = pl->resource_capacity_bytes;
  t.capacity_bytes[Device::AIE] = aie->resource_capacity_bytes;
  return t;
}

// All-PL table at fp32, the single-device baseline the speedup numbers
// compare against.
inline CostTable build_fp32_baseline_table(const graph::ComputeGraph& g,
                                           const ProfileSet& profiles) {
  profiles.validate();
  const DeviceProfile& pl = profiles.device(Device::PL);
  CostTable t;
  for (const auto& n : g.nodes) {
    t.time_s[{n.id, Device::PL}] = estimate_node_time(n, pl, Precision::FP32);
    t.footprint_bytes[{n.id, Device::PL}] = 4.0 * static_cast<double>(n.param_count);
  }
  for (const auto& [u, v] : g.edges) {
    auto& per_pair = t.transfer_s[{u, v}];
    for (const auto& link : profiles.links) {
      per_pair[{link.src, link.dst}] = estimate_transfer_time(g.node(u).bytes_out, link);
    }
  }
  t.capacity_bytes[Device::PL] = pl.resource_capacity_bytes;
  return t;
}

// FLOP count at which an MM node runs equally fast on both accelerators,
// holding the byte counts fixed. Below it the fabric wins on launch
// overhead; above it the AI engines win on throughput. Returns nothing if
// one device dominates at every size.
inline std::optional<double> crossover_flops(const DeviceProfile& pl, const DeviceProfile& aie,
                                             std::int64_t bytes_total) {
  const double slope_pl = 1.0 / (pl.flops_per_cycle.at(Precision::FP16) * pl.clock_hz);
  const double slope_aie = 1.0 / (aie.flops_per_cycle.at(Precision::BF16) * aie.clock_hz);
  const double icpt_pl =
      pl.init_time_s + static_cast<double>(bytes_total) / pl.mem_bandwidth_bytes_per_s;
  const double icpt_aie =
      aie.init_time_s + static_cast<double>(bytes_total) / aie.mem_bandwidth_bytes_per_s;
  if (slope_pl == slope_aie) return std::nullopt;
  const double f = (icpt_aie - icpt_pl) / (slope_pl - slope_aie);
  if (!(f > 0.0) || !std::isfinite(f)) return std::nullopt;
  return f;
}

}  // namespace hetpart::cost

#endif  // HETPART_COST_HPP_
