// Copyright 2026 hetpart contributors
// SPDX-License-Identifier: Apache-2.0

#ifndef HETPART_IO_HPP_
#define HETPART_IO_HPP_

// On-disk document formats and the helpers the command-line tool uses to
// read and write them. Everything here is deterministic: keys serialize in
// sorted order, no timestamps or hostnames are recorded, and files are
// written atomically (temp file plus rename). Rerunning a command over
// unchanged inputs reproduces every artifact byte for byte.
//
// All JSON documents carry "schema_version"; readers reject other versions.
// Unknown keys are rejected too, so a typo in a config fails loudly instead
// of silently falling back to a default.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "hetpart/common.hpp"
#include "hetpart/cost.hpp"
#include "hetpart/errors.hpp"
#include "hetpart/graph.hpp"
#include "hetpart/partition.hpp"
#include "hetpart/train.hpp"

namespace hetpart::io {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Files

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw ConfigError("read failed: " + path);
  return content;
}

// Writes to `<path>.tmp` in the same directory and renames over the target,
// so a crash mid-write never leaves a truncated document behind.
inline void atomic_write_file(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot create file: " + tmp);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw ConfigError("write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw ConfigError("rename failed: " + tmp + " -> " + path + ": " + ec.message());
}

// FNV-1a, used to fingerprint input files in run manifests.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string fnv1a64_hex(std::string_view bytes) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

// Round-trip-exact decimal rendering for CSV cells.
inline std::string fmt_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// JSON plumbing

// Parses with a readable position on syntax errors. nlohmann reports a byte
// offset; convert it to line and column for the message.
inline json parse_json(const std::string& content, const std::string& source) {
  try {
    return json::parse(content);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t stop = e.byte == 0 ? 0 : std::min(content.size(), e.byte - 1);
    for (std::size_t i = 0; i < stop; ++i) {
      if (content[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw SchemaError(source + ": syntax error at line " + std::to_string(line) + ", column " +
                      std::to_string(col) + ": " + e.what());
  }
}

namespace detail {

inline void expect_object(const json& j, const std::string& at) {
  if (!j.is_object()) throw SchemaError(at + ": expected an object");
}

inline void expect_array(const json& j, const std::string& at) {
  if (!j.is_array()) throw SchemaError(at + ": expected an array");
}

inline void check_keys(const json& j, std::initializer_list<std::string_view> allowed,
                       const std::string& at) {
  expect_object(j, at);
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (std::string_view k : allowed) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) throw SchemaError(at + ": unknown key \"" + it.key() + "\"");
  }
}

inline const json& member(const json& j, const char* key, const std::string& at) {
  expect_object(j, at);
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(at + ": missing required key \"" + key + "\"");
  return *it;
}

inline double as_double(const json& j, const std::string& at) {
  if (!j.is_number()) throw SchemaError(at + ": expected a number");
  return j.get<double>();
}

inline std::int64_t as_int(const json& j, const std::string& at) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) {
    const double v = j.get<double>();
    const auto r = static_cast<std::int64_t>(v);
    if (static_cast<double>(r) == v) return r;
  }
  throw SchemaError(at + ": expected an integer");
}

inline std::string as_string(const json& j, const std::string& at) {
  if (!j.is_string()) throw SchemaError(at + ": expected a string");
  return j.get<std::string>();
}

inline double num_at(const json& j, const char* key, const std::string& at) {
  return as_double(member(j, key, at), at + "." + key);
}

inline std::int64_t int_at(const json& j, const char* key, const std::string& at) {
  return as_int(member(j, key, at), at + "." + key);
}

inline std::string str_at(const json& j, const char* key, const std::string& at) {
  return as_string(member(j, key, at), at + "." + key);
}

inline void check_version(const json& j, const std::string& source) {
  const std::int64_t v = int_at(j, "schema_version", source);
  if (v != kSchemaVersion) {
    throw SchemaError(source + ": unsupported schema_version " + std::to_string(v) +
                      " (this build reads version " + std::to_string(kSchemaVersion) + ")");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Network documents: the MLP shape plus how it will be trained. The layer
// list is the actor network for ddpg; the critic is derived from it.

struct NetworkDoc {
  Algorithm algorithm = Algorithm::DQN;
  int batch_size = 1;
  std::vector<graph::LayerSpec> layers;
};

inline std::vector<graph::LayerSpec> parse_layers(const json& arr, const std::string& at) {
  detail::expect_array(arr, at);
  std::vector<graph::LayerSpec> layers;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string lat = at + "[" + std::to_string(i) + "]";
    const json& l = arr[i];
    graph::LayerSpec spec{};
    spec.kind = graph::layer_kind_from_string(detail::str_at(l, "kind", lat));
    if (spec.kind == graph::LayerKind::Dense) {
      detail::check_keys(l, {"kind", "in", "out"}, lat);
      spec.in_dim = static_cast<int>(detail::int_at(l, "in", lat));
      spec.out_dim = static_cast<int>(detail::int_at(l, "out", lat));
    } else {
      detail::check_keys(l, {"kind"}, lat);
    }
    layers.push_back(spec);
  }
  graph::validate_network(layers);
  return layers;
}

inline json layers_json(const std::vector<graph::LayerSpec>& layers) {
  json arr = json::array();
  for (const auto& l : layers) {
    json e;
    e["kind"] = std::string(graph::to_string(l.kind));
    if (l.kind == graph::LayerKind::Dense) {
      e["in"] = l.in_dim;
      e["out"] = l.out_dim;
    }
    arr.push_back(std::move(e));
  }
  return arr;
}

inline NetworkDoc parse_network_doc(const json& j, const std::string& source) {
  detail::check_keys(j, {"schema_version", "algorithm", "batch_size", "layers"}, source);
  detail::check_version(j, source);
  NetworkDoc doc;
  doc.algorithm = algorithm_from_string(detail::str_at(j, "algorithm", source));
  doc.batch_size = static_cast<int>(detail::int_at(j, "batch_size", source));
  if (doc.batch_size < 1) throw SchemaError(source + ".batch_size: must be >= 1");
  doc.layers = parse_layers(detail::member(j, "layers", source), source + ".layers");
  return doc;
}

inline NetworkDoc load_network_doc(const std::string& path) {
  return parse_network_doc(parse_json(read_file(path), path), path);
}

inline json network_doc_json(const NetworkDoc& doc) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["algorithm"] = std::string(to_string(doc.algorithm));
  j["batch_size"] = doc.batch_size;
  j["layers"] = layers_json(doc.layers);
  return j;
}

// ---------------------------------------------------------------------------
// Device and link profiles

inline json profiles_json(const cost::ProfileSet& ps) {
  json j;
  j["schema_version"] = kSchemaVersion;
  json devs = json::array();
  for (const auto& d : ps.devices) {
    json e;
    e["device"] = std::string(to_string(d.id));
    e["clock_hz"] = d.clock_hz;
    json fpc;
    for (const auto& [prec, v] : d.flops_per_cycle) {
      fpc[std::string(to_string(prec))] = v;
    }
    e["flops_per_cycle"] = std::move(fpc);
    e["init_time_s"] = d.init_time_s;
    e["mem_bandwidth_bytes_per_s"] = d.mem_bandwidth_bytes_per_s;
    e["capacity_bytes"] = d.resource_capacity_bytes;
    devs.push_back(std::move(e));
  }
  j["devices"] = std::move(devs);
  json links = json::array();
  for (const auto& l : ps.links) {
    json e;
    e["src"] = std::string(to_string(l.src));
    e["dst"] = std::string(to_string(l.dst));
    e["bandwidth_bytes_per_s"] = l.bandwidth_bytes_per_s;
    e["latency_s"] = l.latency_s;
    links.push_back(std::move(e));
  }
  j["links"] = std::move(links);
  return j;
}

inline cost::ProfileSet parse_profiles(const json& j, const std::string& source) {
  detail::check_keys(j, {"schema_version", "devices", "links"}, source);
  detail::check_version(j, source);
  cost::ProfileSet ps;
  const json& devs = detail::member(j, "devices", source);
  detail::expect_array(devs, source + ".devices");
  for (std::size_t i = 0; i < devs.size(); ++i) {
    const std::string at = source + ".devices[" + std::to_string(i) + "]";
    const json& e = devs[i];
    detail::check_keys(e,
                       {"device", "clock_hz", "flops_per_cycle", "init_time_s",
                        "mem_bandwidth_bytes_per_s", "capacity_bytes"},
                       at);
    cost::DeviceProfile d;
    d.id = device_from_string(detail::str_at(e, "device", at));
    d.clock_hz = detail::num_at(e, "clock_hz", at);
    d.init_time_s = detail::num_at(e, "init_time_s", at);
    d.mem_bandwidth_bytes_per_s = detail::num_at(e, "mem_bandwidth_bytes_per_s", at);
    d.resource_capacity_bytes = detail::num_at(e, "capacity_bytes", at);
    const json& fpc = detail::member(e, "flops_per_cycle", at);
    detail::expect_object(fpc, at + ".flops_per_cycle");
    for (auto it = fpc.begin(); it != fpc.end(); ++it) {
      d.flops_per_cycle[precision_from_string(it.key())] =
          detail::as_double(it.value(), at + ".flops_per_cycle." + it.key());
    }
    ps.devices.push_back(std::move(d));
  }
  const json& links = detail::member(j, "links", source);
  detail::expect_array(links, source + ".links");
  for (std::size_t i = 0; i < links.size(); ++i) {
    const std::string at = source + ".links[" + std::to_string(i) + "]";
    const json& e = links[i];
    detail::check_keys(e, {"src", "dst", "bandwidth_bytes_per_s", "latency_s"}, at);
    cost::LinkProfile l;
    l.src = device_from_string(detail::str_at(e, "src", at));
    l.dst = device_from_string(detail::str_at(e, "dst", at));
    l.bandwidth_bytes_per_s = detail::num_at(e, "bandwidth_bytes_per_s", at);
    l.latency_s = detail::num_at(e, "latency_s", at);
    ps.links.push_back(l);
  }
  ps.validate();
  return ps;
}

inline cost::ProfileSet load_profiles(const std::string& path) {
  return parse_profiles(parse_json(read_file(path), path), path);
}

// ---------------------------------------------------------------------------
// Compute graph export (informational; the graph is always rebuilt from the
// network document, never parsed back)

inline json graph_json(const graph::ComputeGraph& g) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["algorithm"] = std::string(to_string(g.algorithm));
  j["batch_size"] = g.batch_size;
  json nodes = json::array();
  for (const auto& n : g.nodes) {
    json e;
    e["id"] = n.id;
    e["role"] = std::string(graph::to_string(n.role));
    e["kind"] = std::string(graph::to_string(n.kind));
    e["pass"] = std::string(graph::to_string(n.pass));
    e["layer"] = n.layer;
    e["flops"] = n.flops;
    e["bytes_in"] = n.bytes_in;
    e["bytes_out"] = n.bytes_out;
    e["param_count"] = n.param_count;
    nodes.push_back(std::move(e));
  }
  j["nodes"] = std::move(nodes);
  json edges = json::array();
  for (const auto& [u, v] : g.edges) edges.push_back(json::array({u, v}));
  j["edges"] = std::move(edges);
  return j;
}

// ---------------------------------------------------------------------------
// Cost tables. The JSON form is the machine interface (the partition command
// reads it back); the CSV form is for spreadsheets.

inline json cost_table_json(const graph::ComputeGraph& g, const cost::CostTable& t) {
  json j;
  j["schema_version"] = kSchemaVersion;
  json caps;
  for (const auto& [dev, cap] : t.capacity_bytes) caps[std::string(to_string(dev))] = cap;
  j["capacity_bytes"] = std::move(caps);
  json entries = json::array();
  for (const auto& [key, time] : t.time_s) {
    const auto& [node, dev] = key;
    json e;
    e["node"] = node;
    e["device"] = std::string(to_string(dev));
    const bool mm = g.nodes[static_cast<std::size_t>(node)].kind == graph::NodeKind::MM;
    e["precision"] = std::string(to_string(mm ? cost::native_mm_precision(dev) : Precision::FP32));
    e["time_s"] = time;
    e["footprint_bytes"] = t.footprint_of(node, dev);
    entries.push_back(std::move(e));
  }
  j["entries"] = std::move(entries);
  json transfers = json::array();
  for (const auto& [edge, by_pair] : t.transfer_s) {
    for (const auto& [devs, time] : by_pair) {
      json e;
      e["src_node"] = edge.first;
      e["dst_node"] = edge.second;
      e["src_device"] = std::string(to_string(devs.first));
      e["dst_device"] = std::string(to_string(devs.second));
      e["time_s"] = time;
      transfers.push_back(std::move(e));
    }
  }
  j["transfers"] = std::move(transfers);
  return j;
}

inline cost::CostTable parse_cost_table(const json& j, const std::string& source) {
  detail::check_keys(j, {"schema_version", "capacity_bytes", "entries", "transfers"}, source);
  detail::check_version(j, source);
  cost::CostTable t;
  const json& caps = detail::member(j, "capacity_bytes", source);
  detail::expect_object(caps, source + ".capacity_bytes");
  for (auto it = caps.begin(); it != caps.end(); ++it) {
    t.capacity_bytes[device_from_string(it.key())] =
        detail::as_double(it.value(), source + ".capacity_bytes." + it.key());
  }
  const json& entries = detail::member(j, "entries", source);
  detail::expect_array(entries, source + ".entries");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::string at = source + ".entries[" + std::to_string(i) + "]";
    const json& e = entries[i];
    detail::check_keys(e, {"node", "device", "precision", "time_s", "footprint_bytes"}, at);
    const int node = static_cast<int>(detail::int_at(e, "node", at));
    const Device dev = device_from_string(detail::str_at(e, "device", at));
    if (e.contains("precision")) precision_from_string(detail::str_at(e, "precision", at));
    if (t.time_s.count({node, dev}) != 0) {
      throw SchemaError(at + ": duplicate entry for node " + std::to_string(node));
    }
    t.time_s[{node, dev}] = detail::num_at(e, "time_s", at);
    t.footprint_bytes[{node, dev}] = detail::num_at(e, "footprint_bytes", at);
  }
  const json& transfers = detail::member(j, "transfers", source);
  detail::expect_array(transfers, source + ".transfers");
  for (std::size_t i = 0; i < transfers.size(); ++i) {
    const std::string at = source + ".transfers[" + std::to_string(i) + "]";
    const json& e = transfers[i];
    detail::check_keys(e, {"src_node", "dst_node", "src_device", "dst_device", "time_s"}, at);
    const int u = static_cast<int>(detail::int_at(e, "src_node", at));
    const int v = static_cast<int>(detail::int_at(e, "dst_node", at));
    const Device du = device_from_string(detail::str_at(e, "src_device", at));
    const Device dv = device_from_string(detail::str_at(e, "dst_device", at));
    t.transfer_s[{u, v}][{du, dv}] = detail::num_at(e, "time_s", at);
  }
  return t;
}

inline cost::CostTable load_cost_table(const std::string& path) {
  return parse_cost_table(parse_json(read_file(path), path), path);
}

inline std::string cost_table_csv(const graph::ComputeGraph& g, const cost::CostTable& t) {
  std::string out = "node_id,role,kind,device,precision,time_s,footprint_bytes\n";
  for (const auto& [key, time] : t.time_s) {
    const auto& [node, dev] = key;
    const auto& n = g.nodes[static_cast<std::size_t>(node)];
    const bool mm = n.kind == graph::NodeKind::MM;
    out += std::to_string(node);
    out += ',';
    out += graph::to_string(n.role);
    out += ',';
    out += graph::to_string(n.kind);
    out += ',';
    out += to_string(dev);
    out += ',';
    out += to_string(mm ? cost::native_mm_precision(dev) : Precision::FP32);
    out += ',';
    out += fmt_full(time);
    out += ',';
    out += fmt_full(t.footprint_of(node, dev));
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Assignments and schedules

inline json assignment_json(const graph::ComputeGraph& g, const partition::Assignment& asg,
                            double makespan_model_s, double makespan_simulated_s,
                            std::int64_t nodes_explored) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["algorithm"] = std::string(to_string(g.algorithm));
  j["batch_size"] = g.batch_size;
  j["makespan_model_s"] = makespan_model_s;
  j["makespan_simulated_s"] = makespan_simulated_s;
  j["nodes_explored"] = nodes_explored;
  json nodes = json::array();
  for (const auto& n : g.nodes) {
    json e;
    e["node"] = n.id;
    e["role"] = std::string(graph::to_string(n.role));
    e["device"] = std::string(to_string(asg.at(n.id)));
    nodes.push_back(std::move(e));
  }
  j["nodes"] = std::move(nodes);
  return j;
}

inline partition::Assignment parse_assignment(const json& j, const std::string& source) {
  detail::check_keys(j,
                     {"schema_version", "algorithm", "batch_size", "makespan_model_s",
                      "makespan_simulated_s", "nodes_explored", "nodes"},
                     source);
  detail::check_version(j, source);
  partition::Assignment asg;
  const json& nodes = detail::member(j, "nodes", source);
  detail::expect_array(nodes, source + ".nodes");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string at = source + ".nodes[" + std::to_string(i) + "]";
    const json& e = nodes[i];
    detail::check_keys(e, {"node", "role", "device"}, at);
    const int node = static_cast<int>(detail::int_at(e, "node", at));
    if (asg.device_of.count(node) != 0) {
      throw SchemaError(at + ": node " + std::to_string(node) + " assigned twice");
    }
    asg.device_of[node] = device_from_string(detail::str_at(e, "device", at));
  }
  return asg;
}

inline partition::Assignment load_assignment(const std::string& path) {
  return parse_assignment(parse_json(read_file(path), path), path);
}

// Gantt rows for the simulated timeline, ordered by start time so the file
// reads top to bottom as execution order.
inline std::string schedule_csv(const graph::ComputeGraph& g, const partition::Assignment& asg,
                                const partition::Schedule& s) {
  std::vector<int> order;
  for (const auto& n : g.nodes) order.push_back(n.id);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto sa = s.start_s[static_cast<std::size_t>(a)];
    const auto sb = s.start_s[static_cast<std::size_t>(b)];
    return sa != sb ? sa < sb : a < b;
  });
  std::string out = "node_id,role,device,start_s,end_s\n";
  for (int id : order) {
    const auto& n = g.nodes[static_cast<std::size_t>(id)];
    out += std::to_string(id);
    out += ',';
    out += graph::to_string(n.role);
    out += ',';
    out += to_string(asg.at(id));
    out += ',';
    out += fmt_full(s.start_s[static_cast<std::size_t>(id)]);
    out += ',';
    out += fmt_full(s.end_s[static_cast<std::size_t>(id)]);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training configs

inline train::DqnConfig parse_train_config(const json& j, const std::string& source) {
  detail::check_keys(j,
                     {"schema_version", "algorithm", "layers", "batch_size", "gamma", "eps_start",
                      "eps_end", "eps_decay_steps", "target_sync_period", "learning_rate",
                      "episodes", "max_steps_per_episode", "replay_capacity", "warmup_steps",
                      "train_period", "grad_clip_norm", "seed", "loss_scale",
                      "quantization_delay_s", "divergence_window"},
                     source);
  detail::check_version(j, source);
  train::DqnConfig cfg;
  if (j.contains("algorithm")) {
    const Algorithm a = algorithm_from_string(detail::str_at(j, "algorithm", source));
    if (a != Algorithm::DQN) {
      throw ConfigError(source + ": the trainer implements dqn only");
    }
  }
  if (j.contains("layers")) cfg.network = parse_layers(j["layers"], source + ".layers");
  const auto geti = [&](const char* key, int& field) {
    if (j.contains(key)) field = static_cast<int>(detail::int_at(j, key, source));
  };
  const auto getd = [&](const char* key, double& field) {
    if (j.contains(key)) field = detail::num_at(j, key, source);
  };
  geti("batch_size", cfg.batch_size);
  getd("gamma", cfg.gamma);
  getd("eps_start", cfg.eps_start);
  getd("eps_end", cfg.eps_end);
  geti("eps_decay_steps", cfg.eps_decay_steps);
  geti("target_sync_period", cfg.target_sync_period);
  getd("learning_rate", cfg.learning_rate);
  geti("episodes", cfg.episodes);
  geti("max_steps_per_episode", cfg.max_steps_per_episode);
  geti("replay_capacity", cfg.replay_capacity);
  geti("warmup_steps", cfg.warmup_steps);
  geti("train_period", cfg.train_period);
  getd("grad_clip_norm", cfg.grad_clip_norm);
  getd("quantization_delay_s", cfg.quantization_delay_s);
  geti("divergence_window", cfg.divergence_window);
  if (j.contains("seed")) {
    const std::int64_t s = detail::int_at(j, "seed", source);
    if (s < 0 || s > 0xFFFFFFFFll) throw SchemaError(source + ".seed: out of range");
    cfg.seed = static_cast<std::uint32_t>(s);
  }
  if (j.contains("loss_scale")) {
    const json& ls = j["loss_scale"];
    const std::string at = source + ".loss_scale";
    detail::check_keys(ls, {"init", "growth", "backoff", "window", "min"}, at);
    if (ls.contains("init")) cfg.scale_init = detail::num_at(ls, "init", at);
    if (ls.contains("growth")) cfg.scale_growth = detail::num_at(ls, "growth", at);
    if (ls.contains("backoff")) cfg.scale_backoff = detail::num_at(ls, "backoff", at);
    if (ls.contains("window")) cfg.scale_window = static_cast<int>(detail::int_at(ls, "window", at));
    if (ls.contains("min")) cfg.scale_min = detail::num_at(ls, "min", at);
  }
  cfg.validate();
  return cfg;
}

inline train::DqnConfig load_train_config(const std::string& path) {
  return parse_train_config(parse_json(read_file(path), path), path);
}

// The fully resolved config, defaults included, as the trainer will use it.
inline json train_config_json(const train::DqnConfig& cfg) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["algorithm"] = "dqn";
  j["layers"] = layers_json(cfg.network);
  j["batch_size"] = cfg.batch_size;
  j["gamma"] = cfg.gamma;
  j["eps_start"] = cfg.eps_start;
  j["eps_end"] = cfg.eps_end;
  j["eps_decay_steps"] = cfg.eps_decay_steps;
  j["target_sync_period"] = cfg.target_sync_period;
  j["learning_rate"] = cfg.learning_rate;
  j["episodes"] = cfg.episodes;
  j["max_steps_per_episode"] = cfg.max_steps_per_episode;
  j["replay_capacity"] = cfg.replay_capacity;
  j["warmup_steps"] = cfg.warmup_steps;
  j["train_period"] = cfg.train_period;
  j["grad_clip_norm"] = cfg.grad_clip_norm;
  j["seed"] = cfg.seed;
  j["loss_scale"] = {{"init", cfg.scale_init},
                     {"growth", cfg.scale_growth},
                     {"backoff", cfg.scale_backoff},
                     {"window", cfg.scale_window},
                     {"min", cfg.scale_min}};
  j["quantization_delay_s"] = cfg.quantization_delay_s;
  j["divergence_window"] = cfg.divergence_window;
  return j;
}

// ---------------------------------------------------------------------------
// Training reports

inline std::string_view to_string(train::EngineMode m) {
  return m == train::EngineMode::Mixed ? "mixed" : "fp32";
}

// Per-episode curve for one run.
inline std::string report_csv(const train::TrainReport& r) {
  std::string out = "episode,reward,moving_avg,loss_scale\n";
  for (std::size_t i = 0; i < r.episode_reward.size(); ++i) {
    out += std::to_string(i + 1);
    out += ',';
    out += fmt_full(r.episode_reward[i]);
    out += ',';
    out += fmt_full(r.moving_avg[i]);
    out += ',';
    out += fmt_full(r.loss_scale[i]);
    out += '\n';
  }
  return out;
}

// One run's scalars for the cross-seed summary. Wall-clock fields are real
// measurements and intentionally excluded: they would break byte-identical
// reruns and belong in logs, not artifacts.
inline json report_summary_json(const train::TrainReport& r) {
  json j;
  j["mode"] = std::string(to_string(r.mode));
  j["seed"] = r.seed;
  j["episodes"] = r.episode_reward.size();
  j["final_moving_avg"] = r.final_moving_avg();
  j["env_steps"] = r.env_steps;
  j["train_steps"] = r.train_steps;
  j["skipped_steps"] = r.skipped_steps;
  // End-of-episode scaler values. Duplicates the CSV column so the summary
  // alone is enough to inspect scaler behaviour across seeds.
  j["loss_scale"] = r.loss_scale;
  return j;
}

// ---------------------------------------------------------------------------
// Run manifests: what command produced this directory, from which inputs.
// Input files are fingerprinted by content hash. Nothing time- or
// host-dependent goes in, so a rerun writes the identical manifest.

inline json manifest_json(const std::string& command,
                          const std::vector<std::pair<std::string, std::string>>& input_paths,
                          const json& options, const std::vector<std::string>& outputs) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["tool"] = "hetpart";
  j["tool_version"] = std::string(kVersion);
  j["command"] = command;
  json inputs = json::object();
  for (const auto& [name, content] : input_paths) {
    inputs[name] = "fnv1a64:" + fnv1a64_hex(content);
  }
  j["inputs"] = std::move(inputs);
  j["options"] = options;
  j["outputs"] = outputs;
  return j;
}

inline void write_json_file(const std::string& path, const json& j) {
  atomic_write_file(path, j.dump(2) + "\n");
}

}  // namespace hetpart::io

#endif  // HETPART_IO_HPP_
