// Copyright 2026 hetpart contributors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "hetpart/cost.hpp"
#include "hetpart/graph.hpp"
#include "hetpart/io.hpp"
#include "hetpart/partition.hpp"
#include "hetpart/train.hpp"

namespace io = hetpart::io;
namespace fs = std::filesystem;
using hetpart::Algorithm;
using hetpart::ConfigError;
using hetpart::Device;
using hetpart::SchemaError;

namespace {

// A scratch directory per test run; removed on destruction so reruns start
// clean even after a failed assertion.
struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("hetpart_io_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::vector<hetpart::graph::LayerSpec> small_net() {
  using hetpart::graph::LayerKind;
  return {{LayerKind::Dense, 4, 8}, {LayerKind::ReLU, 0, 0}, {LayerKind::Dense, 8, 2}};
}

}  // namespace

TEST_CASE("device profiles survive a serialize/parse round trip") {
  const auto ps = hetpart::cost::default_profiles();
  const io::json j = io::profiles_json(ps);
  const auto back = io::parse_profiles(j, "roundtrip");
  // Re-serializing the parsed set must reproduce the document bit for bit;
  // nlohmann stores doubles losslessly and dumps shortest-round-trip forms.
  CHECK(io::profiles_json(back).dump(2) == j.dump(2));
  CHECK(back.devices.size() == ps.devices.size());
  CHECK(back.links.size() == ps.links.size());
}

TEST_CASE("network documents survive a round trip") {
  io::NetworkDoc doc;
  doc.algorithm = Algorithm::DQN;
  doc.batch_size = 32;
  doc.layers = small_net();
  const io::json j = io::network_doc_json(doc);
  const auto back = io::parse_network_doc(j, "roundtrip");
  CHECK(io::network_doc_json(back).dump() == j.dump());
  CHECK(back.layers.size() == 3);
}

TEST_CASE("cost tables survive a round trip") {
  const auto g = hetpart::graph::build_training_graph(small_net(), Algorithm::DQN, 16);
  const auto t = hetpart::cost::build_cost_table(g, hetpart::cost::default_profiles());
  const io::json j = io::cost_table_json(g, t);
  const auto back = io::parse_cost_table(j, "roundtrip");
  CHECK(back.time_s == t.time_s);
  CHECK(back.footprint_bytes == t.footprint_bytes);
  CHECK(back.transfer_s == t.transfer_s);
  CHECK(back.capacity_bytes == t.capacity_bytes);
}

TEST_CASE("assignments survive a round trip") {
  const auto g = hetpart::graph::build_training_graph(small_net(), Algorithm::DQN, 16);
  const auto t = hetpart::cost::build_cost_table(g, hetpart::cost::default_profiles());
  const auto r = hetpart::partition::solve_exact(hetpart::partition::build_ilp(g, t));
  const io::json j = io::assignment_json(g, r.assignment, r.makespan_s, 0.0, r.nodes_explored);
  const auto back = io::parse_assignment(j, "roundtrip");
  CHECK(back.device_of == r.assignment.device_of);
}

TEST_CASE("training configs survive a round trip") {
  hetpart::train::DqnConfig cfg;
  cfg.network = small_net();
  cfg.learning_rate = 2.5e-4;
  cfg.eps_decay_steps = 7777;
  cfg.scale_window = 123;
  const io::json j = io::train_config_json(cfg);
  const auto back = io::parse_train_config(j, "roundtrip");
  CHECK(io::train_config_json(back).dump(2) == j.dump(2));
}

TEST_CASE("unknown keys are rejected with their path") {
  io::json j = io::profiles_json(hetpart::cost::default_profiles());
  j["devices"][0]["clokc_hz"] = 1.0;  // deliberate typo
  CHECK_THROWS_MATCHES(io::parse_profiles(j, "p.json"), SchemaError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("clokc_hz")));
}

TEST_CASE("missing required keys name the key") {
  io::json j = io::profiles_json(hetpart::cost::default_profiles());
  j["devices"][1].erase("clock_hz");
  CHECK_THROWS_MATCHES(io::parse_profiles(j, "p.json"), SchemaError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("clock_hz")));
}

TEST_CASE("syntax errors report line and column") {
  const std::string text = "{\n  \"a\": 1,\n  \"b\": }\n";
  try {
    io::parse_json(text, "broken.json");
    FAIL("expected a SchemaError");
  } catch (const SchemaError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("broken.json") != std::string::npos);
    CHECK(msg.find("line 3") != std::string::npos);
  }
}

TEST_CASE("integers may arrive as integral floats but not fractions") {
  io::json j = 32.0;
  CHECK(io::detail::as_int(j, "x") == 32);
  j = 32.5;
  CHECK_THROWS_AS(io::detail::as_int(j, "x"), SchemaError);
}

TEST_CASE("unsupported schema versions are refused") {
  io::json j = io::profiles_json(hetpart::cost::default_profiles());
  j["schema_version"] = 999;
  CHECK_THROWS_MATCHES(
      io::parse_profiles(j, "p.json"), SchemaError,
      Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("999")));
}

TEST_CASE("atomic writes land complete and leave no temp file") {
  TempDir tmp;
  const std::string path = tmp.file("doc.json");
  io::atomic_write_file(path, "first");
  io::atomic_write_file(path, "second version");
  CHECK(io::read_file(path) == "second version");
  CHECK_FALSE(fs::exists(path + ".tmp"));
}

TEST_CASE("missing files raise a config error naming the path") {
  CHECK_THROWS_MATCHES(io::read_file("/nonexistent/nowhere.json"), ConfigError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("nowhere.json")));
}

TEST_CASE("content fingerprints match the published fnv1a vectors") {
  CHECK(io::fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(io::fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(io::fnv1a64("foobar") == 0x85944171f73967e8ull);
  CHECK(io::fnv1a64_hex("") == "cbf29ce484222325");
}

TEST_CASE("csv cells render doubles that parse back exactly") {
  const double values[] = {0.1, 1.0 / 3.0, 6.103515625e-05, 65504.0,
                           std::numeric_limits<double>::denorm_min(),
                           std::numeric_limits<double>::max(), -2.718281828459045e2};
  for (double v : values) {
    const std::string s = io::fmt_full(v);
    CHECK(std::strtod(s.c_str(), nullptr) == v);
  }
}

TEST_CASE("duplicate cost entries and assignment rows are rejected") {
  const auto g = hetpart::graph::build_training_graph(small_net(), Algorithm::DQN, 16);
  const auto t = hetpart::cost::build_cost_table(g, hetpart::cost::default_profiles());

  io::json cj = io::cost_table_json(g, t);
  cj["entries"].push_back(cj["entries"][0]);
  CHECK_THROWS_MATCHES(io::parse_cost_table(cj, "c.json"), SchemaError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("duplicate")));

  const auto r = hetpart::partition::solve_exact(hetpart::partition::build_ilp(g, t));
  io::json aj = io::assignment_json(g, r.assignment, r.makespan_s, 0.0, r.nodes_explored);
  aj["nodes"].push_back(aj["nodes"][0]);
  CHECK_THROWS_MATCHES(io::parse_assignment(aj, "a.json"), SchemaError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("assigned twice")));
}

TEST_CASE("the trainer config loader refuses non-dqn algorithms") {
  hetpart::train::DqnConfig cfg;
  cfg.network = small_net();
  io::json j = io::train_config_json(cfg);
  j["algorithm"] = "ddpg";
  CHECK_THROWS_AS(io::parse_train_config(j, "t.json"), ConfigError);
  j["algorithm"] = "dqn";
  j["seed"] = -3;
  CHECK_THROWS_AS(io::parse_train_config(j, "t.json"), SchemaError);
}

TEST_CASE("csv writers emit the documented headers") {
  const auto g = hetpart::graph::build_training_graph(small_net(), Algorithm::DQN, 16);
  const auto t = hetpart::cost::build_cost_table(g, hetpart::cost::default_profiles());
  const std::string cost_csv = io::cost_table_csv(g, t);
  CHECK(cost_csv.rfind("node_id,role,kind,device,precision,time_s,footprint_bytes\n", 0) == 0);
  // One line per (node, device) cost entry plus the header.
  const auto lines = std::count(cost_csv.begin(), cost_csv.end(), '\n');
  CHECK(lines == static_cast<long>(t.time_s.size()) + 1);

  const auto r = hetpart::partition::solve_exact(hetpart::partition::build_ilp(g, t));
  const auto sched = hetpart::partition::simulate_schedule(
      r.assignment, g, t, hetpart::cost::default_profiles());
  const std::string sched_csv = io::schedule_csv(g, r.assignment, sched);
  CHECK(sched_csv.rfind("node_id,role,device,start_s,end_s\n", 0) == 0);
  CHECK(std::count(sched_csv.begin(), sched_csv.end(), '\n') ==
        static_cast<long>(g.nodes.size()) + 1);

  hetpart::train::TrainReport rep;
  rep.episode_reward = {10.0, 20.0};
  rep.moving_avg = {10.0, 15.0};
  rep.loss_scale = {65536.0, 65536.0};
  const std::string run_csv = io::report_csv(rep);
  CHECK(run_csv.rfind("episode,reward,moving_avg,loss_scale\n", 0) == 0);
  CHECK(std::count(run_csv.begin(), run_csv.end(), '\n') == 3);
}

TEST_CASE("manifests fingerprint inputs and never embed timestamps") {
  const io::json m = io::manifest_json(
      "profile", {{"graph", "content-a"}, {"profiles", "content-b"}},
      io::json{{"batch_size", 32}}, {"cost.json", "manifest.json"});
  CHECK(m["inputs"]["graph"] ==
        "fnv1a64:" + io::fnv1a64_hex("content-a"));
  const std::string dump = m.dump();
  CHECK(dump.find("time") == std::string::npos);
  CHECK(dump.find("date") == std::string::npos);
  // Identical call, identical bytes: manifests must be rerun-stable.
  const io::json m2 = io::manifest_json(
      "profile", {{"graph", "content-a"}, {"profiles", "content-b"}},
      io::json{{"batch_size", 32}}, {"cost.json", "manifest.json"});
  CHECK(m.dump(2) == m2.dump(2));
}
