// Copyright 2026 hetpart contributors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end.
//
//   hetpart profile    build the compute graph and per-device cost table
//   hetpart partition  solve the assignment problem for a cost table
//   hetpart sweep      re-solve across batch sizes and tabulate the shift
//   hetpart train      run cart-pole DQN with a mixed-precision plan
//   hetpart verify     run built-in self-check suites
//
// Every file-producing command takes --out DIR and writes a manifest.json
// fingerprinting its inputs. Outputs are deterministic: rerunning the same
// command over the same inputs reproduces every file byte for byte.
//
// Exit codes: 0 success (or a sweep with flagged violations), 1 self-check
// failure, 2 bad input (schema, config, capability, graph, CLI usage),
// 3 infeasible partition instance, 4 training divergence.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "hetpart/common.hpp"
#include "hetpart/cost.hpp"
#include "hetpart/errors.hpp"
#include "hetpart/graph.hpp"
#include "hetpart/io.hpp"
#include "hetpart/partition.hpp"
#include "hetpart/train.hpp"
#include "hetpart/verify.hpp"

namespace {

namespace hp = hetpart;
using hp::io::json;

struct OutDir {
  std::filesystem::path dir;

  explicit OutDir(const std::string& path) : dir(path) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw hp::ConfigError("cannot create output directory " + path + ": " + ec.message());
  }

  std::string file(const std::string& name) const { return (dir / name).string(); }
};

// Inputs get fingerprinted into the manifest; keep path, raw bytes together.
struct LoadedInput {
  std::string path;
  std::string content;
};

LoadedInput slurp(const std::string& path) { return {path, hp::io::read_file(path)}; }

hp::cost::ProfileSet resolve_profiles(const std::string& path,
                                      std::vector<LoadedInput>& inputs) {
  if (path.empty()) return hp::cost::default_profiles();
  LoadedInput in = slurp(path);
  hp::cost::ProfileSet ps = hp::io::parse_profiles(hp::io::parse_json(in.content, path), path);
  inputs.push_back(std::move(in));
  return ps;
}

void write_manifest(const OutDir& out, const std::string& command,
                    const std::vector<LoadedInput>& inputs, const json& options,
                    std::vector<std::string> outputs) {
  std::vector<std::pair<std::string, std::string>> fingerprints;
  for (const auto& in : inputs) fingerprints.emplace_back(in.path, in.content);
  outputs.push_back("manifest.json");
  std::sort(outputs.begin(), outputs.end());
  hp::io::write_json_file(out.file("manifest.json"),
                          hp::io::manifest_json(command, fingerprints, options, outputs));
}

// Rejects cost tables that were built from a different graph before the
// mismatch can surface as a confusing infeasibility report.
void check_table_matches_graph(const hp::graph::ComputeGraph& g, const hp::cost::CostTable& t,
                               const std::string& source) {
  for (const auto& n : g.nodes) {
    if (t.devices_of(n.id).empty()) {
      throw hp::ConfigError(source + ": no cost entries for node " + std::to_string(n.id) +
                            "; was the table built from this graph?");
    }
  }
  for (const auto& [key, unused] : t.time_s) {
    (void)unused;
    if (key.first < 0 || key.first >= static_cast<int>(g.nodes.size())) {
      throw hp::ConfigError(source + ": entry for node " + std::to_string(key.first) +
                            " which the graph does not have");
    }
  }
}

int count_mm_on(const hp::graph::ComputeGraph& g, const hp::partition::Assignment& asg,
                hp::Device d) {
  int c = 0;
  for (const auto& n : g.nodes) {
    if (n.kind == hp::graph::NodeKind::MM && asg.at(n.id) == d) ++c;
  }
  return c;
}

json device_counts_json(const hp::graph::ComputeGraph& g, const hp::partition::Assignment& asg) {
  json counts;
  for (hp::Device d : {hp::Device::PS, hp::Device::PL, hp::Device::AIE}) {
    counts[std::string(hp::to_string(d))] = asg.count_on(d);
  }
  (void)g;
  return counts;
}

// ---------------------------------------------------------------------------
// profile

int run_profile(const std::string& graph_path, const std::string& profiles_path,
                const std::string& out_path) {
  OutDir out(out_path);
  std::vector<LoadedInput> inputs;
  inputs.push_back(slurp(graph_path));
  const hp::io::NetworkDoc doc =
      hp::io::parse_network_doc(hp::io::parse_json(inputs[0].content, graph_path), graph_path);
  const hp::cost::ProfileSet profiles = resolve_profiles(profiles_path, inputs);

  const hp::graph::ComputeGraph g =
      hp::graph::build_training_graph(doc.layers, doc.algorithm, doc.batch_size);
  const hp::cost::CostTable table = hp::cost::build_cost_table(g, profiles);

  hp::io::write_json_file(out.file("graph.json"), hp::io::graph_json(g));
  hp::io::write_json_file(out.file("cost.json"), hp::io::cost_table_json(g, table));
  hp::io::atomic_write_file(out.file("cost.csv"), hp::io::cost_table_csv(g, table));

  int mm_nodes = 0;
  for (const auto& n : g.nodes) mm_nodes += n.kind == hp::graph::NodeKind::MM ? 1 : 0;
  json summary;
  summary["schema_version"] = hp::kSchemaVersion;
  summary["algorithm"] = std::string(hp::to_string(doc.algorithm));
  summary["batch_size"] = doc.batch_size;
  summary["node_count"] = g.nodes.size();
  summary["edge_count"] = g.edges.size();
  summary["mm_node_count"] = mm_nodes;
  const auto* pl = profiles.find_device(hp::Device::PL);
  const auto* aie = profiles.find_device(hp::Device::AIE);
  if (pl && aie) {
    if (auto f = hp::cost::crossover_flops(*pl, *aie, 0)) {
      summary["crossover_flops"] = *f;
    } else {
      summary["crossover_flops"] = nullptr;
    }
  }
  hp::io::write_json_file(out.file("summary.json"), summary);

  json options;
  options["graph"] = graph_path;
  options["profiles"] = profiles_path.empty() ? "default" : profiles_path;
  write_manifest(out, "profile", inputs, options,
                 {"graph.json", "cost.json", "cost.csv", "summary.json"});
  std::printf("profiled %zu nodes (%d matrix multiplies) at batch size %d\n", g.nodes.size(),
              mm_nodes, doc.batch_size);
  return 0;
}

// ---------------------------------------------------------------------------
// partition

int run_partition(const std::string& graph_path, const std::string& cost_path,
                  const std::string& profiles_path, const std::string& out_path) {
  OutDir out(out_path);
  std::vector<LoadedInput> inputs;
  inputs.push_back(slurp(graph_path));
  const hp::io::NetworkDoc doc =
      hp::io::parse_network_doc(hp::io::parse_json(inputs[0].content, graph_path), graph_path);
  inputs.push_back(slurp(cost_path));
  const hp::cost::CostTable table =
      hp::io::parse_cost_table(hp::io::parse_json(inputs[1].content, cost_path), cost_path);
  const hp::cost::ProfileSet profiles = resolve_profiles(profiles_path, inputs);

  const hp::graph::ComputeGraph g =
      hp::graph::build_training_graph(doc.layers, doc.algorithm, doc.batch_size);
  check_table_matches_graph(g, table, cost_path);

  const hp::partition::IlpModel model = hp::partition::build_ilp(g, table);
  const double lower_bound = hp::partition::critical_path_lower_bound(model);
  const hp::partition::SolveResult r = hp::partition::solve_exact(model);
  const hp::partition::Schedule sim =
      hp::partition::simulate_schedule(r.assignment, g, table, profiles);

  hp::io::write_json_file(
      out.file("assignment.json"),
      hp::io::assignment_json(g, r.assignment, r.makespan_s, sim.makespan_s, r.nodes_explored));
  hp::io::atomic_write_file(out.file("schedule.csv"),
                            hp::io::schedule_csv(g, r.assignment, sim));

  json summary;
  summary["schema_version"] = hp::kSchemaVersion;
  summary["makespan_model_s"] = r.makespan_s;
  summary["makespan_simulated_s"] = sim.makespan_s;
  summary["lower_bound_s"] = lower_bound;
  summary["nodes_explored"] = r.nodes_explored;
  summary["device_node_counts"] = device_counts_json(g, r.assignment);
  summary["mm_nodes_on_aie"] = count_mm_on(g, r.assignment, hp::Device::AIE);
  hp::io::write_json_file(out.file("summary.json"), summary);

  json options;
  options["graph"] = graph_path;
  options["cost"] = cost_path;
  options["profiles"] = profiles_path.empty() ? "default" : profiles_path;
  write_manifest(out, "partition", inputs, options,
                 {"assignment.json", "schedule.csv", "summary.json"});
  std::printf("optimal makespan %.6g us (model form), %.6g us simulated; %d of %zu nodes on AIE\n",
              r.makespan_s * 1e6, sim.makespan_s * 1e6,
              r.assignment.count_on(hp::Device::AIE), g.nodes.size());
  return 0;
}

// ---------------------------------------------------------------------------
// sweep

int run_sweep(const std::string& graph_path, std::vector<int> batch_sizes,
              const std::string& profiles_path, const std::string& out_path) {
  if (batch_sizes.size() < 2) {
    throw hp::ConfigError("sweep needs at least two batch sizes (got " +
                          std::to_string(batch_sizes.size()) + ")");
  }
  std::sort(batch_sizes.begin(), batch_sizes.end());
  for (int b : batch_sizes) {
    if (b < 1) throw hp::ConfigError("batch sizes must be >= 1");
  }

  OutDir out(out_path);
  std::vector<LoadedInput> inputs;
  inputs.push_back(slurp(graph_path));
  const hp::io::NetworkDoc doc =
      hp::io::parse_network_doc(hp::io::parse_json(inputs[0].content, graph_path), graph_path);
  const hp::cost::ProfileSet profiles = resolve_profiles(profiles_path, inputs);

  struct Row {
    int batch_size;
    int mm_nodes, pl_mm, aie_mm;
    double model_s, sim_s, baseline_s, speedup;
  };
  std::vector<Row> rows;
  for (int bs : batch_sizes) {
    const hp::graph::ComputeGraph g =
        hp::graph::build_training_graph(doc.layers, doc.algorithm, bs);
    const hp::cost::CostTable table = hp::cost::build_cost_table(g, profiles);
    const hp::partition::SolveResult r =
        hp::partition::solve_exact(hp::partition::build_ilp(g, table));
    const hp::partition::Schedule sim =
        hp::partition::simulate_schedule(r.assignment, g, table, profiles);

    // Reference point: everything on the programmable logic at fp32.
    const hp::cost::CostTable fp32 = hp::cost::build_fp32_baseline_table(g, profiles);
    hp::partition::Assignment all_pl;
    for (const auto& n : g.nodes) all_pl.device_of[n.id] = hp::Device::PL;
    const hp::partition::Schedule base =
        hp::partition::simulate_schedule(all_pl, g, fp32, profiles);

    Row row;
    row.batch_size = bs;
    row.mm_nodes = 0;
    for (const auto& n : g.nodes) row.mm_nodes += n.kind == hp::graph::NodeKind::MM ? 1 : 0;
    row.pl_mm = count_mm_on(g, r.assignment, hp::Device::PL);
    row.aie_mm = count_mm_on(g, r.assignment, hp::Device::AIE);
    row.model_s = r.makespan_s;
    row.sim_s = sim.makespan_s;
    row.baseline_s = base.makespan_s;
    row.speedup = base.makespan_s / sim.makespan_s;
    rows.push_back(row);
  }

  std::string csv =
      "batch_size,mm_nodes,pl_mm_nodes,aie_mm_nodes,makespan_model_s,makespan_simulated_s,"
      "fp32_baseline_simulated_s,speedup_vs_fp32\n";
  for (const auto& r : rows) {
    csv += std::to_string(r.batch_size) + ',' + std::to_string(r.mm_nodes) + ',' +
           std::to_string(r.pl_mm) + ',' + std::to_string(r.aie_mm) + ',' +
           hp::io::fmt_full(r.model_s) + ',' + hp::io::fmt_full(r.sim_s) + ',' +
           hp::io::fmt_full(r.baseline_s) + ',' + hp::io::fmt_full(r.speedup) + '\n';
  }
  hp::io::atomic_write_file(out.file("sweep.csv"), csv);

  // The expected trend: larger batches shift matrix multiplies toward the
  // AI engines. Violations are flagged, not fatal; odd profiles can
  // legitimately produce them.
  json violations = json::array();
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].aie_mm < rows[i - 1].aie_mm) {
      violations.push_back({{"from_batch", rows[i - 1].batch_size},
                            {"to_batch", rows[i].batch_size},
                            {"aie_before", rows[i - 1].aie_mm},
                            {"aie_after", rows[i].aie_mm}});
    }
  }
  json summary;
  summary["schema_version"] = hp::kSchemaVersion;
  json jrows = json::array();
  for (const auto& r : rows) {
    jrows.push_back({{"batch_size", r.batch_size},
                     {"mm_nodes", r.mm_nodes},
                     {"pl_mm_nodes", r.pl_mm},
                     {"aie_mm_nodes", r.aie_mm},
                     {"makespan_model_s", r.model_s},
                     {"makespan_simulated_s", r.sim_s},
                     {"fp32_baseline_simulated_s", r.baseline_s},
                     {"speedup_vs_fp32", r.speedup}});
  }
  summary["rows"] = std::move(jrows);
  summary["aie_counts_nondecreasing"] = violations.empty();
  summary["violations"] = std::move(violations);
  hp::io::write_json_file(out.file("summary.json"), summary);

  json options;
  options["graph"] = graph_path;
  options["profiles"] = profiles_path.empty() ? "default" : profiles_path;
  options["batch_sizes"] = batch_sizes;
  write_manifest(out, "sweep", inputs, options, {"sweep.csv", "summary.json"});
  for (const auto& r : rows) {
    std::printf("batch %5d: %2d of %2d matrix multiplies on AIE, speedup %.3fx over fp32\n",
                r.batch_size, r.aie_mm, r.mm_nodes, r.speedup);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// train

int run_train(const std::string& config_path, const std::string& assignment_path,
              bool fp32_baseline, int num_seeds, const std::string& out_path) {
  if (num_seeds < 1) throw hp::ConfigError("--seeds must be >= 1");
  OutDir out(out_path);
  std::vector<LoadedInput> inputs;
  inputs.push_back(slurp(config_path));
  hp::train::DqnConfig cfg =
      hp::io::parse_train_config(hp::io::parse_json(inputs[0].content, config_path), config_path);

  if (const char* env = std::getenv("HETPART_SEED")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end == env || *end != '\0' || v > 0xFFFFFFFFul) {
      throw hp::ConfigError("HETPART_SEED must be an unsigned 32-bit integer, got \"" +
                            std::string(env) + "\"");
    }
    cfg.seed = static_cast<std::uint32_t>(v);
  }

  // Default: one quantized run under an assignment (given or derived).
  // --fp32 alone runs the plain baseline instead; --assignment plus --fp32
  // runs both variants and reports the reward error between them.
  const bool want_fp32 = fp32_baseline;
  const bool want_mixed = !fp32_baseline || !assignment_path.empty();

  std::vector<std::string> outputs;
  hp::partition::Assignment asg;
  if (want_mixed) {
    if (!assignment_path.empty()) {
      inputs.push_back(slurp(assignment_path));
      asg = hp::io::parse_assignment(hp::io::parse_json(inputs.back().content, assignment_path),
                                     assignment_path);
    } else {
      // Self-contained mode: derive the plan from the config's own network
      // under the built-in device profiles.
      const hp::graph::ComputeGraph g =
          hp::graph::build_training_graph(cfg.network, hp::Algorithm::DQN, cfg.batch_size);
      const hp::cost::ProfileSet profiles = hp::cost::default_profiles();
      const hp::cost::CostTable table = hp::cost::build_cost_table(g, profiles);
      const hp::partition::SolveResult r =
          hp::partition::solve_exact(hp::partition::build_ilp(g, table));
      const hp::partition::Schedule sim =
          hp::partition::simulate_schedule(r.assignment, g, table, profiles);
      asg = r.assignment;
      hp::io::write_json_file(out.file("assignment_used.json"),
                              hp::io::assignment_json(g, asg, r.makespan_s, sim.makespan_s,
                                                      r.nodes_explored));
      outputs.push_back("assignment_used.json");
    }
  }

  hp::io::write_json_file(out.file("config_resolved.json"), hp::io::train_config_json(cfg));
  outputs.push_back("config_resolved.json");

  std::vector<hp::train::TrainReport> mixed_runs, fp32_runs;
  json run_summaries = json::array();
  const auto run_mode = [&](hp::train::EngineMode mode,
                            std::vector<hp::train::TrainReport>& bucket) {
    for (int i = 0; i < num_seeds; ++i) {
      const std::uint32_t seed = cfg.seed + static_cast<std::uint32_t>(i);
      hp::train::TrainReport r = hp::train::train_run(
          cfg, mode, mode == hp::train::EngineMode::Mixed ? &asg : nullptr, seed);
      const std::string name = "train_" + std::string(hp::io::to_string(mode)) + "_seed" +
                               std::to_string(seed) + ".csv";
      hp::io::atomic_write_file(out.file(name), hp::io::report_csv(r));
      outputs.push_back(name);
      run_summaries.push_back(hp::io::report_summary_json(r));
      std::printf("%s seed %u: final 100-episode average %.2f (%lld env steps, %lld skipped; "
                  "wall env/infer/train %.1f/%.1f/%.1f s)\n",
                  std::string(hp::io::to_string(mode)).c_str(), seed, r.final_moving_avg(),
                  static_cast<long long>(r.env_steps), static_cast<long long>(r.skipped_steps),
                  r.wall_env_s, r.wall_inference_s, r.wall_train_s);
      bucket.push_back(std::move(r));
    }
  };
  if (want_mixed) run_mode(hp::train::EngineMode::Mixed, mixed_runs);
  if (want_fp32) run_mode(hp::train::EngineMode::PlainFp32, fp32_runs);

  const auto pooled_mean = [](const std::vector<hp::train::TrainReport>& rs) {
    double sum = 0.0;
    for (const auto& r : rs) sum += r.final_moving_avg();
    return rs.empty() ? 0.0 : sum / static_cast<double>(rs.size());
  };

  json variants = json::array();
  if (want_mixed) variants.push_back("mixed");
  if (want_fp32) variants.push_back("fp32");

  json summary;
  summary["schema_version"] = hp::kSchemaVersion;
  summary["variants"] = variants;
  summary["seeds"] = num_seeds;
  summary["base_seed"] = cfg.seed;
  summary["runs"] = std::move(run_summaries);
  if (want_mixed) summary["mixed_mean_final_moving_avg"] = pooled_mean(mixed_runs);
  if (want_fp32) summary["fp32_mean_final_moving_avg"] = pooled_mean(fp32_runs);
  if (want_mixed && want_fp32) {
    summary["reward_error_percent"] = hp::train::reward_error_percent(mixed_runs, fp32_runs);
  }
  hp::io::write_json_file(out.file("summary.json"), summary);
  outputs.push_back("summary.json");

  json options;
  options["config"] = config_path;
  options["assignment"] = assignment_path.empty() ? "derived" : assignment_path;
  options["variants"] = variants;
  options["seeds"] = num_seeds;
  write_manifest(out, "train", inputs, options, outputs);
  if (want_mixed && want_fp32) {
    std::printf("reward error vs fp32: %.3f%%\n",
                summary["reward_error_percent"].get<double>());
  }
  return 0;
}

// ---------------------------------------------------------------------------
// verify

int run_verify(const std::string& suite) {
  std::vector<hp::verify::SuiteResult> results;
  if (suite == "formats" || suite == "all") results.push_back(hp::verify::run_formats_suite());
  if (suite == "small-ilp" || suite == "all") results.push_back(hp::verify::run_small_ilp_suite());
  if (suite == "gradients" || suite == "all") results.push_back(hp::verify::run_gradients_suite());
  if (results.empty()) {
    throw hp::ConfigError("unknown suite \"" + suite +
                          "\" (expected formats, small-ilp, gradients or all)");
  }
  bool ok = true;
  json doc;
  doc["schema_version"] = hp::kSchemaVersion;
  json suites = json::array();
  for (const auto& r : results) {
    json e;
    e["suite"] = r.suite;
    e["checks"] = r.checks;
    e["failures"] = r.failures;
    e["passed"] = r.passed();
    suites.push_back(std::move(e));
    ok = ok && r.passed();
  }
  doc["suites"] = std::move(suites);
  doc["passed"] = ok;
  std::printf("%s\n", doc.dump(2).c_str());
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Layer-level partitioning of DRL training graphs across PS, PL and AIE devices"};
  app.set_version_flag("--version", std::string(hp::kVersion));
  app.require_subcommand(1);

  std::string graph_path, profiles_path, cost_path, out_path;
  std::string config_path, assignment_path;
  std::string suite = "all";
  std::vector<int> batch_sizes;
  int num_seeds = 1;
  bool fp32_baseline = false;

  CLI::App* profile = app.add_subcommand("profile", "Build the compute graph and cost table");
  profile->add_option("--graph", graph_path, "Network document (JSON)")->required();
  profile->add_option("--profiles", profiles_path, "Device profiles (JSON); built-in if omitted");
  profile->add_option("--out", out_path, "Output directory")->required();

  CLI::App* part = app.add_subcommand("partition", "Solve the device assignment problem");
  part->add_option("--graph", graph_path, "Network document (JSON)")->required();
  part->add_option("--cost", cost_path, "Cost table from `profile` (JSON)")->required();
  part->add_option("--profiles", profiles_path, "Device profiles for the timeline simulation");
  part->add_option("--out", out_path, "Output directory")->required();

  CLI::App* sweep = app.add_subcommand("sweep", "Re-solve across batch sizes");
  sweep->add_option("--graph", graph_path, "Network document (JSON)")->required();
  sweep->add_option("--batch-sizes", batch_sizes, "Comma-separated batch sizes (at least two)")
      ->required()
      ->delimiter(',');
  sweep->add_option("--profiles", profiles_path, "Device profiles (JSON); built-in if omitted");
  sweep->add_option("--out", out_path, "Output directory")->required();

  CLI::App* train = app.add_subcommand("train", "Train cart-pole DQN");
  train->add_option("--config", config_path, "Training config (JSON)")->required();
  train->add_option("--assignment", assignment_path,
                    "Device assignment from `partition`; derived from the config if omitted");
  train->add_flag("--fp32", fp32_baseline,
                  "Run the plain fp32 baseline; with --assignment, run both variants");
  train->add_option("--seeds", num_seeds, "Number of consecutive seeds to run");
  train->add_option("--out", out_path, "Output directory")->required();

  CLI::App* verify = app.add_subcommand("verify", "Run built-in self-check suites");
  verify->add_option("--suite", suite, "formats, small-ilp, gradients or all");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (profile->parsed()) return run_profile(graph_path, profiles_path, out_path);
    if (part->parsed()) return run_partition(graph_path, cost_path, profiles_path, out_path);
    if (sweep->parsed()) return run_sweep(graph_path, batch_sizes, profiles_path, out_path);
    if (train->parsed()) {
      return run_train(config_path, assignment_path, fp32_baseline, num_seeds, out_path);
    }
    if (verify->parsed()) return run_verify(suite);
  } catch (const hp::InfeasibleError& e) {
    std::fprintf(stderr, "hetpart: %s\n", e.what());
    return 3;
  } catch (const hp::DivergenceError& e) {
    std::fprintf(stderr, "hetpart: %s\n", e.what());
    return 4;
  } catch (const hp::Error& e) {
    std::fprintf(stderr, "hetpart: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "hetpart: internal error: %s\n", e.what());
    return 1;
  }
  return 2;
}
