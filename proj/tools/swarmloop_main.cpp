#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "swarmloop/directory/directory.hpp"
#include "swarmloop/eval/eval.hpp"
#include "swarmloop/gateway/gateway.hpp"
#include "swarmloop/gateway/mcp.hpp"
#include "swarmloop/sim/world.hpp"
#include "swarmloop/wot/servient.hpp"
#include "swarmloop/wot/things.hpp"

namespace eval = swarmloop::eval;
namespace fs = std::filesystem;
using swarmloop::json;

namespace {

eval::MissionKind mission_from_cli(const std::string& name) {
  if (name == "coverage") return eval::MissionKind::coverage_with_tool;
  if (name == "coverage-no-tool") return eval::MissionKind::coverage_no_tool;
  if (name == "formation") return eval::MissionKind::formation;
  if (name == "irrigation") return eval::MissionKind::irrigation;
  throw CLI::ValidationError("--mission", "unknown mission: " + name);
}

json load_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  return json::parse(f);
}

int cmd_run(const std::string& mission, const std::string& reasoner, int runs,
            std::uint64_t seed, const std::string& planner, const std::string& helpers,
            const std::string& out, int drones, int max_iterations, double sim_timeout_s) {
  auto spec = eval::MissionSpec::defaults(mission_from_cli(mission));
  if (drones > 0) spec.n_drones = drones;
  if (!planner.empty()) spec.planner_tool = planner == "on";
  if (!helpers.empty()) spec.helper_tools = helpers == "on";
  spec.normalize();

  swarmloop::agent::RunLimits limits;
  if (max_iterations > 0) limits.max_iterations = max_iterations;
  if (sim_timeout_s > 0) limits.sim_timeout_s = sim_timeout_s;

  const auto factory = reasoner == "remote" ? eval::remote_factory() : eval::scripted_factory();
  const auto batch = eval::run_batch(spec, factory, reasoner, runs, seed, out,
                                     swarmloop::agent::PromptSet::builtin(), limits);
  std::cout << batch.text_table();
  if (!out.empty()) std::cout << "reports written to " << out << "\n";
  return batch.full_count == static_cast<int>(batch.runs.size()) ? 0 : 1;
}

int cmd_score(const std::string& trace_path) {
  const auto rec = eval::RunRecord::from_json(load_json(trace_path));
  const auto report = eval::score_record(rec);
  std::cout << report.to_json().dump(2) << "\n";
  return report.verdict.cls == eval::SuccessClass::full ? 0 : 1;
}

int cmd_report(const std::string& batch_dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(batch_dir)) {
    const auto name = e.path().filename().string();
    if (name.rfind("run-", 0) == 0 && e.path().extension() == ".json") files.push_back(e.path());
  }
  if (files.empty()) throw std::runtime_error("no run-*.json files in " + batch_dir);
  std::sort(files.begin(), files.end());

  eval::BatchReport batch;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const auto rec = eval::RunRecord::from_json(load_json(files[i].string()));
    if (i == 0) {
      batch.mission = rec.mission;
      batch.reasoner = rec.reasoner;
      batch.base_seed = rec.reasoner_seed;
    }
    auto report = eval::score_record(rec);
    report.run_index = static_cast<int>(i);
    report.trace_file = files[i].filename().string();
    batch.runs.push_back(std::move(report));
  }
  batch.finalize();

  std::ofstream out(fs::path(batch_dir) / "batch.json");
  out << batch.to_json().dump(2) << "\n";
  std::cout << batch.text_table();
  std::cout << "batch report written to " << (fs::path(batch_dir) / "batch.json").string() << "\n";
  return 0;
}

int cmd_mcp(const std::string& mission, int drones, std::uint64_t seed,
            const std::string& planner, const std::string& helpers,
            const std::string& world_config, const std::string& telemetry_out,
            const std::string& collisions_out) {
  swarmloop::sim::WorldConfig wcfg;
  if (!world_config.empty()) wcfg = swarmloop::sim::WorldConfig::from_json(load_json(world_config));
  wcfg.rng_seed = seed;

  std::vector<swarmloop::sim::DeviceSpec> devices;
  if (!mission.empty())
    devices = eval::MissionSpec::defaults(mission_from_cli(mission)).devices;

  swarmloop::sim::World world(wcfg, drones, devices);
  swarmloop::wot::Servient servient;
  swarmloop::wot::register_world_things(servient, world);
  if (planner != "off") swarmloop::wot::register_planner_things(servient);
  swarmloop::directory::Directory dir;
  for (const auto& id : servient.thing_ids()) dir.register_td(servient.td(id).to_json());

  swarmloop::gateway::GatewayConfig gcfg;
  gcfg.planning_tools = planner != "off";
  gcfg.helper_tools = helpers != "off";
  swarmloop::gateway::Gateway gw(gcfg, world, servient, dir);

  swarmloop::gateway::McpServer server(gw);
  server.serve(std::cin, std::cout);

  if (!telemetry_out.empty()) {
    std::ofstream f(telemetry_out);
    world.write_telemetry_jsonl(f);
  }
  if (!collisions_out.empty()) {
    std::ofstream f(collisions_out);
    world.write_collisions_jsonl(f);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UAV swarm agent experiments: run missions, score traces, aggregate batches"};
  app.require_subcommand(1);

  const auto mission_names = CLI::IsMember({"coverage", "coverage-no-tool", "formation",
                                            "irrigation"});
  const auto on_off = CLI::IsMember({"on", "off"});

  std::string mission, reasoner = "scripted", planner, helpers, out;
  int runs = 1, drones = 0, max_iterations = 0;
  std::uint64_t seed = 0;
  double sim_timeout_s = 0.0;

  auto* run = app.add_subcommand("run", "Run one or more missions and score them");
  run->add_option("--mission", mission, "Mission to run")->required()->check(mission_names);
  run->add_option("--reasoner", reasoner, "Agent backend (scripted | remote)")
      ->check(CLI::IsMember({"scripted", "remote"}));
  run->add_option("--runs", runs, "Number of runs in the batch")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "Base seed: world uses it as-is, run i seeds the reasoner with seed+i");
  run->add_option("--planner", planner, "Expose the planner tools")->check(on_off);
  run->add_option("--helpers", helpers, "Expose the helper tools")->check(on_off);
  run->add_option("--out", out, "Directory for run-NNN.json and batch.json");
  run->add_option("--drones", drones, "Fleet size override")->check(CLI::PositiveNumber);
  run->add_option("--max-iterations", max_iterations, "Agent iteration cap override")
      ->check(CLI::PositiveNumber);
  run->add_option("--sim-timeout-s", sim_timeout_s, "Simulated-time budget override")
      ->check(CLI::PositiveNumber);

  std::string trace_path;
  auto* score = app.add_subcommand("score", "Re-score one persisted run record");
  score->add_option("--trace", trace_path, "run-NNN.json file")->required()
      ->check(CLI::ExistingFile);

  std::string batch_dir;
  auto* report = app.add_subcommand("report", "Aggregate a directory of run records");
  report->add_option("--batch", batch_dir, "Directory holding run-NNN.json files")->required()
      ->check(CLI::ExistingDirectory);

  std::string mcp_mission, world_config, telemetry_out, collisions_out;
  int mcp_drones = 3;
  std::uint64_t mcp_seed = 0;
  std::string mcp_planner = "on", mcp_helpers = "on";
  auto* mcp = app.add_subcommand("mcp", "Serve the tool gateway over stdio (JSON-RPC 2.0)");
  mcp->add_option("--mission", mcp_mission, "Adds that mission's ground devices to the world")
      ->check(mission_names);
  mcp->add_option("--drones", mcp_drones, "Fleet size")->check(CLI::PositiveNumber);
  mcp->add_option("--seed", mcp_seed, "World seed");
  mcp->add_option("--planner", mcp_planner, "Expose the planner tools")->check(on_off);
  mcp->add_option("--helpers", mcp_helpers, "Expose the helper tools")->check(on_off);
  mcp->add_option("--world-config", world_config, "WorldConfig JSON file")
      ->check(CLI::ExistingFile);
  mcp->add_option("--telemetry-out", telemetry_out, "Write per-tick telemetry JSONL on exit");
  mcp->add_option("--collisions-out", collisions_out, "Write collision events JSONL on exit");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return cmd_run(mission, reasoner, runs, seed, planner, helpers, out, drones,
                     max_iterations, sim_timeout_s);
    if (score->parsed()) return cmd_score(trace_path);
    if (report->parsed()) return cmd_report(batch_dir);
    if (mcp->parsed())
      return cmd_mcp(mcp_mission, mcp_drones, mcp_seed, mcp_planner, mcp_helpers, world_config,
                     telemetry_out, collisions_out);
  } catch (const swarmloop::DomainError& e) {
    std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
