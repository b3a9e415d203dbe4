#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "swarmloop/agent/remote.hpp"
#include "swarmloop/agent/scripted.hpp"
#include "swarmloop/directory/directory.hpp"
#include "swarmloop/eval/eval.hpp"
#include "swarmloop/gateway/gateway.hpp"
#include "swarmloop/wot/servient.hpp"
#include "swarmloop/wot/things.hpp"

namespace swarmloop::eval {

ReasonerFactory scripted_factory() {
  return [](const MissionSpec& spec) {
    return agent::make_scripted_reasoner(to_string(spec.kind), spec.user_params());
  };
}

ReasonerFactory remote_factory() {
  return [](const MissionSpec&) {
    return agent::make_remote_reasoner(agent::remote_config_from_env());
  };
}

RunRecord execute_run(const MissionSpec& spec, agent::Reasoner& reasoner,
                      const std::string& reasoner_name, std::uint64_t reasoner_seed,
                      const agent::PromptSet& prompts, const agent::RunLimits& limits) {
  spec.validate();

  sim::WorldConfig wcfg;
  wcfg.rng_seed = spec.world_seed;
  wcfg.region = spec.region;
  sim::World world(wcfg, spec.n_drones, spec.devices);

  wot::Servient servient;
  wot::register_world_things(servient, world);
  if (spec.planner_tool) wot::register_planner_things(servient);
  directory::Directory dir;
  for (const auto& id : servient.thing_ids()) dir.register_td(servient.td(id).to_json());
  gateway::GatewayConfig gcfg;
  gcfg.planning_tools = spec.planner_tool;
  gcfg.helper_tools = spec.helper_tools;
  gateway::Gateway gw(gcfg, world, servient, dir);

  RunRecord rec;
  rec.mission = spec;
  rec.reasoner = reasoner_name;
  rec.reasoner_seed = reasoner_seed;
  rec.world_init = world.init_snapshot();

  reasoner.seed(reasoner_seed);
  agent::MissionBrief brief;
  brief.mission_id = to_string(spec.kind) + "-" + std::to_string(reasoner_seed);
  brief.kind = to_string(spec.kind);
  brief.drone_ids = spec.drone_ids();
  brief.user_params = spec.user_params();
  rec.trace = agent::run_mission(brief, reasoner, gw, prompts, limits);
  rec.world_final = world.final_snapshot();
  return rec;
}

RunReport score_record(const RunRecord& rec) {
  RunReport r;
  r.exec_time_s = measure_exec_time(rec.trace, rec.world_final);
  r.energy_mah = measure_energy(rec.world_final);
  r.collisions = count_collisions(rec.world_final);
  r.prompt_tokens = rec.trace.tokens.total_prompt();
  r.completion_tokens = rec.trace.tokens.total_completion();
  r.total_tokens = rec.trace.tokens.total();
  r.iterations = static_cast<int>(rec.trace.iterations.size());
  r.termination = agent::to_string(rec.trace.termination);
  try {
    r.verdict = score_run(rec.mission, rec.trace, rec.world_final);
  } catch (const DomainError& e) {
    // A scorer precondition failure (no plan in the trace, broken sensor
    // layout) is a deterministic property of the record, so it maps to a
    // stable fail reason instead of aborting the batch.
    r.verdict.cls = SuccessClass::fail;
    r.verdict.reasons = {e.code() == "MissingPlan" ? "missing_plan" : "run_error"};
    r.error = e.what();
  }
  return r;
}

BatchReport run_batch(const MissionSpec& requested, const ReasonerFactory& factory,
                      const std::string& reasoner_name, int n_runs, std::uint64_t base_seed,
                      const std::string& out_dir, const agent::PromptSet& prompts,
                      const agent::RunLimits& limits) {
  if (n_runs < 1) throw DomainError("InvalidConfig", "a batch needs at least one run");
  MissionSpec spec = requested;
  spec.world_seed = base_seed;  // identical initial conditions for every run
  spec.normalize();
  spec.validate();

  namespace fs = std::filesystem;
  if (!out_dir.empty()) fs::create_directories(out_dir);

  BatchReport batch;
  batch.mission = spec;
  batch.reasoner = reasoner_name;
  batch.base_seed = base_seed;

  for (int i = 0; i < n_runs; ++i) {
    RunReport report;
    std::optional<RunRecord> rec;
    try {
      auto reasoner = factory(spec);
      rec = execute_run(spec, *reasoner, reasoner_name, base_seed + static_cast<std::uint64_t>(i),
                        prompts, limits);
      report = score_record(*rec);
    } catch (const std::exception& e) {
      report.verdict.cls = SuccessClass::fail;
      report.verdict.reasons = {"run_error"};
      report.error = e.what();
    }
    report.run_index = i;
    if (rec && !out_dir.empty()) {
      std::ostringstream name;
      name << "run-" << std::setfill('0') << std::setw(3) << i << ".json";
      std::ofstream f(fs::path(out_dir) / name.str());
      f << rec->to_json().dump(2) << "\n";
      report.trace_file = name.str();
    }
    batch.runs.push_back(std::move(report));
  }
  batch.finalize();
  if (!out_dir.empty()) {
    std::ofstream f(fs::path(out_dir) / "batch.json");
    f << batch.to_json().dump(2) << "\n";
  }
  return batch;
}

}  // namespace swarmloop::eval
