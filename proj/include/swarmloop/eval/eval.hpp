#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "swarmloop/agent/agent.hpp"
#include "swarmloop/agent/prompts.hpp"
#include "swarmloop/sim/world.hpp"

namespace swarmloop::eval {

enum class MissionKind { coverage_with_tool, coverage_no_tool, formation, irrigation };

std::string to_string(MissionKind k);
MissionKind mission_kind_from_string(const std::string& s);  // throws UnknownMission

/// Everything needed to assemble one experiment: world geometry, fleet size,
/// mission parameters, which optional tool groups the gateway exposes, and
/// the world seed. Instances come from defaults(kind) or from_json and are
/// kind-consistent after normalize().
struct MissionSpec {
  MissionKind kind = MissionKind::coverage_with_tool;
  int n_drones = 10;
  sim::Rect region{0.0, 0.0, 400.0, 300.0};

  // coverage
  double fov_deg = 90.0;
  double alt_min_m = 10.0;
  double alt_max_m = 120.0;

  // formation
  std::string formation_shape = "star";
  double formation_spacing_m = 5.0;
  double formation_center_x = 200.0;
  double formation_center_y = 150.0;
  double formation_orientation_rad = 0.0;
  double formation_altitude_m = 10.0;

  // irrigation
  std::vector<sim::DeviceSpec> devices;  // empty for the other kinds
  double humidity_threshold_pct = 57.0;
  double temperature_threshold_c = 30.0;

  bool planner_tool = true;  // forced off for coverage_no_tool
  bool helper_tools = true;
  std::uint64_t world_seed = 0;

  /// Forces flag combinations the kind does not admit; call after edits.
  void normalize();
  /// Throws InvalidConfig on out-of-range values or kind-inconsistent
  /// fields, BadSensorLayout when irrigation devices are not exactly
  /// three humidity sensors, one temperature sensor, and one actuator.
  void validate() const;

  std::vector<std::string> drone_ids() const;  // "uav-1" .. "uav-N"
  json user_params() const;  // values rendered into the user prompt

  json to_json() const;
  static MissionSpec from_json(const json& j);  // normalizes, then validates
  static MissionSpec defaults(MissionKind kind);
};

enum class SuccessClass { full, early_exit, fail };

std::string to_string(SuccessClass c);
SuccessClass success_class_from_string(const std::string& s);

/// Binary outcome of scoring one run. full carries no reasons; early_exit
/// lists the unmet completion constraints; fail lists every failed
/// criterion so a batch can be triaged without replaying runs.
struct SuccessVerdict {
  SuccessClass cls = SuccessClass::fail;
  std::vector<std::string> reasons;

  bool full() const { return cls == SuccessClass::full; }
  json to_json() const;
  static SuccessVerdict from_json(const json& j);
};

/// Per-run metrics next to the verdict. exec_time_s and energy_mah are
/// simulated quantities, so reports are machine-independent.
struct RunReport {
  int run_index = 0;
  SuccessVerdict verdict;
  double exec_time_s = 0.0;
  double energy_mah = 0.0;
  int collisions = 0;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::int64_t total_tokens = 0;
  int iterations = 0;
  std::string termination;
  std::string trace_file;           // relative path of the persisted record
  std::optional<std::string> error;  // set when the run itself threw

  json to_json() const;
  static RunReport from_json(const json& j);
};

/// The persisted unit of one run: the mission, the agent-side trace, and the
/// world's initial and final snapshots. Scoring is a pure function of this
/// record, so re-scoring a stored file reproduces the verdict exactly.
struct RunRecord {
  MissionSpec mission;
  std::string reasoner;  // "scripted" | "remote"
  std::uint64_t reasoner_seed = 0;
  agent::RunTrace trace;
  json world_init;   // World::init_snapshot()
  json world_final;  // World::final_snapshot()

  json to_json() const;
  static RunRecord from_json(const json& j);
};

struct MetricStats {
  double mean = 0.0;
  double stddev = 0.0;  // population form; 0 for a single sample

  json to_json() const;
};

/// Aggregate over one batch. Means and deviations cover full successes
/// only and are absent when a batch produced none.
struct BatchReport {
  MissionSpec mission;
  std::string reasoner;
  std::uint64_t base_seed = 0;
  std::vector<RunReport> runs;
  int full_count = 0;
  int early_exit_count = 0;
  int fail_count = 0;
  double success_rate = 0.0;  // full_count / runs.size()
  std::optional<MetricStats> time_stats;
  std::optional<MetricStats> energy_stats;
  std::optional<MetricStats> token_stats;

  void finalize();  // recomputes counts, rate, and stats from runs
  std::string text_table() const;

  json to_json() const;
  static BatchReport from_json(const json& j);
};

// --- scoring ---------------------------------------------------------------

struct SlotTolerance {
  double horiz_m = 2.0;
  double vert_m = 2.0;
};

/// full: every plan slot visited within tolerance at some tick, every
/// participating drone disarmed in LAND/RTL, zero collisions. Any collision
/// fails the run outright. Throws MissingPlan when plan is not a coverage
/// plan document.
SuccessVerdict score_coverage_with_tool(const agent::RunTrace& trace, const json& final_world,
                                        const json& plan, SlotTolerance tol = {});

/// full: at least one drone took off and ended landed strictly inside the
/// region, zero collisions. No early-exit class: the criterion is already
/// the weak form.
SuccessVerdict score_coverage_no_tool(const agent::RunTrace& trace, const json& final_world,
                                      const sim::Rect& region);

/// full: the planned star is detected in the positions held just before the
/// first land/RTL command, termination constraints met, zero collisions.
/// Throws MissingPlan when plan is not a formation plan document.
SuccessVerdict score_formation(const agent::RunTrace& trace, const json& final_world,
                               const json& plan, double tol = 1.0);

/// full: all four sensor readings collected, actuator state equals the
/// threshold rule's verdict on those readings, termination constraints met.
/// Collisions do not enter this criterion. Throws BadSensorLayout.
SuccessVerdict score_irrigation(const agent::RunTrace& trace, const json& final_world,
                                const MissionSpec& spec);

/// Kind dispatcher; coverage/formation plans are taken from the trace.
SuccessVerdict score_run(const MissionSpec& spec, const agent::RunTrace& trace,
                         const json& final_world);

int count_collisions(const json& final_world);

/// Simulated seconds from the first logged world command to termination;
/// 0 when the run never issued a command.
double measure_exec_time(const agent::RunTrace& trace, const json& final_world);

/// Total battery draw across the fleet, reproducing the simulator's own
/// accounting from the final snapshot.
double measure_energy(const json& final_world);

// --- running ---------------------------------------------------------------

using ReasonerFactory = std::function<std::unique_ptr<agent::Reasoner>(const MissionSpec&)>;

ReasonerFactory scripted_factory();
ReasonerFactory remote_factory();  // configuration read from the environment

/// Assembles a fresh world/servient/directory/gateway stack for the spec,
/// seeds the reasoner, runs the mission, and returns the persisted record.
RunRecord execute_run(const MissionSpec& spec, agent::Reasoner& reasoner,
                      const std::string& reasoner_name, std::uint64_t reasoner_seed,
                      const agent::PromptSet& prompts = agent::PromptSet::builtin(),
                      const agent::RunLimits& limits = {});

/// Verdict plus metrics for a record; pure, no world access.
RunReport score_record(const RunRecord& rec);

/// n_runs sequential runs with identical initial conditions: world seed is
/// base_seed for every run, the reasoner seed is base_seed + i. A run that
/// throws becomes fail {run_error}. When out_dir is non-empty, writes one
/// run-NNN.json per run plus batch.json.
BatchReport run_batch(const MissionSpec& spec, const ReasonerFactory& factory,
                      const std::string& reasoner_name, int n_runs, std::uint64_t base_seed,
                      const std::string& out_dir = "",
                      const agent::PromptSet& prompts = agent::PromptSet::builtin(),
                      const agent::RunLimits& limits = {});

}  // namespace swarmloop::eval
