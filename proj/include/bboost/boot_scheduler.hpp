#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bboost/dep_graph.hpp"
#include "bboost/unit_model.hpp"

namespace bboost {

enum class DeferPolicy : std::uint8_t { None, DeferAll };

std::string_view to_string(DeferPolicy p);

struct PhaseTask {
  std::string label;
  Duration duration{0};

  friend bool operator==(const PhaseTask&, const PhaseTask&) = default;
};

struct InitTask {
  std::string label;
  Duration duration{0};
  bool deferrable = false;

  friend bool operator==(const InitTask&, const InitTask&) = default;
};

struct SimConfig {
  int workers = 4;
  std::vector<PhaseTask> kernel_phase;
  std::vector<InitTask> init_tasks;
  // Reading and resolving unit files at boot. Skipped when `preparsed`.
  std::vector<PhaseTask> load_tasks;
  bool preparsed = false;
  DeferPolicy defer_policy = DeferPolicy::None;
  std::optional<BBGroup> bb_group;
  // With a group set: launch members first / drop outsider constraints.
  bool prioritize = true;
  bool isolate = true;
  Duration rcu_overhead_per_start{23700};
  std::uint64_t seed = 0;

  // Throws std::invalid_argument.
  void validate() const;
};

inline constexpr Duration kConventionalRcuOverhead{23700};
inline constexpr Duration kBoostedRcuOverhead{3100};

// INI form:
//   [Simulation] Workers=, Completion=, Seed=, RcuOverhead=,
//                BoostedRcuOverhead=, DeferPolicy=none|defer-all
//   [Kernel]     Phase=<label> <ms> [<boosted ms>]   (repeatable)
//   [Init]       Task=<label> <ms>, DeferrableTask=<label> <ms>
//   [Load]       Task=<label> <ms>
// `boosted` selects the second kernel figure and the boosted overhead.
struct LoadedConfig {
  SimConfig config;
  std::set<UnitName> completion;
};
LoadedConfig load_sim_config(std::string_view text, bool boosted);

// Config for one run of `set`. With `boosted` the BB group is isolated from
// the completion targets (`completion` overrides the config's when non-empty)
// and prioritized, outsiders are deferred and unit files count as pre-parsed.
LoadedConfig configure_boot(const UnitSet& set, std::string_view config_text,
                            bool boosted, const std::set<UnitName>& completion = {},
                            IsolateOptions iso = {});

struct UnitTrace {
  UnitName name;
  bool phantom = false;
  bool target = false;
  bool bb_member = false;
  bool deferred = false;  // held until boot completion
  Duration queued_at{0};
  Duration launched_at{0};
  Duration started_at{0};
  Duration ready_at{0};
  Duration finished_at{0};

  friend bool operator==(const UnitTrace&, const UnitTrace&) = default;
};

struct TraceEvent {
  Duration time{0};
  std::string what;

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

struct DeferredRun {
  std::string label;
  Duration started_at{0};
  Duration finished_at{0};
  Duration wake_latency{0};  // from boot completion to start

  friend bool operator==(const DeferredRun&, const DeferredRun&) = default;
};

struct PhaseSpan {
  std::string label;
  Duration begin{0};
  Duration end{0};

  friend bool operator==(const PhaseSpan&, const PhaseSpan&) = default;
};

// Settings that produced a trace, kept for attribution in reports.
struct TraceFlags {
  int workers = 0;
  DeferPolicy defer_policy = DeferPolicy::None;
  bool bb_group = false;
  bool prioritize = false;
  bool isolate = false;
  bool preparsed = false;
  Duration rcu_overhead{0};
  Duration kernel_total{0};

  friend bool operator==(const TraceFlags&, const TraceFlags&) = default;
};

struct ScheduleTrace {
  std::vector<UnitTrace> units;  // name order
  std::vector<TraceEvent> events;
  std::set<UnitName> completion;
  Duration boot_completed_at{0};
  Duration all_finished_at{0};
  std::vector<DeferredRun> deferred_executed;
  // kernel steps, init, load, services; contiguous from 0 to completion.
  std::vector<PhaseSpan> phases;
  TraceFlags flags;

  const UnitTrace* find(const UnitName& n) const;
  friend bool operator==(const ScheduleTrace&, const ScheduleTrace&) = default;
};

struct UnknownCompletionTarget : std::runtime_error {
  explicit UnknownCompletionTarget(const std::string& name)
      : std::runtime_error("unknown completion target " + name), unit(name) {}
  std::string unit;
};

// Simple: ready on start. Forking: after the fork point. Oneshot: on exit.
Duration readiness_time(ServiceType type, Duration started_at,
                        Duration duration, Duration fork_point);

struct DeferralResult {
  UnitSet set;
  std::vector<InitTask> deferred_init;
  std::vector<Diagnostic> diagnostics;
};

// Under DeferAll marks every unit outside the group (and outside the strong
// ancestry of its members) deferred, and moves deferrable init tasks to the
// post-completion queue. Units whose files ask for deferral but which the
// group needs are refused with a warning.
DeferralResult apply_deferral(const UnitSet& set, const SimConfig& cfg,
                              const BBGroup& group);

// Throws GraphError(CyclicGraph), UnknownCompletionTarget,
// std::invalid_argument for a bad config.
ScheduleTrace simulate_boot(const UnitSet& set, const SimConfig& cfg,
                            const std::set<UnitName>& completion);

// Same, starting from a graph (phantom nodes included).
ScheduleTrace simulate_graph(const ServiceGraph& g, const SimConfig& cfg,
                             const std::set<UnitName>& completion);

// Max ready_at over the targets. Throws UnknownCompletionTarget.
Duration boot_completion_time(const ScheduleTrace& trace,
                              const std::set<UnitName>& completion);

std::string trace_to_json(const ScheduleTrace& trace);
// Throws std::runtime_error on malformed input.
ScheduleTrace trace_from_json(std::string_view text);

}  // namespace bboost
