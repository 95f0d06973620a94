#pragma once

#include <map>
#include <string>
#include <vector>

#include "bboost/boot_scheduler.hpp"

namespace bboost {

enum class ChartFormat : std::uint8_t { SVG, Text };

struct ChartOptions {
  double ms_per_px = 5.0;     // SVG horizontal scale
  std::size_t text_columns = 100;
};

// One row per unit ordered by start time (then name). Solid bar from start
// to readiness, hatched from readiness to exit; BB members are marked.
std::string emit_bootchart(const ScheduleTrace& trace, ChartFormat format,
                           ChartOptions opts = {});

struct PhaseDelta {
  std::string label;
  Duration before{0};
  Duration after{0};
  Duration saved{0};  // before - after
};

struct UnitDelta {
  std::string name;
  Duration before_start{0};
  Duration after_start{0};
  Duration delta{0};  // after - before; negative means earlier
};

struct Attribution {
  std::string feature;
  std::vector<std::string> phases;
  Duration saved{0};
};

struct ComparisonReport {
  std::vector<PhaseDelta> phases;
  Duration total_before{0};
  Duration total_after{0};
  Duration total_saved{0};
  std::vector<UnitDelta> units;
  std::vector<std::string> only_before;
  std::vector<std::string> only_after;
  std::vector<Attribution> attribution;
};

ComparisonReport compare_traces(const ScheduleTrace& before,
                                const ScheduleTrace& after);
std::string comparison_to_json(const ComparisonReport& r);
std::string comparison_to_text(const ComparisonReport& r);

struct Metrics {
  Duration boot_completed_at{0};
  Duration all_finished_at{0};
  std::vector<std::pair<std::string, Duration>> phases;
  std::size_t units = 0;
  std::size_t max_parallelism = 0;
  // units in flight -> number of 1 ms samples in the services phase
  std::map<std::size_t, std::size_t> parallelism_histogram;
  std::vector<std::pair<std::string, Duration>> deferred_wake_latencies;
};

Metrics compute_metrics(const ScheduleTrace& trace);
std::string emit_metrics(const ScheduleTrace& trace);

}  // namespace bboost
