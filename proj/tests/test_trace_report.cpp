#include <gtest/gtest.h>

#include <json.hpp>

#include "bboost/boot_scheduler.hpp"
#include "bboost/fixtures.hpp"
#include "bboost/trace_report.hpp"
#include "bboost/unit_parser.hpp"
#include "helpers.hpp"

using namespace bboost;
using testing_helpers::conf;
using testing_helpers::load;

namespace {

UnitName N(const char* s) { return UnitName(s); }

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

UnitSet units(std::initializer_list<std::pair<const char*, const char*>> files) {
  std::map<UnitName, std::string> src;
  for (auto [n, t] : files) src.emplace(UnitName(n), t);
  return parse_tree(src).set;
}

SimConfig plain(int workers) {
  SimConfig c;
  c.workers = workers;
  c.rcu_overhead_per_start = Duration{0};
  return c;
}

std::pair<ScheduleTrace, ScheduleTrace> pair_for(const fixtures::Fixture& f) {
  const auto set = load(f);
  const auto off = configure_boot(set, conf(f), false);
  const auto on = configure_boot(set, conf(f), true);
  return {simulate_boot(set, off.config, off.completion), simulate_boot(set, on.config, on.completion)};
}

// x of the first rect drawn for `unit` after its label.
double bar_x(const std::string& svg, const std::string& unit) {
  const auto at = svg.find(unit + "</text>");
  const auto r = svg.find("<rect x=\"", at);
  return std::stod(svg.substr(r + 9));
}

}  // namespace

TEST(Chart, EmptyTraceHeaderOnly) {
  const ScheduleTrace t;
  const auto svg = emit_bootchart(t, ChartFormat::SVG);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_EQ(count(svg, "class=\"unit"), 0u);
  const auto txt = emit_bootchart(t, ChartFormat::Text);
  EXPECT_EQ(count(txt, "\n"), 1u);
}

TEST(Chart, RowsInStartOrder) {
  const auto set = units({{"late.service", "[Unit]\nRequires=early.service\nX-Sim-Duration=5\n"},
                          {"early.service", "[Unit]\nX-Sim-Duration=10\n[Service]\nType=oneshot\n"}});
  const auto tr = simulate_boot(set, plain(2), {N("late.service")});
  const auto svg = emit_bootchart(tr, ChartFormat::SVG);
  EXPECT_EQ(count(svg, "class=\"unit"), 2u);
  EXPECT_LT(svg.find("early.service"), svg.find("late.service"));
  const auto txt = emit_bootchart(tr, ChartFormat::Text);
  EXPECT_LT(txt.find("early.service"), txt.find("late.service"));
}

TEST(Chart, DbusBarStartsEarlierWhenBoosted) {
  const auto [off, on] = pair_for(fixtures::dbus());
  const auto a = emit_bootchart(off, ChartFormat::SVG);
  const auto b = emit_bootchart(on, ChartFormat::SVG);
  EXPECT_LT(bar_x(b, "dbus.service"), bar_x(a, "dbus.service"));
}

TEST(Chart, MembersMarked) {
  const auto [off, on] = pair_for(fixtures::tv7());
  const auto svg = emit_bootchart(on, ChartFormat::SVG);
  EXPECT_EQ(count(svg, "class=\"unit bb\""), 7u);
  EXPECT_EQ(count(emit_bootchart(off, ChartFormat::SVG), "class=\"unit bb\""), 0u);
}

TEST(Chart, Pure) {
  const auto [off, on] = pair_for(fixtures::tv7());
  EXPECT_EQ(emit_bootchart(on, ChartFormat::SVG), emit_bootchart(on, ChartFormat::SVG));
  EXPECT_EQ(emit_bootchart(on, ChartFormat::Text), emit_bootchart(on, ChartFormat::Text));
  EXPECT_EQ(emit_metrics(on), emit_metrics(on));
}

TEST(Compare, IdenticalTracesZeroDelta) {
  const auto [off, on] = pair_for(fixtures::tv7());
  const auto r = compare_traces(on, on);
  EXPECT_EQ(r.total_saved, Duration{0});
  for (const auto& p : r.phases) EXPECT_EQ(p.saved, Duration{0});
  for (const auto& u : r.units) EXPECT_EQ(u.delta, Duration{0});
  EXPECT_TRUE(r.attribution.empty());
}

TEST(Compare, CalibratedTvSaving) {
  const auto [off, on] = pair_for(fixtures::tv());
  const auto r = compare_traces(off, on);
  EXPECT_NEAR(to_millis(r.total_saved), 4600, 460);
  Duration sum{0};
  for (const auto& p : r.phases) sum += p.saved;
  EXPECT_EQ(sum, r.total_saved);
  Duration attributed{0};
  for (const auto& a : r.attribution) attributed += a.saved;
  EXPECT_EQ(attributed, r.total_saved);
}

TEST(Compare, KernelOnlyChange) {
  const auto set = units({{"a.service", "[Unit]\nX-Sim-Duration=10\n[Service]\nType=oneshot\n"}});
  SimConfig c = plain(1);
  c.kernel_phase = {{"mem", millis(300)}, {"other", millis(100)}};
  const auto before = simulate_boot(set, c, {N("a.service")});
  c.kernel_phase[0].duration = millis(120);
  const auto after = simulate_boot(set, c, {N("a.service")});
  const auto r = compare_traces(before, after);
  EXPECT_EQ(r.total_saved, millis(180));
  for (const auto& p : r.phases) {
    EXPECT_EQ(p.saved, p.label == "kernel:mem" ? millis(180) : Duration{0}) << p.label;
  }
  ASSERT_EQ(r.attribution.size(), 1u);
  EXPECT_EQ(r.attribution[0].feature, "kernel-boost");
}

TEST(Compare, JsonAndText) {
  const auto [off, on] = pair_for(fixtures::tv7());
  const auto r = compare_traces(off, on);
  const auto j = nlohmann::json::parse(comparison_to_json(r));
  EXPECT_TRUE(j.contains("phases"));
  EXPECT_FALSE(comparison_to_text(r).empty());
}

TEST(Metrics, SerialChainParallelismOne) {
  const auto set = units({{"a.service", "[Unit]\nX-Sim-Duration=10\n[Service]\nType=oneshot\n"},
                          {"b.service", "[Unit]\nRequires=a.service\nX-Sim-Duration=10\n[Service]\nType=oneshot\n"},
                          {"c.service", "[Unit]\nRequires=b.service\nX-Sim-Duration=10\n[Service]\nType=oneshot\n"}});
  EXPECT_EQ(compute_metrics(simulate_boot(set, plain(4), {N("c.service")})).max_parallelism, 1u);
}

TEST(Metrics, TwoIndependentOnTwoWorkers) {
  const auto set = units({{"a.service", "[Unit]\nX-Sim-Duration=10\n[Service]\nType=oneshot\n"},
                          {"b.service", "[Unit]\nX-Sim-Duration=10\n[Service]\nType=oneshot\n"}});
  EXPECT_EQ(compute_metrics(simulate_boot(set, plain(2), {N("a.service"), N("b.service")})).max_parallelism, 2u);
}

TEST(Metrics, TvServicePhaseMostlyParallel) {
  const auto [off, on] = pair_for(fixtures::tv());
  for (const auto* t : {&off, &on}) {
    const auto m = compute_metrics(*t);
    std::size_t lo = 0, hi = 0;
    for (const auto& [k, n] : m.parallelism_histogram) (k >= 2 ? hi : lo) += n;
    EXPECT_GT(hi, lo);
  }
  const auto m = compute_metrics(on);
  EXPECT_FALSE(m.deferred_wake_latencies.empty());
  EXPECT_FALSE(emit_metrics(on).empty());
}
