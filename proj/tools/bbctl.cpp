// bbctl: parse, analyze, isolate, pre-parse and simulate unit trees; compare
// and chart traces; benchmark the grace-period primitive.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "bboost/boot_scheduler.hpp"
#include "bboost/dep_graph.hpp"
#include "bboost/ini.hpp"
#include "bboost/sync_booster.hpp"
#include "bboost/trace_report.hpp"
#include "bboost/unit_io.hpp"

namespace fs = std::filesystem;
using namespace bboost;
using ordered_json = nlohmann::ordered_json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kAnalysis = 2, kIo = 3, kSim = 4 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Relative paths that do not exist are looked up under $BB_FIXTURES.
fs::path resolve(const std::string& arg) {
  fs::path p(arg);
  if (fs::exists(p) || p.is_absolute()) return p;
  if (const char* root = std::getenv("BB_FIXTURES"); root && *root) {
    auto q = fs::path(root) / p;
    if (fs::exists(q)) return q;
  }
  return p;
}

ordered_json diag_json(const std::vector<Diagnostic>& diags) {
  auto arr = ordered_json::array();
  for (const auto& d : diags) {
    arr.push_back({{"severity", to_string(d.severity)}, {"unit", d.unit}, {"message", d.message}});
  }
  return arr;
}

void print_diags(const std::vector<Diagnostic>& diags) {
  for (const auto& d : diags) {
    std::cout << to_string(d.severity) << ": " << (d.unit.empty() ? "-" : d.unit) << ": " << d.message
              << "\n";
  }
}

std::set<UnitName> names_of(const std::vector<std::string>& raw) {
  std::set<UnitName> out;
  for (const auto& r : raw) {
    for (auto w : split_words(r)) {
      auto n = UnitName::parse(w);
      if (!n) throw UsageError("invalid unit name '" + std::string(w) + "'");
      out.insert(*n);
    }
  }
  return out;
}

void write_or_print(const std::string& out, const std::string& data) {
  if (out.empty() || out == "-") {
    std::cout << data;
  } else {
    write_atomic(out, data);
  }
}

std::string join(const std::vector<UnitName>& v, std::string_view sep) {
  std::string s;
  for (const auto& n : v) s += (s.empty() ? "" : std::string(sep)) + n.str();
  return s;
}

struct Options {
  bool json = false;
  std::uint64_t seed = 0;

  std::string dir;
  std::string cache;
  std::string config;
  std::string bb = "off";
  std::vector<std::string> completion;
  bool closure_weak = false;
  int workers = 0;
  double overhead = -1;
  std::string out;
  std::size_t cap = 100;
  std::string dot;
  std::string edges;

  std::string trace_a, trace_b;
  std::string format = "text";
  double scale = 5.0;
  std::string metrics;

  std::size_t readers = 4, syncers = 1, iters = 100;
  std::string mode = "conventional";
  long section_min = 50, section_max = 200;
};

int cmd_parse(const Options& o) {
  auto loaded = load_units(resolve(o.dir), std::nullopt);
  const bool bad = has_errors(loaded.diagnostics);
  if (o.json) {
    ordered_json j{{"units", loaded.set.size()},
                   {"dangling", ordered_json::array()},
                   {"diagnostics", diag_json(loaded.diagnostics)}};
    for (const auto& d : loaded.set.dangling) j["dangling"].push_back(d.str());
    std::cout << j.dump(2) << "\n";
  } else {
    print_diags(loaded.diagnostics);
    std::cout << loaded.set.size() << " units parsed, " << loaded.diagnostics.size() << " diagnostics\n";
  }
  return bad ? kAnalysis : kOk;
}

int cmd_analyze(const Options& o) {
  auto loaded = load_units(resolve(o.dir), std::nullopt);
  auto g = build_graph(loaded.set);
  auto report = detect_cycles(g, {.cap = o.cap});
  auto contradictions = detect_contradictions(g);
  std::vector<Diagnostic> all = loaded.diagnostics;
  all.insert(all.end(), g.diagnostics().begin(), g.diagnostics().end());
  all.insert(all.end(), contradictions.begin(), contradictions.end());
  if (!o.dot.empty()) write_atomic(o.dot, export_dot(g));
  if (!o.edges.empty()) write_atomic(o.edges, export_edge_list(g));

  const bool bad = report.has_errors() || has_errors(all);
  if (o.json) {
    ordered_json j;
    j["nodes"] = g.size();
    j["edges"] = g.edges().size();
    auto& cyc = j["cycles"] = ordered_json::array();
    for (const auto& c : report.cycles) {
      ordered_json names = ordered_json::array();
      for (const auto& n : c.nodes) names.push_back(n.str());
      cyc.push_back({{"severity", to_string(c.severity)}, {"nodes", names}});
    }
    j["truncated"] = report.truncated;
    j["diagnostics"] = diag_json(all);
    std::cout << j.dump(2) << "\n";
  } else {
    for (const auto& c : report.cycles) {
      std::cout << "cycle (" << to_string(c.severity) << "): " << join(c.nodes, " -> ") << " -> "
                << c.nodes.front().str() << "\n";
    }
    if (report.truncated) std::cout << "cycle list truncated at " << o.cap << "\n";
    print_diags(all);
    std::cout << g.size() << " nodes, " << g.edges().size() << " edges, " << report.cycles.size()
              << " cycles\n";
  }
  return bad ? kAnalysis : kOk;
}

int cmd_isolate(const Options& o) {
  auto loaded = load_units(resolve(o.dir), std::nullopt);
  auto g = build_graph(loaded.set);
  const auto completion = names_of(o.completion);
  if (completion.empty()) throw UsageError("--completion is required");
  auto group = isolate_bb_group(g, completion, {.follow_weak = o.closure_weak});
  if (o.json) {
    ordered_json j;
    j["completion"] = ordered_json::array();
    for (const auto& c : group.completion_targets) j["completion"].push_back(c.str());
    j["members"] = ordered_json::array();
    for (const auto& m : group.members) j["members"].push_back(m.str());
    auto& ign = j["ignored_constraints"] = ordered_json::array();
    for (const auto& e : group.ignored_constraints) {
      ign.push_back({{"from", e.from.str()}, {"kind", to_string(e.kind)}, {"to", e.to.str()}});
    }
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "members (" << group.members.size() << "):\n";
    for (const auto& m : group.members) std::cout << "  " << m.str() << "\n";
    std::cout << "ignored constraints (" << group.ignored_constraints.size() << "):\n";
    for (const auto& e : group.ignored_constraints) {
      std::cout << "  " << e.from.str() << " -" << to_string(e.kind) << "-> " << e.to.str() << "\n";
    }
  }
  return kOk;
}

int cmd_preparse(const Options& o) {
  if (o.cache.empty()) throw UsageError("--cache is required");
  const auto sources = read_unit_dir(resolve(o.dir));
  auto tree = parse_tree(sources);
  const auto image = encode_cache(tree.set);
  write_atomic(o.cache, std::string_view(reinterpret_cast<const char*>(image.data()), image.size()));
  if (o.json) {
    std::cout << ordered_json{{"units", tree.set.size()},
                              {"bytes", image.size()},
                              {"digest", to_hex(tree.set.source_digest)},
                              {"diagnostics", diag_json(tree.diagnostics)}}
                     .dump(2)
              << "\n";
  } else {
    print_diags(tree.diagnostics);
    std::cout << "wrote " << o.cache << ": " << tree.set.size() << " units, " << image.size()
              << " bytes\n";
  }
  return kOk;
}

int cmd_simulate(const Options& o) {
  if (o.bb != "on" && o.bb != "off") throw UsageError("--bb must be on or off");
  const bool bb = o.bb == "on";
  const auto dir = resolve(o.dir);
  std::optional<fs::path> cache;
  if (!o.cache.empty()) cache = fs::path(o.cache);
  auto loaded = load_units(dir, cache);
  if (!loaded.notice.empty()) std::cerr << "notice: " << loaded.notice << "\n";

  std::string config_text;
  if (!o.config.empty()) {
    config_text = read_text(resolve(o.config));
  } else if (fs::exists(dir / "sim.conf")) {
    config_text = read_text(dir / "sim.conf");
  }
  LoadedConfig lc;
  try {
    lc = configure_boot(loaded.set, config_text, bb, names_of(o.completion),
                        {.follow_weak = o.closure_weak});
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  auto& cfg = lc.config;
  const auto& completion = lc.completion;
  cfg.seed = o.seed;
  if (o.workers > 0) cfg.workers = o.workers;
  if (o.overhead >= 0) cfg.rcu_overhead_per_start = Duration{static_cast<std::int64_t>(o.overhead * 1000.0 + 0.5)};
  const auto trace = simulate_boot(loaded.set, cfg, completion);
  const auto text = trace_to_json(trace);
  if (o.out.empty()) {
    std::cout << text;
  } else {
    write_atomic(o.out, text);
    if (o.json) {
      std::cout << ordered_json{{"trace", o.out},
                                {"boot_completed_at", to_millis(trace.boot_completed_at)},
                                {"from_cache", loaded.from_cache},
                                {"cache_rebuilt", loaded.cache_rebuilt}}
                       .dump(2)
                << "\n";
    } else {
      std::cout << "boot completed at " << format_millis(trace.boot_completed_at) << " ms ("
                << trace.units.size() << " units, bb " << o.bb << ")\n";
    }
  }
  return kOk;
}

ScheduleTrace load_trace(const std::string& p) {
  const auto text = read_text(resolve(p));
  try {
    return trace_from_json(text);
  } catch (const std::runtime_error& e) {
    throw IoError(p + ": " + e.what());
  }
}

int cmd_compare(const Options& o) {
  const auto r = compare_traces(load_trace(o.trace_a), load_trace(o.trace_b));
  write_or_print(o.out, o.json ? comparison_to_json(r) : comparison_to_text(r));
  return kOk;
}

int cmd_chart(const Options& o) {
  const auto t = load_trace(o.trace_a);
  ChartFormat f;
  if (o.format == "svg") {
    f = ChartFormat::SVG;
  } else if (o.format == "text") {
    f = ChartFormat::Text;
  } else {
    throw UsageError("--format must be svg or text");
  }
  ChartOptions copt;
  copt.ms_per_px = o.scale;
  if (!o.metrics.empty()) write_or_print(o.metrics, emit_metrics(t));
  if (o.json) {
    std::cout << ordered_json{{"format", o.format}, {"chart", emit_bootchart(t, f, copt)}}.dump(2) << "\n";
  } else {
    write_or_print(o.out, emit_bootchart(t, f, copt));
  }
  return kOk;
}

int cmd_bench(const Options& o) {
  BenchOptions b;
  b.readers = o.readers;
  b.synchronizers = o.syncers;
  b.iterations = o.iters;
  b.seed = o.seed;
  b.section_min = std::chrono::microseconds(o.section_min);
  b.section_max = std::chrono::microseconds(o.section_max);
  if (o.mode == "conventional") {
    b.mode = BenchMode::Conventional;
  } else if (o.mode == "boosted") {
    b.mode = BenchMode::Boosted;
  } else if (o.mode == "toggle") {
    b.mode = BenchMode::Toggle;
  } else {
    throw UsageError("--mode must be conventional, boosted or toggle");
  }
  BenchReport r;
  try {
    r = bench_contention(b);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  std::cout << (o.json ? bench_to_json(r) : bench_to_table({r}));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boot-time dependency analysis and boot simulation"};
  app.require_subcommand(1, 1);
  Options o;
  app.add_flag("--json", o.json, "machine-readable output")->configurable(false);
  app.add_option("--seed", o.seed, "seed for anything randomized");

  auto* parse = app.add_subcommand("parse", "parse a unit directory and print diagnostics");
  parse->add_option("dir", o.dir)->required();

  auto* analyze = app.add_subcommand("analyze", "report cycles and contradictions");
  analyze->add_option("dir", o.dir)->required();
  analyze->add_option("--cap", o.cap, "maximum cycles reported");
  analyze->add_option("--dot", o.dot, "write a graphviz rendering");
  analyze->add_option("--edges", o.edges, "write the edge list");

  auto* isolate = app.add_subcommand("isolate", "compute the BB group");
  isolate->add_option("dir", o.dir)->required();
  isolate->add_option("--completion", o.completion, "boot-completion units")->required();
  isolate->add_flag("--closure-weak", o.closure_weak, "let Wants= recruit members");

  auto* preparse = app.add_subcommand("preparse", "write the binary pre-parse cache");
  preparse->add_option("dir", o.dir)->required();
  preparse->add_option("--cache", o.cache)->required();

  auto* simulate = app.add_subcommand("simulate", "simulate a boot and write its trace");
  simulate->add_option("dir", o.dir)->required();
  simulate->add_option("--config", o.config, "simulation config (default <dir>/sim.conf)");
  simulate->add_option("--cache", o.cache, "pre-parse cache; rebuilt when stale");
  simulate->add_option("--bb", o.bb, "on|off");
  simulate->add_option("--completion", o.completion, "override the completion units");
  simulate->add_option("--workers", o.workers, "override worker count");
  simulate->add_option("--overhead", o.overhead, "override per-launch sync cost (ms)");
  simulate->add_option("--out", o.out, "trace file (default stdout)");
  simulate->add_flag("--closure-weak", o.closure_weak, "let Wants= recruit BB members");

  auto* compare = app.add_subcommand("compare", "compare two traces");
  compare->add_option("before", o.trace_a)->required();
  compare->add_option("after", o.trace_b)->required();
  compare->add_option("--out", o.out);

  auto* bench = app.add_subcommand("bench-sync", "grace-period contention benchmark");
  bench->add_option("--readers", o.readers);
  bench->add_option("--syncers", o.syncers);
  bench->add_option("--iters", o.iters);
  bench->add_option("--mode", o.mode, "conventional|boosted|toggle");
  bench->add_option("--section-min-us", o.section_min);
  bench->add_option("--section-max-us", o.section_max);

  auto* chart = app.add_subcommand("chart", "render a bootchart from a trace");
  chart->add_option("trace", o.trace_a)->required();
  chart->add_option("--format", o.format, "svg|text");
  chart->add_option("--scale", o.scale, "ms per pixel (svg)");
  chart->add_option("--out", o.out);
  chart->add_option("--metrics", o.metrics, "also write metrics JSON here");

  for (auto* sub : app.get_subcommands({})) {
    sub->add_flag("--json", o.json, "machine-readable output");
    sub->add_option("--seed", o.seed, "seed for anything randomized");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*parse) return cmd_parse(o);
    if (*analyze) return cmd_analyze(o);
    if (*isolate) return cmd_isolate(o);
    if (*preparse) return cmd_preparse(o);
    if (*simulate) return cmd_simulate(o);
    if (*compare) return cmd_compare(o);
    if (*bench) return cmd_bench(o);
    if (*chart) return cmd_chart(o);
  } catch (const UsageError& e) {
    std::cerr << "bbctl: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "bbctl: " << e.what() << "\n";
    return kIo;
  } catch (const EmptyUnitTree& e) {
    std::cerr << "bbctl: " << e.what() << "\n";
    return kAnalysis;
  } catch (const GraphError& e) {
    std::cerr << "bbctl: " << e.what() << "\n";
    if (e.kind() == GraphErrorKind::UnknownNode) return *simulate ? kSim : kUsage;
    return *simulate ? kSim : kAnalysis;
  } catch (const UnknownCompletionTarget& e) {
    std::cerr << "bbctl: " << e.what() << "\n";
    return kSim;
  } catch (const ResourceExhausted& e) {
    std::cerr << "bbctl: " << e.what() << "\n";
    return kUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "bbctl: " << e.what() << "\n";
    return kIo;
  }
  return kUsage;
}
