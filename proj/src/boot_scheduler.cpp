#include "bboost/boot_scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include <json.hpp>

#include "bboost/ini.hpp"

namespace bboost {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr Duration kNever = Duration::max();

std::set<std::size_t> ancestors(const ServiceGraph& g,
                                const std::vector<std::size_t>& roots,
                                bool (*follow)(EdgeKind)) {
  std::set<std::size_t> seen(roots.begin(), roots.end());
  std::vector<std::size_t> work(roots.begin(), roots.end());
  while (!work.empty()) {
    auto v = work.back();
    work.pop_back();
    for (auto k : g.in_edges(v)) {
      const auto& e = g.edges()[k];
      if (follow(e.kind) && seen.insert(e.from).second) work.push_back(e.from);
    }
  }
  return seen;
}

bool strong_class(EdgeKind k) { return gates_on_ready(k); }
bool every_kind(EdgeKind) { return true; }

class Simulation {
 public:
  Simulation(const ServiceGraph& g, const SimConfig& cfg,
             const std::set<UnitName>& completion)
      : cfg_(cfg), completion_(completion) {
    cfg.validate();
    for (const auto& c : completion) {
      if (!g.index_of(c)) throw UnknownCompletionTarget(c.str());
    }
    const bool isolating = cfg.bb_group && cfg.isolate;
    std::vector<NamedEdge> active;
    for (const auto& e : g.edges()) {
      auto ne = g.named(e);
      if (isolating && !cfg.bb_group->is_member(ne.from) &&
          cfg.bb_group->is_member(ne.to)) {
        continue;
      }
      active.push_back(std::move(ne));
    }
    g_ = ServiceGraph(g.nodes(), std::move(active));
    topological_order(g_);  // throws on any cycle, Weak ones included
  }

  ScheduleTrace run() {
    Duration t{0};
    for (const auto& k : cfg_.kernel_phase) {
      trace_.phases.push_back({"kernel:" + k.label, t, t + k.duration});
      event(t, "kernel " + k.label);
      t += k.duration;
      trace_.flags.kernel_total += k.duration;
    }
    const auto init_begin = t;
    std::vector<InitTask> post;
    for (const auto& task : cfg_.init_tasks) {
      if (task.deferrable && cfg_.defer_policy == DeferPolicy::DeferAll) {
        post.push_back(task);
        continue;
      }
      event(t, "init " + task.label);
      t += task.duration;
    }
    trace_.phases.push_back({"init", init_begin, t});
    const auto load_begin = t;
    if (!cfg_.preparsed) {
      for (const auto& task : cfg_.load_tasks) {
        event(t, "load " + task.label);
        t += task.duration;
      }
    }
    trace_.phases.push_back({"load", load_begin, t});
    t0_ = t;

    launch_units();

    trace_.phases.push_back({"services", t0_, completion_at_});
    trace_.boot_completed_at = completion_at_;
    auto last = std::max(t0_, completion_at_);
    for (const auto& u : trace_.units) last = std::max(last, u.finished_at);

    Duration exec = completion_at_;
    for (const auto& task : post) {
      DeferredRun run{task.label, exec, exec + task.duration, exec - completion_at_};
      event(exec, "deferred-init " + task.label);
      exec = run.finished_at;
      trace_.deferred_executed.push_back(std::move(run));
    }
    trace_.all_finished_at = std::max(last, exec);

    std::stable_sort(trace_.events.begin(), trace_.events.end(),
                     [](const TraceEvent& a, const TraceEvent& b) { return a.time < b.time; });
    trace_.completion = completion_;
    auto& f = trace_.flags;
    f.workers = cfg_.workers;
    f.defer_policy = cfg_.defer_policy;
    f.bb_group = cfg_.bb_group.has_value();
    f.prioritize = f.bb_group && cfg_.prioritize;
    f.isolate = f.bb_group && cfg_.isolate;
    f.preparsed = cfg_.preparsed;
    f.rcu_overhead = cfg_.rcu_overhead_per_start;
    return std::move(trace_);
  }

 private:
  struct State {
    bool held = false;
    bool member = false;
    bool done = false;  // launched
    Duration queued = kNever;
    Duration launched = kNever;
    Duration started = kNever;
    Duration ready = kNever;
    Duration finished = kNever;
  };

  void event(Duration t, std::string what) {
    trace_.events.push_back({t, std::move(what)});
  }

  bool eligible(std::size_t v, Duration t) const {
    for (auto k : g_.in_edges(v)) {
      const auto& e = g_.edges()[k];
      const auto& p = st_[e.from];
      const auto when = gates_on_ready(e.kind) ? p.ready : p.started;
      if (when > t) return false;
    }
    return true;
  }

  // Smaller sorts first.
  auto launch_key(std::size_t v) const {
    const auto& s = st_[v];
    const bool first = cfg_.bb_group && cfg_.prioritize && s.member;
    return std::make_tuple(s.held, !first, -g_.node(v).priority, v);
  }

  void launch_units() {
    const auto n = g_.size();
    st_.assign(n, {});
    std::vector<std::size_t> targets;
    for (const auto& c : completion_) targets.push_back(*g_.index_of(c));
    const auto required = ancestors(g_, targets, every_kind);
    for (std::size_t v = 0; v < n; ++v) {
      const auto& node = g_.node(v);
      st_[v].member = cfg_.bb_group && cfg_.bb_group->is_member(node.name);
      if (node.deferred && !node.phantom) {
        if (required.count(v)) {
          event(t0_, "deferral-refused " + node.name.str());
        } else {
          st_[v].held = true;
        }
      }
    }

    std::vector<Duration> busy(static_cast<std::size_t>(cfg_.workers), t0_);
    std::size_t remaining = n;
    bool complete = false;
    bool released = false;
    Duration t = t0_;
    if (targets.empty()) {
      complete = true;
      completion_at_ = t0_;
    }

    while (true) {
      bool progress = true;
      while (progress) {
        progress = false;
        if (complete && !released && completion_at_ <= t) {
          released = true;
          progress = true;
          event(t, "boot-complete");
        }
        std::vector<std::size_t> ready_set;
        for (std::size_t v = 0; v < n; ++v) {
          auto& s = st_[v];
          if (s.done || (s.held && !released) || !eligible(v, t)) continue;
          if (s.queued == kNever) s.queued = t;
          const auto& node = g_.node(v);
          if (node.phantom || node.name.kind() == UnitKind::Target) {
            s.done = true;
            s.launched = s.started = s.ready = s.finished = t;
            --remaining;
            progress = true;
            continue;
          }
          ready_set.push_back(v);
        }
        // instant units first; their successors may join this round
        if (progress) continue;
        std::sort(ready_set.begin(), ready_set.end(),
                  [&](auto a, auto b) { return launch_key(a) < launch_key(b); });
        for (auto v : ready_set) {
          auto w = std::find_if(busy.begin(), busy.end(), [&](Duration b) { return b <= t; });
          if (w == busy.end()) break;
          const auto& node = g_.node(v);
          auto& s = st_[v];
          s.done = true;
          s.launched = t;
          s.started = t + cfg_.rcu_overhead_per_start;
          s.ready = readiness_time(node.type, s.started, node.duration, node.fork_point);
          s.finished = s.started + node.duration;
          *w = s.finished;
          --remaining;
          progress = true;
          event(t, "launch " + node.name.str());
        }
        if (!complete &&
            std::all_of(targets.begin(), targets.end(), [&](auto v) { return st_[v].done; })) {
          complete = true;
          completion_at_ = t0_;
          for (auto v : targets) completion_at_ = std::max(completion_at_, st_[v].ready);
          progress = true;
        }
      }
      if (remaining == 0) break;

      Duration next = kNever;
      auto consider = [&](Duration d) {
        if (d > t && d < next) next = d;
      };
      for (const auto& s : st_) {
        if (!s.done) continue;
        consider(s.started);
        consider(s.ready);
        consider(s.finished);
      }
      if (complete && !released) consider(completion_at_);
      if (next == kNever) {
        throw std::logic_error("simulation stalled with units pending");
      }
      t = next;
    }
    if (complete && !released) event(completion_at_, "boot-complete");

    for (std::size_t v = 0; v < n; ++v) {
      const auto& node = g_.node(v);
      const auto& s = st_[v];
      UnitTrace u{node.name};
      u.phantom = node.phantom;
      u.target = node.name.kind() == UnitKind::Target;
      u.bb_member = s.member;
      u.deferred = s.held;
      u.queued_at = s.queued;
      u.launched_at = s.launched;
      u.started_at = s.started;
      u.ready_at = s.ready;
      u.finished_at = s.finished;
      if (!u.phantom && !u.target) {
        event(s.started, "start " + node.name.str());
        event(s.ready, "ready " + node.name.str());
      }
      trace_.units.push_back(std::move(u));
    }
  }

  const SimConfig& cfg_;
  const std::set<UnitName>& completion_;
  ServiceGraph g_;
  std::vector<State> st_;
  Duration t0_{0};
  Duration completion_at_{0};
  ScheduleTrace trace_;
};

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

Duration config_millis(const IniLine& l, std::string_view text) {
  auto d = parse_millis(text);
  if (!d) {
    throw std::invalid_argument("line " + std::to_string(l.line) +
                                ": bad duration '" + std::string(text) + "'");
  }
  return *d;
}

bool config_bool(const IniLine& l) {
  const auto v = lower(l.value);
  if (v == "yes" || v == "true" || v == "on" || v == "1") return true;
  if (v == "no" || v == "false" || v == "off" || v == "0") return false;
  throw std::invalid_argument("line " + std::to_string(l.line) + ": bad boolean");
}

// "<label> <ms>" or "<label> <ms> <boosted ms>".
std::pair<std::string, Duration> labelled(const IniLine& l, bool boosted,
                                          bool allow_boosted) {
  const auto words = split_words(l.value);
  const std::size_t max_words = allow_boosted ? 3 : 2;
  if (words.size() < 2 || words.size() > max_words) {
    throw std::invalid_argument("line " + std::to_string(l.line) +
                                ": expected '<label> <ms>'");
  }
  auto d = config_millis(l, words[1]);
  if (boosted && words.size() == 3) d = config_millis(l, words[2]);
  return {std::string(words[0]), d};
}

ordered_json ms(Duration d) { return to_millis(d); }

Duration read_ms(const nlohmann::json& j) {
  if (!j.is_number()) throw std::runtime_error("trace: expected a number");
  return Duration{std::llround(j.get<double>() * 1000.0)};
}

}  // namespace

std::string_view to_string(DeferPolicy p) {
  return p == DeferPolicy::DeferAll ? "defer-all" : "none";
}

void SimConfig::validate() const {
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  auto neg = [](Duration d) { return d < Duration{0}; };
  for (const auto& k : kernel_phase) {
    if (neg(k.duration)) throw std::invalid_argument("negative kernel duration");
  }
  for (const auto& k : init_tasks) {
    if (neg(k.duration)) throw std::invalid_argument("negative init duration");
  }
  for (const auto& k : load_tasks) {
    if (neg(k.duration)) throw std::invalid_argument("negative load duration");
  }
  if (neg(rcu_overhead_per_start)) throw std::invalid_argument("negative overhead");
}

const UnitTrace* ScheduleTrace::find(const UnitName& n) const {
  auto it = std::lower_bound(units.begin(), units.end(), n,
                             [](const UnitTrace& u, const UnitName& key) { return u.name < key; });
  return it != units.end() && it->name == n ? &*it : nullptr;
}

Duration readiness_time(ServiceType type, Duration started_at,
                        Duration duration, Duration fork_point) {
  switch (type) {
    case ServiceType::Simple: return started_at;
    case ServiceType::Forking: return started_at + std::min(fork_point, duration);
    case ServiceType::Oneshot: return started_at + duration;
  }
  return started_at;
}

DeferralResult apply_deferral(const UnitSet& set, const SimConfig& cfg,
                              const BBGroup& group) {
  DeferralResult out{set, {}, {}};
  const auto g = build_graph(set);
  std::vector<std::size_t> roots;
  for (const auto& m : group.members) {
    if (auto i = g.index_of(m)) roots.push_back(*i);
  }
  const auto keep = ancestors(g, roots, strong_class);
  const bool defer_all = cfg.defer_policy == DeferPolicy::DeferAll;
  for (auto& [name, u] : out.set.units) {
    const bool needed = keep.count(*g.index_of(name)) != 0;
    if (needed) {
      if (u.deferred) {
        u.deferred = false;
        out.diagnostics.push_back({Severity::Warning, name.str(),
                                   "deferral refused: required by the BB group"});
      }
    } else if (defer_all) {
      u.deferred = true;
    }
  }
  if (defer_all) {
    for (const auto& task : cfg.init_tasks) {
      if (task.deferrable) out.deferred_init.push_back(task);
    }
  }
  return out;
}

ScheduleTrace simulate_graph(const ServiceGraph& g, const SimConfig& cfg,
                             const std::set<UnitName>& completion) {
  return Simulation(g, cfg, completion).run();
}

ScheduleTrace simulate_boot(const UnitSet& set, const SimConfig& cfg,
                            const std::set<UnitName>& completion) {
  cfg.validate();
  for (const auto& c : completion) {
    if (!set.contains(c) && !set.dangling.count(c)) {
      throw UnknownCompletionTarget(c.str());
    }
  }
  if (!cfg.bb_group && cfg.defer_policy == DeferPolicy::None) {
    return simulate_graph(build_graph(set), cfg, completion);
  }
  const auto group = cfg.bb_group ? *cfg.bb_group
                                  : isolate_bb_group(build_graph(set), completion);
  auto deferral = apply_deferral(set, cfg, group);
  auto trace = simulate_graph(build_graph(deferral.set), cfg, completion);
  for (const auto& d : deferral.diagnostics) {
    trace.events.insert(trace.events.begin(), {Duration{0}, "deferral-refused " + d.unit});
  }
  return trace;
}

Duration boot_completion_time(const ScheduleTrace& trace,
                              const std::set<UnitName>& completion) {
  Duration out{0};
  for (const auto& c : completion) {
    const auto* u = trace.find(c);
    if (!u) throw UnknownCompletionTarget(c.str());
    out = std::max(out, u->ready_at);
  }
  return out;
}

LoadedConfig load_sim_config(std::string_view text, bool boosted) {
  LoadedConfig out;
  auto& cfg = out.config;
  cfg.rcu_overhead_per_start = boosted ? kBoostedRcuOverhead : kConventionalRcuOverhead;
  cfg.defer_policy = boosted ? DeferPolicy::DeferAll : DeferPolicy::None;
  cfg.preparsed = boosted;
  Duration conventional = kConventionalRcuOverhead;
  Duration fast = kBoostedRcuOverhead;

  std::string section;
  for (const auto& l : lex_ini(text)) {
    if (l.kind == IniLine::Kind::Section) {
      section = std::string(l.name);
      if (section != "Simulation" && section != "Kernel" && section != "Init" &&
          section != "Load") {
        throw std::invalid_argument("line " + std::to_string(l.line) +
                                    ": unknown section [" + section + "]");
      }
      continue;
    }
    const std::string key(l.name);
    auto bad_key = [&] {
      return std::invalid_argument("line " + std::to_string(l.line) + ": unknown key " +
                                   key + " in [" + section + "]");
    };
    if (section == "Simulation") {
      if (key == "Workers") {
        int w = 0;
        try {
          w = std::stoi(std::string(l.value));
        } catch (const std::exception&) {
          throw std::invalid_argument("line " + std::to_string(l.line) + ": bad worker count");
        }
        cfg.workers = w;
      } else if (key == "Completion") {
        for (auto w : split_words(l.value)) out.completion.insert(UnitName(w));
      } else if (key == "Seed") {
        cfg.seed = std::stoull(std::string(l.value));
      } else if (key == "RcuOverhead") {
        conventional = config_millis(l, l.value);
      } else if (key == "BoostedRcuOverhead") {
        fast = config_millis(l, l.value);
      } else if (key == "DeferPolicy") {
        const auto v = lower(l.value);
        if (v == "none") cfg.defer_policy = DeferPolicy::None;
        else if (v == "defer-all") cfg.defer_policy = DeferPolicy::DeferAll;
        else throw std::invalid_argument("line " + std::to_string(l.line) + ": bad DeferPolicy");
      } else if (key == "Preparsed") {
        cfg.preparsed = config_bool(l);
      } else {
        throw bad_key();
      }
    } else if (section == "Kernel") {
      if (key != "Phase") throw bad_key();
      auto [label, d] = labelled(l, boosted, true);
      cfg.kernel_phase.push_back({label, d});
    } else if (section == "Init") {
      if (key != "Task" && key != "DeferrableTask") throw bad_key();
      auto [label, d] = labelled(l, boosted, false);
      cfg.init_tasks.push_back({label, d, key == "DeferrableTask"});
    } else if (section == "Load") {
      if (key != "Task") throw bad_key();
      auto [label, d] = labelled(l, boosted, false);
      cfg.load_tasks.push_back({label, d});
    } else {
      throw std::invalid_argument("line " + std::to_string(l.line) +
                                  ": assignment outside a section");
    }
  }
  cfg.rcu_overhead_per_start = boosted ? fast : conventional;
  cfg.validate();
  return out;
}

LoadedConfig configure_boot(const UnitSet& set, std::string_view config_text,
                            bool boosted, const std::set<UnitName>& completion,
                            IsolateOptions iso) {
  auto out = load_sim_config(config_text, boosted);
  if (!completion.empty()) out.completion = completion;
  if (boosted) out.config.bb_group = isolate_bb_group(build_graph(set), out.completion, iso);
  return out;
}

std::string trace_to_json(const ScheduleTrace& trace) {
  ordered_json j;
  j["boot_completed_at"] = ms(trace.boot_completed_at);
  j["all_finished_at"] = ms(trace.all_finished_at);
  auto& comp = j["completion"] = ordered_json::array();
  for (const auto& c : trace.completion) comp.push_back(c.str());
  const auto& f = trace.flags;
  j["flags"] = {
      {"workers", f.workers},
      {"defer_policy", to_string(f.defer_policy)},
      {"bb_group", f.bb_group},
      {"prioritize", f.prioritize},
      {"isolate", f.isolate},
      {"preparsed", f.preparsed},
      {"rcu_overhead", ms(f.rcu_overhead)},
      {"kernel_total", ms(f.kernel_total)},
  };
  auto& phases = j["phases"] = ordered_json::array();
  for (const auto& p : trace.phases) {
    phases.push_back({{"label", p.label}, {"begin", ms(p.begin)}, {"end", ms(p.end)}});
  }
  auto& units = j["units"] = ordered_json::array();
  for (const auto& u : trace.units) {
    units.push_back({
        {"name", u.name.str()},
        {"phantom", u.phantom},
        {"target", u.target},
        {"bb_member", u.bb_member},
        {"deferred", u.deferred},
        {"queued_at", ms(u.queued_at)},
        {"launched_at", ms(u.launched_at)},
        {"started_at", ms(u.started_at)},
        {"ready_at", ms(u.ready_at)},
        {"finished_at", ms(u.finished_at)},
    });
  }
  auto& def = j["deferred_executed"] = ordered_json::array();
  for (const auto& d : trace.deferred_executed) {
    def.push_back({{"label", d.label},
                   {"started_at", ms(d.started_at)},
                   {"finished_at", ms(d.finished_at)},
                   {"wake_latency", ms(d.wake_latency)}});
  }
  auto& ev = j["events"] = ordered_json::array();
  for (const auto& e : trace.events) ev.push_back({{"time", ms(e.time)}, {"event", e.what}});
  return j.dump(2) + "\n";
}

ScheduleTrace trace_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("trace: ") + e.what());
  }
  try {
    ScheduleTrace t;
    t.boot_completed_at = read_ms(j.at("boot_completed_at"));
    t.all_finished_at = read_ms(j.at("all_finished_at"));
    for (const auto& c : j.at("completion")) t.completion.insert(UnitName(c.get<std::string>()));
    const auto& f = j.at("flags");
    t.flags.workers = f.at("workers").get<int>();
    t.flags.defer_policy = f.at("defer_policy").get<std::string>() == "defer-all"
                               ? DeferPolicy::DeferAll
                               : DeferPolicy::None;
    t.flags.bb_group = f.at("bb_group").get<bool>();
    t.flags.prioritize = f.at("prioritize").get<bool>();
    t.flags.isolate = f.at("isolate").get<bool>();
    t.flags.preparsed = f.at("preparsed").get<bool>();
    t.flags.rcu_overhead = read_ms(f.at("rcu_overhead"));
    t.flags.kernel_total = read_ms(f.at("kernel_total"));
    for (const auto& p : j.at("phases")) {
      t.phases.push_back({p.at("label").get<std::string>(), read_ms(p.at("begin")),
                          read_ms(p.at("end"))});
    }
    for (const auto& u : j.at("units")) {
      UnitTrace ut{UnitName(u.at("name").get<std::string>())};
      ut.phantom = u.at("phantom").get<bool>();
      ut.target = u.at("target").get<bool>();
      ut.bb_member = u.at("bb_member").get<bool>();
      ut.deferred = u.at("deferred").get<bool>();
      ut.queued_at = read_ms(u.at("queued_at"));
      ut.launched_at = read_ms(u.at("launched_at"));
      ut.started_at = read_ms(u.at("started_at"));
      ut.ready_at = read_ms(u.at("ready_at"));
      ut.finished_at = read_ms(u.at("finished_at"));
      t.units.push_back(std::move(ut));
    }
    std::sort(t.units.begin(), t.units.end(),
              [](const UnitTrace& a, const UnitTrace& b) { return a.name < b.name; });
    for (const auto& d : j.at("deferred_executed")) {
      t.deferred_executed.push_back({d.at("label").get<std::string>(),
                                     read_ms(d.at("started_at")),
                                     read_ms(d.at("finished_at")),
                                     read_ms(d.at("wake_latency"))});
    }
    for (const auto& e : j.at("events")) {
      t.events.push_back({read_ms(e.at("time")), e.at("event").get<std::string>()});
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("trace: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("trace: ") + e.what());
  }
}

}  // namespace bboost
