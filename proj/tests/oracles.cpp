#include "oracles.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace oracle {

using namespace bboost;

ServiceGraph random_graph(std::mt19937_64& rng, const GraphShape& shape) {
  const auto n = shape.nodes;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::uniform_real_distribution<double> coin(0, 1);
  std::uniform_int_distribution<std::int64_t> ms(0, shape.max_ms);
  std::uniform_int_distribution<int> type(0, 2);

  std::vector<GraphNode> nodes;
  std::vector<UnitName> names;
  for (std::size_t i = 0; i < n; ++i) {
    const bool target = shape.allow_targets && coin(rng) < 0.15;
    char buf[32];
    std::snprintf(buf, sizeof buf, "u%02zu.%s", perm[i], target ? "target" : "service");
    names.emplace_back(buf);
    GraphNode node(names.back());
    if (!target) {
      node.type = static_cast<ServiceType>(type(rng));
      node.duration = millis(ms(rng));
      node.fork_point = millis(std::uniform_int_distribution<std::int64_t>(
          0, node.duration.count() / 1000)(rng));
    }
    nodes.push_back(std::move(node));
  }
  std::vector<EdgeKind> kinds{EdgeKind::Strong};
  if (shape.allow_weak) kinds.push_back(EdgeKind::Weak);
  if (shape.allow_order) kinds.push_back(EdgeKind::Order);
  std::vector<NamedEdge> edges;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b || (shape.acyclic && a > b)) continue;
      if (coin(rng) >= shape.edge_prob) continue;
      auto kind = kinds[std::uniform_int_distribution<std::size_t>(0, kinds.size() - 1)(rng)];
      if (names[b].kind() == UnitKind::Target && coin(rng) < 0.5) kind = EdgeKind::Member;
      edges.push_back({names[a], names[b], kind});
    }
  }
  return ServiceGraph(std::move(nodes), std::move(edges));
}

UnitSet to_units(const ServiceGraph& g) {
  UnitSet set;
  for (const auto& n : g.nodes()) {
    if (n.phantom) continue;
    UnitFile u(n.name);
    u.service_type = n.type;
    u.exec_duration = n.duration;
    if (u.effective_type() == ServiceType::Forking) u.fork_point = n.fork_point;
    u.deferred = n.deferred;
    u.priority = n.priority;
    set.units.emplace(n.name, std::move(u));
  }
  for (const auto& e : g.edges()) {
    const auto ne = g.named(e);
    switch (e.kind) {
      case EdgeKind::Strong:
        set.units.at(ne.to).deps.push_back({DependencyKind::Strong, ne.from});
        break;
      case EdgeKind::Weak:
        set.units.at(ne.to).deps.push_back({DependencyKind::Weak, ne.from});
        break;
      case EdgeKind::Order:
        set.units.at(ne.to).deps.push_back({DependencyKind::OrderAfter, ne.from});
        break;
      case EdgeKind::Member:
        set.units.at(ne.from).deps.push_back({DependencyKind::WantedBy, ne.to});
        break;
    }
  }
  set.refresh_dangling();
  return set;
}

ServiceGraph without(const ServiceGraph& g, const std::set<UnitName>& drop) {
  std::vector<GraphNode> nodes;
  for (const auto& n : g.nodes()) {
    if (!drop.count(n.name)) nodes.push_back(n);
  }
  std::vector<NamedEdge> edges;
  for (const auto& e : g.edges()) {
    auto ne = g.named(e);
    if (!drop.count(ne.from) && !drop.count(ne.to)) edges.push_back(ne);
  }
  return ServiceGraph(std::move(nodes), std::move(edges));
}

std::vector<RefCycle> all_cycles(const ServiceGraph& g) {
  const auto n = g.size();
  // hop[a][b]: 0 none, 1 weak only, 2 some non-weak edge
  std::vector<std::vector<int>> hop(n, std::vector<int>(n, 0));
  for (const auto& e : g.edges()) {
    const int h = e.kind == EdgeKind::Weak ? 1 : 2;
    hop[e.from][e.to] = std::max(hop[e.from][e.to], h);
  }
  std::vector<RefCycle> out;
  std::vector<std::size_t> path;
  std::vector<bool> on(n, false);
  std::function<void(std::size_t, std::size_t)> dfs = [&](std::size_t s, std::size_t v) {
    for (std::size_t w = s; w < n; ++w) {
      if (!hop[v][w]) continue;
      if (w == s) {
        RefCycle c{path, true};
        for (std::size_t i = 0; i < path.size(); ++i) {
          if (hop[path[i]][path[(i + 1) % path.size()]] != 2) c.error = false;
        }
        out.push_back(std::move(c));
      } else if (!on[w]) {
        on[w] = true;
        path.push_back(w);
        dfs(s, w);
        path.pop_back();
        on[w] = false;
      }
    }
  };
  for (std::size_t s = 0; s < n; ++s) {
    path = {s};
    on.assign(n, false);
    on[s] = true;
    dfs(s, s);
  }
  std::sort(out.begin(), out.end());
  return out;
}

Duration longest_path(const ServiceGraph& g, const std::map<UnitName, Duration>& delays) {
  const auto n = g.size();
  auto delay = [&](std::size_t v) { return delays.at(g.node(v).name); };
  Duration best{0};
  std::vector<bool> on(n, false);
  std::function<void(std::size_t, Duration)> walk = [&](std::size_t v, Duration acc) {
    best = std::max(best, acc + delay(v));
    on[v] = true;
    for (const auto& e : g.edges()) {
      if (e.from != v || on[e.to]) continue;
      walk(e.to, acc + (gates_on_ready(e.kind) ? delay(v) : Duration{0}));
    }
    on[v] = false;
  };
  for (std::size_t v = 0; v < n; ++v) walk(v, Duration{0});
  return best;
}

std::set<UnitName> strong_closure(const ServiceGraph& g, const std::set<UnitName>& roots,
                                  bool follow_weak) {
  const auto n = g.size();
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) reach[i][i] = true;
  for (const auto& e : g.edges()) {
    if (e.kind == EdgeKind::Strong || (follow_weak && e.kind == EdgeKind::Weak)) {
      reach[e.from][e.to] = true;
    }
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (reach[i][k] && reach[k][j]) reach[i][j] = true;
  std::set<UnitName> out;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (reach[i][j] && roots.count(g.node(j).name)) out.insert(g.node(i).name);
    }
  }
  return out;
}

namespace {

constexpr Duration kUnset = Duration::max();

bool instant(const GraphNode& n) { return n.phantom || n.name.kind() == UnitKind::Target; }

struct Times {
  Duration launch = kUnset, start = kUnset, ready = kUnset, finish = kUnset;
};

// Earliest time the gates on v open, or kUnset if some predecessor has not
// launched yet.
Duration gate(const ServiceGraph& g, const std::vector<Times>& tm, std::size_t v) {
  Duration at{0};
  for (const auto& e : g.edges()) {
    if (e.to != v) continue;
    const auto& p = tm[e.from];
    if (p.launch == kUnset) return kUnset;
    at = std::max(at, gates_on_ready(e.kind) ? p.ready : p.start);
  }
  return at;
}

void place(const ServiceGraph& g, std::vector<Times>& tm, std::size_t v, Duration t,
           Duration overhead) {
  const auto& node = g.node(v);
  auto& x = tm[v];
  x.launch = t;
  if (instant(node)) {
    x.start = x.ready = x.finish = t;
    return;
  }
  x.start = t + overhead;
  x.ready = readiness_time(node.type, x.start, node.duration, node.fork_point);
  x.finish = x.start + node.duration;
}

// Launches every instant unit whose gates are open by `t`.
void settle_instant(const ServiceGraph& g, std::vector<Times>& tm, Duration t) {
  bool again = true;
  while (again) {
    again = false;
    for (std::size_t v = 0; v < g.size(); ++v) {
      if (tm[v].launch != kUnset || !instant(g.node(v))) continue;
      const auto at = gate(g, tm, v);
      if (at != kUnset && at <= t) {
        place(g, tm, v, t, Duration{0});
        again = true;
      }
    }
  }
}

}  // namespace

Duration optimal_completion(const ServiceGraph& g, int workers, Duration overhead,
                            const std::set<UnitName>& completion) {
  const auto n = g.size();
  std::vector<std::size_t> targets;
  for (const auto& c : completion) targets.push_back(*g.index_of(c));
  Duration best = kUnset;

  std::function<void(std::vector<Times>, Duration)> search = [&](std::vector<Times> tm, Duration t) {
    settle_instant(g, tm, t);
    if (std::all_of(tm.begin(), tm.end(), [](const Times& x) { return x.launch != kUnset; })) {
      Duration c{0};
      for (auto v : targets) c = std::max(c, tm[v].ready);
      best = std::min(best, c);
      return;
    }
    int busy = 0;
    for (std::size_t v = 0; v < n; ++v) {
      if (tm[v].launch != kUnset && !instant(g.node(v)) && tm[v].launch <= t && tm[v].finish > t) ++busy;
    }
    std::vector<std::size_t> open;
    for (std::size_t v = 0; v < n; ++v) {
      if (tm[v].launch != kUnset || instant(g.node(v))) continue;
      const auto at = gate(g, tm, v);
      if (at != kUnset && at <= t) open.push_back(v);
    }
    Duration next = kUnset;
    for (const auto& x : tm) {
      for (auto d : {x.start, x.ready, x.finish}) {
        if (d != kUnset && d > t) next = std::min(next, d);
      }
    }
    const int free = workers - busy;
    // Every subset of the open units that fits the free slots.
    for (std::uint32_t mask = 0; mask < (1u << open.size()); ++mask) {
      if (__builtin_popcount(mask) > free) continue;
      auto tm2 = tm;
      for (std::size_t i = 0; i < open.size(); ++i) {
        if (mask & (1u << i)) place(g, tm2, open[i], t, overhead);
      }
      if (mask != 0) {
        // More units may open at this same instant; the empty choice below
        // moves the clock on.
        search(std::move(tm2), t);
      } else if (next != kUnset) {
        search(std::move(tm2), next);
      }
    }
  };
  search(std::vector<Times>(n), Duration{0});
  if (best == kUnset) throw std::logic_error("no feasible schedule");
  return best;
}

Replay tick_replay(const ServiceGraph& g0, const SimConfig& cfg,
                   const std::set<UnitName>& completion) {
  // Drop outsider-to-member edges when isolating.
  std::vector<NamedEdge> edges;
  for (const auto& e : g0.edges()) {
    auto ne = g0.named(e);
    if (cfg.bb_group && cfg.isolate && !cfg.bb_group->is_member(ne.from) &&
        cfg.bb_group->is_member(ne.to)) {
      continue;
    }
    edges.push_back(ne);
  }
  const ServiceGraph g(g0.nodes(), edges);
  const auto n = g.size();
  const Duration tick = millis(1);
  if (cfg.rcu_overhead_per_start.count() % tick.count() != 0) {
    throw std::invalid_argument("tick_replay needs whole-ms overhead");
  }
  Duration t0{0};
  for (const auto& k : cfg.kernel_phase) t0 += k.duration;
  for (const auto& k : cfg.init_tasks) {
    if (!(k.deferrable && cfg.defer_policy == DeferPolicy::DeferAll)) t0 += k.duration;
  }
  if (!cfg.preparsed) {
    for (const auto& k : cfg.load_tasks) t0 += k.duration;
  }

  std::vector<Times> tm(n);
  std::vector<Duration> slot_free(static_cast<std::size_t>(cfg.workers), t0);
  auto rank = [&](std::size_t v) {
    const bool first = cfg.bb_group && cfg.prioritize && cfg.bb_group->is_member(g.node(v).name);
    return std::make_tuple(first ? 0 : 1, -g.node(v).priority, g.node(v).name.str());
  };
  for (Duration t = t0;; t += tick) {
    bool again = true;
    while (again) {
      again = false;
      for (std::size_t v = 0; v < n; ++v) {
        if (tm[v].launch != kUnset || !instant(g.node(v))) continue;
        const auto at = gate(g, tm, v);
        if (at != kUnset && at <= t) {
          place(g, tm, v, t, Duration{0});
          again = true;
        }
      }
      if (again) continue;
      std::vector<std::size_t> open;
      for (std::size_t v = 0; v < n; ++v) {
        if (tm[v].launch != kUnset || instant(g.node(v))) continue;
        const auto at = gate(g, tm, v);
        if (at != kUnset && at <= t) open.push_back(v);
      }
      std::sort(open.begin(), open.end(), [&](auto a, auto b) { return rank(a) < rank(b); });
      for (auto v : open) {
        auto w = std::find_if(slot_free.begin(), slot_free.end(), [&](Duration f) { return f <= t; });
        if (w == slot_free.end()) break;
        place(g, tm, v, t, cfg.rcu_overhead_per_start);
        *w = tm[v].finish;
        again = true;
      }
    }
    if (std::all_of(tm.begin(), tm.end(), [](const Times& x) { return x.launch != kUnset; })) break;
    if (t > t0 + millis(100000)) throw std::logic_error("replay did not converge");
  }
  Replay out;
  out.completion = completion.empty() ? t0 : Duration{0};
  for (std::size_t v = 0; v < n; ++v) out.launched[g.node(v).name] = tm[v].launch;
  for (const auto& c : completion) {
    out.completion = std::max(out.completion, tm[*g.index_of(c)].ready);
  }
  if (!completion.empty()) out.completion = std::max(out.completion, t0);
  return out;
}

std::vector<std::string> safety_violations(const ServiceGraph& g, const ScheduleTrace& t,
                                           const std::set<NamedEdge>* skip) {
  std::vector<std::string> out;
  for (const auto& e : g.edges()) {
    const auto ne = g.named(e);
    if (skip && skip->count(ne)) continue;
    const auto* a = t.find(ne.from);
    const auto* b = t.find(ne.to);
    if (!a || !b) {
      out.push_back("missing unit for edge " + ne.from.str() + " -> " + ne.to.str());
      continue;
    }
    const bool ok = gates_on_ready(e.kind) ? a->ready_at <= b->started_at
                                           : a->started_at <= b->started_at;
    if (!ok) {
      out.push_back(std::string(to_string(e.kind)) + " " + ne.from.str() + " -> " + ne.to.str());
    }
  }
  for (const auto& u : t.units) {
    if (!(u.queued_at <= u.started_at && u.started_at <= u.ready_at && u.ready_at <= u.finished_at)) {
      out.push_back("time order broken for " + u.name.str());
    }
  }
  return out;
}

}  // namespace oracle
