#include "bboost/dep_graph.hpp"

#include <algorithm>
#include <functional>
#include <queue>
#include <sstream>

namespace bboost {

namespace {

std::string join_names(const std::vector<UnitName>& names,
                       std::string_view sep) {
  std::string out;
  for (const auto& n : names) {
    if (!out.empty()) out += sep;
    out += n.str();
  }
  return out;
}

// Compressed adjacency over the edges accepted by a filter, parallel edges
// collapsed, neighbours in ascending index order.
struct Adjacency {
  std::vector<std::vector<std::size_t>> out;

  Adjacency(const ServiceGraph& g,
            const std::function<bool(EdgeKind)>& accept) : out(g.size()) {
    for (const auto& e : g.edges()) {
      if (!accept(e.kind)) continue;
      auto& list = out[e.from];
      if (list.empty() || list.back() != e.to) list.push_back(e.to);
    }
  }
};

bool non_weak(EdgeKind k) { return k != EdgeKind::Weak; }
bool any_kind(EdgeKind) { return true; }

// Johnson's elementary circuit enumeration.
class CircuitFinder {
 public:
  CircuitFinder(const Adjacency& adj, std::size_t limit)
      : adj_(adj), n_(adj.out.size()), limit_(limit) {}

  // Returns false if the limit was reached before the enumeration finished.
  bool run() {
    for (std::size_t s = 0; s < n_; ++s) {
      auto comp = component_of(s);
      if (comp.size() < 2) continue;
      in_comp_.assign(n_, false);
      for (auto v : comp) in_comp_[v] = true;
      blocked_.assign(n_, false);
      blocked_by_.assign(n_, {});
      start_ = s;
      if (!circuit(s)) return false;
    }
    return true;
  }

  std::vector<std::vector<std::size_t>>& cycles() { return cycles_; }

 private:
  // Strongly connected component of s within the subgraph of nodes >= s.
  std::vector<std::size_t> component_of(std::size_t s) {
    std::vector<char> fwd(n_, 0), bwd(n_, 0);
    std::vector<std::size_t> stack{s};
    fwd[s] = 1;
    while (!stack.empty()) {
      auto v = stack.back();
      stack.pop_back();
      for (auto w : adj_.out[v]) {
        if (w >= s && !fwd[w]) {
          fwd[w] = 1;
          stack.push_back(w);
        }
      }
    }
    // Reverse reachability restricted to nodes reachable forward.
    std::vector<std::vector<std::size_t>> rev(n_);
    for (std::size_t v = s; v < n_; ++v) {
      if (!fwd[v]) continue;
      for (auto w : adj_.out[v]) {
        if (w >= s && fwd[w]) rev[w].push_back(v);
      }
    }
    stack = {s};
    bwd[s] = 1;
    while (!stack.empty()) {
      auto v = stack.back();
      stack.pop_back();
      for (auto w : rev[v]) {
        if (!bwd[w]) {
          bwd[w] = 1;
          stack.push_back(w);
        }
      }
    }
    std::vector<std::size_t> comp;
    for (std::size_t v = s; v < n_; ++v) {
      if (fwd[v] && bwd[v]) comp.push_back(v);
    }
    return comp;
  }

  void unblock(std::size_t u) {
    std::vector<std::size_t> work{u};
    while (!work.empty()) {
      auto v = work.back();
      work.pop_back();
      if (!blocked_[v]) continue;
      blocked_[v] = false;
      for (auto w : blocked_by_[v]) work.push_back(w);
      blocked_by_[v].clear();
    }
  }

  // Returns false when the limit is hit; `found` reports whether a circuit
  // through v was closed.
  bool circuit(std::size_t v, bool* found = nullptr) {
    bool f = false;
    path_.push_back(v);
    blocked_[v] = true;
    for (auto w : adj_.out[v]) {
      if (!in_comp_[w]) continue;
      if (w == start_) {
        cycles_.push_back(path_);
        f = true;
        if (cycles_.size() >= limit_) return false;
      } else if (!blocked_[w]) {
        bool sub = false;
        if (!circuit(w, &sub)) return false;
        f = f || sub;
      }
    }
    if (f) {
      unblock(v);
    } else {
      for (auto w : adj_.out[v]) {
        if (!in_comp_[w]) continue;
        auto& lst = blocked_by_[w];
        if (std::find(lst.begin(), lst.end(), v) == lst.end()) lst.push_back(v);
      }
    }
    path_.pop_back();
    if (found) *found = f;
    return true;
  }

  const Adjacency& adj_;
  std::size_t n_;
  std::size_t limit_;
  std::size_t start_ = 0;
  std::vector<bool> in_comp_;
  std::vector<bool> blocked_;
  std::vector<std::vector<std::size_t>> blocked_by_;
  std::vector<std::size_t> path_;
  std::vector<std::vector<std::size_t>> cycles_;
};

std::vector<UnitName> names_of(const ServiceGraph& g,
                               const std::vector<std::size_t>& idx) {
  std::vector<UnitName> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(g.node(i).name);
  return out;
}

}  // namespace

std::string_view to_string(EdgeKind kind) {
  switch (kind) {
    case EdgeKind::Strong: return "strong";
    case EdgeKind::Weak: return "weak";
    case EdgeKind::Order: return "order";
    case EdgeKind::Member: return "member";
  }
  return "?";
}

ServiceGraph::ServiceGraph(std::vector<GraphNode> nodes,
                           std::vector<NamedEdge> edges)
    : nodes_(std::move(nodes)) {
  std::sort(nodes_.begin(), nodes_.end(),
            [](const GraphNode& a, const GraphNode& b) { return a.name < b.name; });
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    if (nodes_[i].name == nodes_[i - 1].name) {
      throw std::invalid_argument("duplicate node " + nodes_[i].name.str());
    }
  }
  for (const auto& e : edges) {
    auto from = index_of(e.from);
    auto to = index_of(e.to);
    if (!from || !to) {
      throw std::invalid_argument("edge references unknown node");
    }
    if (*from == *to) continue;
    edges_.push_back({*from, *to, e.kind});
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());

  const auto n = nodes_.size();
  auto index = [&](std::vector<std::size_t>& start,
                   std::vector<std::size_t>& list, bool outgoing) {
    start.assign(n + 1, 0);
    for (const auto& e : edges_) ++start[(outgoing ? e.from : e.to) + 1];
    for (std::size_t i = 0; i < n; ++i) start[i + 1] += start[i];
    list.assign(edges_.size(), 0);
    auto fill = start;
    for (std::size_t k = 0; k < edges_.size(); ++k) {
      const auto v = outgoing ? edges_[k].from : edges_[k].to;
      list[fill[v]++] = k;
    }
  };
  index(out_start_, out_list_, true);
  index(in_start_, in_list_, false);
}

std::optional<std::size_t> ServiceGraph::index_of(const UnitName& name) const {
  auto it = std::lower_bound(
      nodes_.begin(), nodes_.end(), name,
      [](const GraphNode& n, const UnitName& key) { return n.name < key; });
  if (it == nodes_.end() || !(it->name == name)) return std::nullopt;
  return static_cast<std::size_t>(it - nodes_.begin());
}

std::span<const std::size_t> ServiceGraph::out_edges(std::size_t node) const {
  return {out_list_.data() + out_start_[node],
          out_start_[node + 1] - out_start_[node]};
}

std::span<const std::size_t> ServiceGraph::in_edges(std::size_t node) const {
  return {in_list_.data() + in_start_[node],
          in_start_[node + 1] - in_start_[node]};
}

ServiceGraph build_graph(const UnitSet& set) {
  std::vector<GraphNode> nodes;
  std::vector<NamedEdge> edges;
  std::vector<Diagnostic> diags;

  for (const auto& [name, u] : set.units) {
    GraphNode node(name);
    node.type = u.effective_type();
    node.duration = u.exec_duration;
    node.fork_point = u.fork_point.value_or(Duration{0});
    node.deferred = u.deferred;
    node.priority = u.priority;
    nodes.push_back(std::move(node));

    for (const auto& d : u.deps) {
      switch (d.kind) {
        case DependencyKind::Strong: edges.push_back({d.target, name, EdgeKind::Strong}); break;
        case DependencyKind::Weak: edges.push_back({d.target, name, EdgeKind::Weak}); break;
        case DependencyKind::OrderBefore: edges.push_back({name, d.target, EdgeKind::Order}); break;
        case DependencyKind::OrderAfter: edges.push_back({d.target, name, EdgeKind::Order}); break;
        case DependencyKind::WantedBy: edges.push_back({name, d.target, EdgeKind::Member}); break;
      }
    }
  }

  std::set<UnitName> phantoms;
  for (const auto& e : edges) {
    for (const auto* n : {&e.from, &e.to}) {
      if (!set.contains(*n)) phantoms.insert(*n);
    }
  }
  for (const auto& p : phantoms) {
    GraphNode node(p);
    node.phantom = true;
    nodes.push_back(std::move(node));
    diags.push_back({Severity::Warning, p.str(),
                     "phantom node for dangling dependency target"});
  }

  ServiceGraph g(std::move(nodes), std::move(edges));
  g.diagnostics() = std::move(diags);
  return g;
}

GraphError::GraphError(GraphErrorKind kind, const std::string& detail,
                       std::vector<UnitName> cycle)
    : std::runtime_error(detail), kind_(kind), cycle_(std::move(cycle)) {}

bool CycleReport::has_errors() const {
  return std::any_of(cycles.begin(), cycles.end(), [](const Cycle& c) {
    return c.severity == Severity::Error;
  });
}

CycleReport detect_cycles(const ServiceGraph& g, CycleOptions opts) {
  CycleReport report;
  if (opts.cap == 0) return report;

  Adjacency hard(g, non_weak);
  CircuitFinder first(hard, opts.cap);
  report.truncated = !first.run();
  auto errors = std::move(first.cycles());
  std::sort(errors.begin(), errors.end());
  for (const auto& c : errors) {
    report.cycles.push_back({names_of(g, c), Severity::Error});
  }
  if (report.truncated) return report;

  const bool has_weak = std::any_of(g.edges().begin(), g.edges().end(),
                                    [](const Edge& e) { return e.kind == EdgeKind::Weak; });
  if (!has_weak) return report;

  // Every hard cycle reappears here; ask for enough to see cap new ones.
  Adjacency all(g, any_kind);
  CircuitFinder second(all, opts.cap + errors.size());
  const bool complete = second.run();
  auto cycles = std::move(second.cycles());
  std::sort(cycles.begin(), cycles.end());
  for (const auto& c : cycles) {
    if (std::binary_search(errors.begin(), errors.end(), c)) continue;
    if (report.cycles.size() >= opts.cap) {
      report.truncated = true;
      break;
    }
    report.cycles.push_back({names_of(g, c), Severity::Warning});
  }
  if (!complete && report.cycles.size() >= opts.cap) report.truncated = true;
  return report;
}

std::vector<Diagnostic> detect_contradictions(const ServiceGraph& g) {
  std::vector<Diagnostic> out;
  std::set<std::pair<std::size_t, std::size_t>> order;
  for (const auto& e : g.edges()) {
    if (e.kind == EdgeKind::Order) order.insert({e.from, e.to});
  }
  for (const auto& [a, b] : order) {
    if (a < b && order.count({b, a})) {
      const auto& na = g.node(a).name.str();
      const auto& nb = g.node(b).name.str();
      out.push_back({Severity::Error, na,
                     "contradicting order: " + na + " before " + nb + " and " +
                         nb + " before " + na});
    }
  }
  for (const auto& e : g.edges()) {
    if (e.kind != EdgeKind::Strong) continue;
    const auto& dep = g.node(e.from);
    const auto& user = g.node(e.to);
    if (dep.deferred && !user.deferred) {
      out.push_back({Severity::Error, user.name.str(),
                     user.name.str() + " requires " + dep.name.str() +
                         ", which is marked deferred"});
    }
  }
  return out;
}

BBGroup isolate_bb_group(const ServiceGraph& g,
                         const std::set<UnitName>& completion,
                         IsolateOptions opts) {
  BBGroup group;
  group.completion_targets = completion;

  std::vector<char> member(g.size(), 0);
  std::vector<std::size_t> work;
  for (const auto& name : completion) {
    auto i = g.index_of(name);
    if (!i) {
      throw GraphError(GraphErrorKind::UnknownNode,
                       "unknown completion target " + name.str());
    }
    member[*i] = 1;
    work.push_back(*i);
  }
  while (!work.empty()) {
    auto v = work.back();
    work.pop_back();
    for (auto k : g.in_edges(v)) {
      const auto& e = g.edges()[k];
      const bool recruits = e.kind == EdgeKind::Strong ||
                            (opts.follow_weak && e.kind == EdgeKind::Weak);
      if (recruits && !member[e.from]) {
        member[e.from] = 1;
        work.push_back(e.from);
      }
    }
  }

  std::vector<GraphNode> sub_nodes;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (member[i]) {
      group.members.insert(g.node(i).name);
      sub_nodes.push_back(g.node(i));
    }
  }
  for (const auto& e : g.edges()) {
    if (member[e.from] && member[e.to]) {
      group.induced_edges.push_back(g.named(e));
    } else if (!member[e.from] && member[e.to]) {
      group.ignored_constraints.push_back(g.named(e));
    }
  }

  ServiceGraph induced(std::move(sub_nodes), group.induced_edges);
  auto report = detect_cycles(induced, {.cap = 1});
  if (report.has_errors()) {
    const auto& cyc = report.cycles.front().nodes;
    throw GraphError(GraphErrorKind::CycleInClosure,
                     "cycle in BB group closure: " + join_names(cyc, " -> "),
                     cyc);
  }
  return group;
}

std::map<UnitName, Duration> readiness_delays(const ServiceGraph& g) {
  std::map<UnitName, Duration> out;
  for (const auto& n : g.nodes()) {
    Duration d{0};
    if (!n.phantom) {
      switch (n.type) {
        case ServiceType::Simple: d = Duration{0}; break;
        case ServiceType::Forking: d = n.fork_point; break;
        case ServiceType::Oneshot: d = n.duration; break;
      }
    }
    out.emplace_hint(out.end(), n.name, d);
  }
  return out;
}

std::vector<std::size_t> topological_order(const ServiceGraph& g) {
  std::vector<std::size_t> indeg(g.size(), 0);
  for (const auto& e : g.edges()) ++indeg[e.to];
  // Parallel edges count separately on both sides, so degrees stay exact.
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (indeg[i] == 0) ready.push(i);
  }
  std::vector<std::size_t> order;
  order.reserve(g.size());
  while (!ready.empty()) {
    auto v = ready.top();
    ready.pop();
    order.push_back(v);
    for (auto k : g.out_edges(v)) {
      if (--indeg[g.edges()[k].to] == 0) ready.push(g.edges()[k].to);
    }
  }
  if (order.size() != g.size()) {
    auto report = detect_cycles(g, {.cap = 1});
    std::vector<UnitName> cyc;
    if (!report.cycles.empty()) cyc = report.cycles.front().nodes;
    throw GraphError(GraphErrorKind::CyclicGraph,
                     "dependency cycle: " + join_names(cyc, " -> "), cyc);
  }
  return order;
}

CriticalPath critical_path(const ServiceGraph& g,
                           const std::map<UnitName, Duration>& delays) {
  const auto order = topological_order(g);
  const auto n = g.size();
  std::vector<Duration> delay(n, Duration{0});
  for (std::size_t i = 0; i < n; ++i) {
    if (auto it = delays.find(g.node(i).name); it != delays.end()) {
      delay[i] = it->second;
    }
  }

  std::vector<Duration> start(n, Duration{0});
  std::vector<std::optional<std::size_t>> via(n);
  for (auto v : order) {
    // in_edges are sorted by source index, i.e. by name, so a strict
    // comparison keeps the smallest binding predecessor on ties.
    for (auto k : g.in_edges(v)) {
      const auto& e = g.edges()[k];
      const auto cand = start[e.from] + (gates_on_ready(e.kind) ? delay[e.from] : Duration{0});
      if (!via[v] || cand > start[v]) {
        start[v] = cand;
        via[v] = e.from;
      }
    }
  }

  CriticalPath best;
  std::optional<std::size_t> end;
  for (std::size_t v = 0; v < n; ++v) {
    const auto ready = start[v] + delay[v];
    if (!end || ready > best.length) {
      best.length = ready;
      end = v;
    }
  }
  if (!end) return best;
  std::vector<UnitName> rev;
  for (std::optional<std::size_t> v = end; v; v = via[*v]) {
    rev.push_back(g.node(*v).name);
  }
  best.path.assign(rev.rbegin(), rev.rend());
  return best;
}

std::string export_edge_list(const ServiceGraph& g) {
  std::ostringstream out;
  for (const auto& e : g.edges()) {
    out << g.node(e.from).name.str() << '\t' << to_string(e.kind) << '\t'
        << g.node(e.to).name.str() << '\n';
  }
  return out.str();
}

std::string export_dot(const ServiceGraph& g) {
  std::ostringstream out;
  out << "digraph services {\n  rankdir=LR;\n  node [shape=box, fontsize=10];\n";
  for (const auto& n : g.nodes()) {
    out << "  \"" << n.name.str() << "\"";
    if (n.phantom) out << " [style=dashed]";
    out << ";\n";
  }
  for (const auto& e : g.edges()) {
    out << "  \"" << g.node(e.from).name.str() << "\" -> \""
        << g.node(e.to).name.str() << "\" [color=";
    switch (e.kind) {
      case EdgeKind::Strong: out << "red"; break;
      case EdgeKind::Weak: out << "green"; break;
      case EdgeKind::Order: out << "gray40, style=dashed"; break;
      case EdgeKind::Member: out << "blue, style=dotted"; break;
    }
    out << "];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace bboost
