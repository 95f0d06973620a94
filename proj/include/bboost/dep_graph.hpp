#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bboost/unit_model.hpp"

namespace bboost {

// Normalized edge kinds. Every edge points from the unit that must act first
// to the unit that waits:
//   Requires=A in B      -> A -Strong-> B   (B launches after A is ready)
//   Wants=A in B         -> A -Weak->   B   (B launches not before A)
//   Before=B in A        -> A -Order->  B
//   After=A in B         -> A -Order->  B
//   WantedBy=T in U      -> U -Member-> T   (T ready once its members are)
enum class EdgeKind : std::uint8_t { Strong, Weak, Order, Member };

std::string_view to_string(EdgeKind kind);

// Strong and Member edges gate on readiness; Weak and Order gate on start.
inline bool gates_on_ready(EdgeKind k) {
  return k == EdgeKind::Strong || k == EdgeKind::Member;
}

struct Edge {
  std::size_t from;
  std::size_t to;
  EdgeKind kind;

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct NamedEdge {
  UnitName from;
  UnitName to;
  EdgeKind kind;

  friend bool operator==(const NamedEdge&, const NamedEdge&) = default;
};

struct GraphNode {
  explicit GraphNode(UnitName n) : name(std::move(n)) {}

  UnitName name;
  bool phantom = false;  // dangling target, instantly ready
  ServiceType type = ServiceType::Oneshot;
  Duration duration{0};
  Duration fork_point{0};
  bool deferred = false;
  int priority = 0;
};

class ServiceGraph {
 public:
  ServiceGraph() = default;

  // Nodes are sorted by name; edges are deduplicated, self-loops dropped and
  // sorted by (from, to, kind).
  ServiceGraph(std::vector<GraphNode> nodes, std::vector<NamedEdge> edges);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<GraphNode>& nodes() const { return nodes_; }
  const GraphNode& node(std::size_t i) const { return nodes_[i]; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::optional<std::size_t> index_of(const UnitName& name) const;

  // Indices into edges().
  std::span<const std::size_t> out_edges(std::size_t node) const;
  std::span<const std::size_t> in_edges(std::size_t node) const;

  NamedEdge named(const Edge& e) const {
    return {nodes_[e.from].name, nodes_[e.to].name, e.kind};
  }

  // Warnings produced while building (phantom nodes).
  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }
  std::vector<Diagnostic>& diagnostics() { return diagnostics_; }

 private:
  std::vector<GraphNode> nodes_;
  std::vector<Edge> edges_;
  std::vector<std::size_t> out_start_, out_list_;
  std::vector<std::size_t> in_start_, in_list_;
  std::vector<Diagnostic> diagnostics_;
};

ServiceGraph build_graph(const UnitSet& set);

enum class GraphErrorKind : std::uint8_t {
  UnknownNode,
  CycleInClosure,
  CyclicGraph,
};

class GraphError : public std::runtime_error {
 public:
  GraphError(GraphErrorKind kind, const std::string& detail,
             std::vector<UnitName> cycle = {});
  GraphErrorKind kind() const { return kind_; }
  const std::vector<UnitName>& cycle() const { return cycle_; }

 private:
  GraphErrorKind kind_;
  std::vector<UnitName> cycle_;
};

struct Cycle {
  // Closed walk n0 -> n1 -> ... -> nk -> n0, rotated to start at the
  // lexicographically smallest node.
  std::vector<UnitName> nodes;
  Severity severity;

  friend bool operator==(const Cycle&, const Cycle&) = default;
};

struct CycleReport {
  std::vector<Cycle> cycles;
  bool truncated = false;  // cap reached

  bool has_errors() const;
};

struct CycleOptions {
  std::size_t cap = 100;
};

// Elementary cycles. Cycles made only of Strong/Order/Member edges are
// errors; cycles that need a Weak edge are warnings.
CycleReport detect_cycles(const ServiceGraph& g, CycleOptions opts = {});

// Direct ordering contradictions (A before B and B before A) and required
// units that are marked deferred.
std::vector<Diagnostic> detect_contradictions(const ServiceGraph& g);

struct BBGroup {
  std::set<UnitName> completion_targets;
  std::set<UnitName> members;
  std::vector<NamedEdge> induced_edges;
  // Constraints from non-members onto members, dropped under isolation.
  std::vector<NamedEdge> ignored_constraints;

  bool is_member(const UnitName& n) const { return members.count(n) != 0; }
  friend bool operator==(const BBGroup&, const BBGroup&) = default;
};

struct IsolateOptions {
  bool follow_weak = false;  // experimental: let Wants= recruit members
};

// Members are the completion targets plus everything they transitively
// require. Throws GraphError (UnknownNode, CycleInClosure).
BBGroup isolate_bb_group(const ServiceGraph& g,
                         const std::set<UnitName>& completion,
                         IsolateOptions opts = {});

// Delay from start to readiness for each node given its service type.
std::map<UnitName, Duration> readiness_delays(const ServiceGraph& g);

struct CriticalPath {
  std::vector<UnitName> path;
  Duration length{0};
};

// Longest chain of launch constraints with unlimited workers: a Strong or
// Member hop costs the predecessor's readiness delay, an Order or Weak hop
// costs nothing, and the last node adds its own delay. Ties go to the
// lexicographically smaller node. Throws GraphError(CyclicGraph).
CriticalPath critical_path(const ServiceGraph& g,
                           const std::map<UnitName, Duration>& delays);

// Topological order over all edges, smallest name first among ready nodes.
// Throws GraphError(CyclicGraph) with one offending cycle.
std::vector<std::size_t> topological_order(const ServiceGraph& g);

// "from<TAB>kind<TAB>to" lines in edge order.
std::string export_edge_list(const ServiceGraph& g);

// Graphviz rendering; strong edges red, weak edges green.
std::string export_dot(const ServiceGraph& g);

}  // namespace bboost
