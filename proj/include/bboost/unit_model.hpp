#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bboost/sim_time.hpp"

namespace bboost {

enum class UnitKind : std::uint8_t { Service, Mount, Socket, Target };

std::string_view to_string(UnitKind kind);

// A unit name such as "dbus.service". The suffix selects the unit kind and
// must be one of service, mount, socket or target.
class UnitName {
 public:
  // Returns nullopt for empty stems, unknown suffixes or names containing
  // whitespace, '=' or brackets.
  static std::optional<UnitName> parse(std::string_view text);

  // Throws std::invalid_argument where parse() would return nullopt.
  explicit UnitName(std::string_view text);

  // The kind parse() would assign, without building a name.
  static std::optional<UnitKind> classify(std::string_view text);
  // For text already accepted by classify().
  static UnitName classified(std::string_view text, UnitKind kind) {
    return UnitName(std::string(text), kind);
  }

  const std::string& str() const { return full_; }
  UnitKind kind() const { return kind_; }

  friend bool operator==(const UnitName& a, const UnitName& b) {
    return a.full_ == b.full_;
  }
  friend std::strong_ordering operator<=>(const UnitName& a,
                                          const UnitName& b) {
    return a.full_ <=> b.full_;
  }

 private:
  UnitName(std::string full, UnitKind kind)
      : full_(std::move(full)), kind_(kind) {}

  std::string full_;
  UnitKind kind_;
};

enum class ServiceType : std::uint8_t { Simple, Forking, Oneshot };

std::string_view to_string(ServiceType type);

// Strong: launch the dependent after the target is ready (Requires=).
// Weak: launch the dependent not before the target is launched (Wants=).
// OrderBefore/OrderAfter: start ordering only (Before=/After=).
// WantedBy: attach the unit to a target group.
enum class DependencyKind : std::uint8_t {
  Strong,
  Weak,
  OrderBefore,
  OrderAfter,
  WantedBy,
};

std::string_view to_string(DependencyKind kind);

struct Dependency {
  DependencyKind kind;
  UnitName target;

  friend bool operator==(const Dependency&, const Dependency&) = default;
};

struct UnitFile {
  explicit UnitFile(UnitName n) : name(std::move(n)) {}

  UnitName name;
  std::string description;
  std::string exec_start;  // kept verbatim, never executed
  std::vector<Dependency> deps;
  ServiceType service_type = ServiceType::Simple;
  Duration exec_duration{0};
  std::optional<Duration> fork_point;  // Forking only
  bool deferred = false;
  bool boot_critical_hint = false;  // fixture annotation, never an input
  int priority = 0;                 // higher launches sooner

  // Non-service units become ready when their action completes.
  ServiceType effective_type() const {
    return name.kind() == UnitKind::Service ? service_type
                                            : ServiceType::Oneshot;
  }

  friend bool operator==(const UnitFile&, const UnitFile&) = default;
};

enum class Severity : std::uint8_t { Warning, Error };

std::string_view to_string(Severity severity);

struct Diagnostic {
  Severity severity;
  std::string unit;
  std::string message;

  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

bool has_errors(const std::vector<Diagnostic>& diags);

// Checks the UnitFile invariants. An empty result means the unit is sound.
std::vector<Diagnostic> validate_unit(const UnitFile& unit);

using Digest = std::array<std::uint8_t, 32>;

std::string to_hex(const Digest& digest);

// A parsed tree of units keyed by name. Dependency targets missing from the
// map are recorded in `dangling`.
struct UnitSet {
  std::map<UnitName, UnitFile> units;
  std::set<UnitName> dangling;
  Digest source_digest{};

  const UnitFile* find(const UnitName& name) const;
  bool contains(const UnitName& name) const { return units.count(name) != 0; }
  std::size_t size() const { return units.size(); }
  bool empty() const { return units.empty(); }

  // Recomputes `dangling` from the dependency lists.
  void refresh_dangling();

  friend bool operator==(const UnitSet&, const UnitSet&) = default;
};

}  // namespace bboost
