#include "bboost/unit_model.hpp"

#include <algorithm>
#include <stdexcept>

namespace bboost {

namespace {

constexpr std::pair<std::string_view, UnitKind> kSuffixes[] = {
    {".service", UnitKind::Service},
    {".mount", UnitKind::Mount},
    {".socket", UnitKind::Socket},
    {".target", UnitKind::Target},
};

bool forbidden_char(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '=' ||
         c == '[' || c == ']' || c == '/' || c == '\0';
}

}  // namespace

std::string_view to_string(UnitKind kind) {
  switch (kind) {
    case UnitKind::Service: return "service";
    case UnitKind::Mount: return "mount";
    case UnitKind::Socket: return "socket";
    case UnitKind::Target: return "target";
  }
  return "?";
}

std::optional<UnitKind> UnitName::classify(std::string_view text) {
  if (std::any_of(text.begin(), text.end(), forbidden_char)) {
    return std::nullopt;
  }
  for (const auto& [suffix, kind] : kSuffixes) {
    if (text.size() > suffix.size() &&
        text.substr(text.size() - suffix.size()) == suffix) {
      return kind;
    }
  }
  return std::nullopt;
}

std::optional<UnitName> UnitName::parse(std::string_view text) {
  const auto kind = classify(text);
  if (!kind) return std::nullopt;
  return UnitName(std::string(text), *kind);
}

UnitName::UnitName(std::string_view text) {
  auto parsed = parse(text);
  if (!parsed) {
    throw std::invalid_argument("invalid unit name '" + std::string(text) +
                                "'");
  }
  *this = std::move(*parsed);
}

std::string_view to_string(ServiceType type) {
  switch (type) {
    case ServiceType::Simple: return "simple";
    case ServiceType::Forking: return "forking";
    case ServiceType::Oneshot: return "oneshot";
  }
  return "?";
}

std::string_view to_string(DependencyKind kind) {
  switch (kind) {
    case DependencyKind::Strong: return "strong";
    case DependencyKind::Weak: return "weak";
    case DependencyKind::OrderBefore: return "before";
    case DependencyKind::OrderAfter: return "after";
    case DependencyKind::WantedBy: return "wanted-by";
  }
  return "?";
}

std::string_view to_string(Severity severity) {
  return severity == Severity::Error ? "error" : "warning";
}

bool has_errors(const std::vector<Diagnostic>& diags) {
  return std::any_of(diags.begin(), diags.end(), [](const Diagnostic& d) {
    return d.severity == Severity::Error;
  });
}

std::vector<Diagnostic> validate_unit(const UnitFile& unit) {
  std::vector<Diagnostic> out;
  auto error = [&](std::string msg) {
    out.push_back({Severity::Error, unit.name.str(), std::move(msg)});
  };

  if (unit.exec_duration < Duration::zero()) {
    error("negative exec duration");
  }
  const bool forking = unit.effective_type() == ServiceType::Forking;
  if (forking && !unit.fork_point) {
    error("forking unit without a fork point");
  } else if (!forking && unit.fork_point) {
    error("fork point set on a non-forking unit");
  } else if (unit.fork_point && (*unit.fork_point < Duration::zero() ||
                                 *unit.fork_point > unit.exec_duration)) {
    error("fork point outside [0, exec duration]");
  }
  if (std::any_of(unit.deps.begin(), unit.deps.end(),
                  [&](const Dependency& d) { return d.target == unit.name; })) {
    error("self-dependency");
  }
  return out;
}

std::string to_hex(const Digest& digest) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(digest.size() * 2);
  for (auto b : digest) {
    out += kHex[b >> 4];
    out += kHex[b & 0xf];
  }
  return out;
}

const UnitFile* UnitSet::find(const UnitName& name) const {
  auto it = units.find(name);
  return it == units.end() ? nullptr : &it->second;
}

void UnitSet::refresh_dangling() {
  dangling.clear();
  for (const auto& [name, unit] : units) {
    for (const auto& dep : unit.deps) {
      if (!contains(dep.target)) dangling.insert(dep.target);
    }
  }
}

}  // namespace bboost
