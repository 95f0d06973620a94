#include "bboost/unit_parser.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <charconv>
#include <optional>
#include <set>

#include "bboost/ini.hpp"

namespace bboost {

namespace {

std::atomic<std::uint64_t> g_parse_calls{0};

enum class Section { None, Unit, Service, Install };

std::optional<Section> section_from(std::string_view name) {
  if (name == "Unit") return Section::Unit;
  if (name == "Service") return Section::Service;
  if (name == "Install") return Section::Install;
  return std::nullopt;
}

std::string_view section_name(Section s) {
  switch (s) {
    case Section::Unit: return "Unit";
    case Section::Service: return "Service";
    case Section::Install: return "Install";
    case Section::None: break;
  }
  return "";
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

std::optional<bool> parse_bool(std::string_view v) {
  for (auto t : {"yes", "true", "on", "1"}) {
    if (iequals(v, t)) return true;
  }
  for (auto f : {"no", "false", "off", "0"}) {
    if (iequals(v, f)) return false;
  }
  return std::nullopt;
}

std::optional<ServiceType> parse_type(std::string_view v) {
  if (iequals(v, "simple")) return ServiceType::Simple;
  if (iequals(v, "forking")) return ServiceType::Forking;
  if (iequals(v, "oneshot")) return ServiceType::Oneshot;
  return std::nullopt;
}

std::optional<DependencyKind> list_key(std::string_view key) {
  if (key == "Requires") return DependencyKind::Strong;
  if (key == "Wants") return DependencyKind::Weak;
  if (key == "Before") return DependencyKind::OrderBefore;
  if (key == "After") return DependencyKind::OrderAfter;
  if (key == "WantedBy") return DependencyKind::WantedBy;
  return std::nullopt;
}

bool is_extension_key(std::string_view key) {
  return key == "X-Sim-Duration" || key == "X-Sim-ForkPoint" ||
         key == "X-Sim-Deferred" || key == "X-Sim-Priority" ||
         key == "X-Boot-Critical-Hint";
}

// Section in which each known key belongs.
std::optional<Section> home_section(std::string_view key) {
  if (key == "Description" || key == "Before" || key == "After" ||
      key == "Requires" || key == "Wants") {
    return Section::Unit;
  }
  if (key == "Type" || key == "ExecStart") return Section::Service;
  if (key == "WantedBy") return Section::Install;
  return std::nullopt;
}

constexpr int kPriorityLimit = 1000;

class UnitParser {
 public:
  UnitParser(std::string_view text, const UnitName& name)
      : text_(text), unit_(name) {}

  ParsedUnit run() {
    std::vector<IniLine> lines;
    try {
      lines = lex_ini(text_);
    } catch (const IniSyntaxError& e) {
      fail(e.line, ParseErrorReason::MalformedKey, e.what());
    }

    Section current = Section::None;
    std::set<Section> seen;
    bool title_allowed = true;
    for (const auto& l : lines) {
      if (l.kind == IniLine::Kind::Section) {
        if (title_allowed && l.name == unit_.name.str()) {
          title_allowed = false;
          continue;
        }
        title_allowed = false;
        auto s = section_from(l.name);
        if (!s) {
          fail(l.line, ParseErrorReason::UnknownSection,
               "unknown section [" + std::string(l.name) + "]");
        }
        if (!seen.insert(*s).second) {
          fail(l.line, ParseErrorReason::DuplicateSection,
               "duplicate section [" + std::string(l.name) + "]");
        }
        current = *s;
        continue;
      }
      title_allowed = false;
      if (current == Section::None) {
        fail(l.line, ParseErrorReason::MalformedKey,
             "key '" + std::string(l.name) + "' outside any section");
      }
      assign(current, l);
    }
    if (seen.empty()) {
      fail(lines.empty() ? 1 : lines.front().line,
           ParseErrorReason::MissingSection, "no [Unit], [Service] or [Install] section");
    }

    finish();
    return {std::move(unit_), std::move(warnings_)};
  }

 private:
  [[noreturn]] void fail(std::size_t line, ParseErrorReason reason,
                         const std::string& detail) {
    throw ParseError(unit_.name.str(), line, reason, detail);
  }

  void warn(std::size_t line, const std::string& msg) {
    warnings_.push_back({Severity::Warning, unit_.name.str(),
                         "line " + std::to_string(line) + ": " + msg});
  }

  void note_scalar(const IniLine& l) {
    auto [it, fresh] = scalar_lines_.emplace(std::string(l.name), l.line);
    if (!fresh) {
      warn(l.line, "duplicate key " + std::string(l.name) +
                       " overrides line " + std::to_string(it->second));
      it->second = l.line;
    }
  }

  void assign(Section section, const IniLine& l) {
    const auto key = l.name;
    const bool extension = is_extension_key(key);
    const auto home = home_section(key);

    if (!extension && !home) {
      warn(l.line, "unknown key " + std::string(key) + " in [" +
                       std::string(section_name(section)) + "] ignored");
      return;
    }
    if (extension ? section == Section::Install : *home != section) {
      warn(l.line, std::string(key) + " is not allowed in [" +
                       std::string(section_name(section)) + "], ignored");
      return;
    }

    if (auto kind = list_key(key)) {
      assign_list(*kind, l);
      return;
    }

    note_scalar(l);
    const auto v = l.value;
    if (key == "Description") {
      unit_.description = std::string(v);
    } else if (key == "ExecStart") {
      unit_.exec_start = std::string(v);
    } else if (key == "Type") {
      auto t = parse_type(v);
      if (!t) bad_value(l);
      unit_.service_type = *t;
    } else if (key == "X-Sim-Duration") {
      auto d = parse_millis(v);
      if (!d) bad_value(l);
      unit_.exec_duration = *d;
    } else if (key == "X-Sim-ForkPoint") {
      auto d = parse_millis(v);
      if (!d) bad_value(l);
      unit_.fork_point = *d;
    } else if (key == "X-Sim-Deferred") {
      auto b = parse_bool(v);
      if (!b) bad_value(l);
      unit_.deferred = *b;
    } else if (key == "X-Boot-Critical-Hint") {
      auto b = parse_bool(v);
      if (!b) bad_value(l);
      unit_.boot_critical_hint = *b;
    } else if (key == "X-Sim-Priority") {
      int p = 0;
      auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), p);
      if (ec != std::errc{} || end != v.data() + v.size() ||
          p < -kPriorityLimit || p > kPriorityLimit) {
        bad_value(l);
      }
      unit_.priority = p;
    }
  }

  void assign_list(DependencyKind kind, const IniLine& l) {
    auto& list = lists_[static_cast<std::size_t>(kind)];
    if (l.value.empty()) {
      list.clear();  // systemd-style reset
      return;
    }
    for (auto word : split_words(l.value)) {
      auto target = UnitName::parse(word);
      if (!target) {
        fail(l.line, ParseErrorReason::BadValue,
             std::string(l.name) + ": invalid unit name '" + std::string(word) +
                 "'");
      }
      if (std::find(list.begin(), list.end(), *target) == list.end()) {
        list.push_back(std::move(*target));
      }
    }
  }

  [[noreturn]] void bad_value(const IniLine& l) {
    fail(l.line, ParseErrorReason::BadValue,
         "bad value for " + std::string(l.name) + ": '" + std::string(l.value) +
             "'");
  }

  void finish() {
    // Deps are grouped by kind so the canonical text form round-trips.
    for (std::size_t k = 0; k < lists_.size(); ++k) {
      for (auto& target : lists_[k]) {
        unit_.deps.push_back(
            {static_cast<DependencyKind>(k), std::move(target)});
      }
    }
    if (unit_.effective_type() == ServiceType::Forking && !unit_.fork_point) {
      unit_.fork_point = unit_.exec_duration;
    }
  }

  std::string_view text_;
  UnitFile unit_;
  std::vector<Diagnostic> warnings_;
  std::map<std::string, std::size_t> scalar_lines_;
  std::array<std::vector<UnitName>, 5> lists_;
};

void put_u64(EVP_MD_CTX* ctx, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  EVP_DigestUpdate(ctx, b, sizeof b);
}

}  // namespace

std::string_view to_string(ParseErrorReason reason) {
  switch (reason) {
    case ParseErrorReason::UnknownSection: return "UnknownSection";
    case ParseErrorReason::MalformedKey: return "MalformedKey";
    case ParseErrorReason::DuplicateSection: return "DuplicateSection";
    case ParseErrorReason::BadValue: return "BadValue";
    case ParseErrorReason::MissingSection: return "MissingSection";
  }
  return "?";
}

ParseError::ParseError(std::string file, std::size_t line,
                       ParseErrorReason reason, const std::string& detail)
    : std::runtime_error(file + ":" + std::to_string(line) + ": " +
                         std::string(to_string(reason)) + ": " + detail),
      file_(std::move(file)),
      line_(line),
      reason_(reason) {}

ParsedUnit parse_unit(std::string_view text, const UnitName& name) {
  g_parse_calls.fetch_add(1, std::memory_order_relaxed);
  return UnitParser(text, name).run();
}

std::uint64_t parse_unit_calls() {
  return g_parse_calls.load(std::memory_order_relaxed);
}

std::string serialize_unit(const UnitFile& unit) {
  std::string out = "[Unit]\n";
  auto line = [&](std::string_view key, std::string_view value) {
    out.append(key).append("=").append(value).append("\n");
  };
  auto list = [&](std::string_view key, DependencyKind kind) {
    std::string joined;
    for (const auto& d : unit.deps) {
      if (d.kind != kind) continue;
      if (!joined.empty()) joined += ' ';
      joined += d.target.str();
    }
    if (!joined.empty()) line(key, joined);
  };

  if (!unit.description.empty()) line("Description", unit.description);
  list("Requires", DependencyKind::Strong);
  list("Wants", DependencyKind::Weak);
  list("Before", DependencyKind::OrderBefore);
  list("After", DependencyKind::OrderAfter);
  line("X-Sim-Duration", format_millis(unit.exec_duration));
  if (unit.fork_point) line("X-Sim-ForkPoint", format_millis(*unit.fork_point));
  if (unit.deferred) line("X-Sim-Deferred", "yes");
  if (unit.priority != 0) line("X-Sim-Priority", std::to_string(unit.priority));
  if (unit.boot_critical_hint) line("X-Boot-Critical-Hint", "yes");

  out += "\n[Service]\n";
  line("Type", to_string(unit.service_type));
  if (!unit.exec_start.empty()) line("ExecStart", unit.exec_start);

  out += "\n[Install]\n";
  list("WantedBy", DependencyKind::WantedBy);
  return out;
}

Digest source_digest(const std::map<UnitName, std::string>& sources) {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  for (const auto& [name, text] : sources) {
    put_u64(ctx, name.str().size());
    EVP_DigestUpdate(ctx, name.str().data(), name.str().size());
    put_u64(ctx, text.size());
    EVP_DigestUpdate(ctx, text.data(), text.size());
  }
  Digest out{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, out.data(), &len);
  EVP_MD_CTX_free(ctx);
  return out;
}

ParsedTree parse_tree(const std::map<UnitName, std::string>& sources) {
  ParsedTree tree;
  auto& diags = tree.diagnostics;
  for (const auto& [name, text] : sources) {
    try {
      auto parsed = parse_unit(text, name);
      auto problems = validate_unit(parsed.unit);
      diags.insert(diags.end(), parsed.warnings.begin(), parsed.warnings.end());
      if (has_errors(problems)) {
        diags.insert(diags.end(), problems.begin(), problems.end());
        continue;
      }
      tree.set.units.emplace_hint(tree.set.units.end(), name,
                                  std::move(parsed.unit));
    } catch (const ParseError& e) {
      diags.push_back({Severity::Error, name.str(), e.what()});
    }
  }
  if (tree.set.empty()) throw EmptyUnitTree();

  tree.set.refresh_dangling();
  for (const auto& [name, unit] : tree.set.units) {
    for (const auto& dep : unit.deps) {
      if (tree.set.dangling.count(dep.target)) {
        diags.push_back({Severity::Warning, name.str(),
                         "dangling dependency on " + dep.target.str()});
      }
    }
  }
  tree.set.source_digest = source_digest(sources);
  return tree;
}

}  // namespace bboost
