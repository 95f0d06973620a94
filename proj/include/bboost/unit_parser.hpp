#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bboost/unit_model.hpp"

namespace bboost {

enum class ParseErrorReason : std::uint8_t {
  UnknownSection,
  MalformedKey,
  DuplicateSection,
  BadValue,
  MissingSection,
};

std::string_view to_string(ParseErrorReason reason);

class ParseError : public std::runtime_error {
 public:
  ParseError(std::string file, std::size_t line, ParseErrorReason reason,
             const std::string& detail);

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }
  ParseErrorReason reason() const { return reason_; }

 private:
  std::string file_;
  std::size_t line_;
  ParseErrorReason reason_;
};

struct ParsedUnit {
  UnitFile unit;
  std::vector<Diagnostic> warnings;
};

// Parses one unit file. Recognized sections are [Unit], [Service] and
// [Install]; a leading header repeating the unit's own name (as in
// "[Myapp.service]") is accepted as a title line. Unknown keys inside known
// sections are warnings. Throws ParseError.
ParsedUnit parse_unit(std::string_view text, const UnitName& name);

// Canonical text form. parse_unit(serialize_unit(u), u.name).unit == u for
// every unit the parser produces.
std::string serialize_unit(const UnitFile& unit);

struct ParsedTree {
  UnitSet set;
  std::vector<Diagnostic> diagnostics;
};

struct EmptyUnitTree : std::runtime_error {
  EmptyUnitTree() : std::runtime_error("empty unit tree") {}
};

// Parses every source. Files that fail to parse or validate are reported and
// left out of the set. Throws EmptyUnitTree when nothing parses.
ParsedTree parse_tree(const std::map<UnitName, std::string>& sources);

// SHA-256 over the (name, text) pairs in name order. Does not parse.
Digest source_digest(const std::map<UnitName, std::string>& sources);

// Number of parse_unit calls made by this process.
std::uint64_t parse_unit_calls();

}  // namespace bboost
