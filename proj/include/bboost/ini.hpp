#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bboost {

// One meaningful line of an INI-style document. Views point into the source
// text, which must outlive the lines.
struct IniLine {
  enum class Kind { Section, Assignment };

  Kind kind;
  std::size_t line;        // 1-based
  std::string_view name;   // section name or key
  std::string_view value;  // trimmed; empty for sections
};

struct IniSyntaxError : std::runtime_error {
  IniSyntaxError(std::size_t l, const std::string& what)
      : std::runtime_error(what), line(l) {}
  std::size_t line;
};

// Splits a unit-file style document into section headers and key=value
// assignments. Blank lines and lines starting with '#' or ';' are skipped.
// Throws IniSyntaxError on lines that are neither.
std::vector<IniLine> lex_ini(std::string_view text);

std::string_view trim(std::string_view s);

// Splits on runs of spaces/tabs.
std::vector<std::string_view> split_words(std::string_view s);

}  // namespace bboost
