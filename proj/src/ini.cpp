#include "bboost/ini.hpp"

namespace bboost {

std::string_view trim(std::string_view s) {
  constexpr std::string_view kSpace = " \t\r\n\f\v";
  const auto first = s.find_first_not_of(kSpace);
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(kSpace);
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_words(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const auto start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

std::vector<IniLine> lex_ini(std::string_view text) {
  std::vector<IniLine> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const auto raw = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;

    const auto line = trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;

    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw IniSyntaxError(line_no, "malformed section header");
      }
      out.push_back({IniLine::Kind::Section, line_no,
                     trim(line.substr(1, line.size() - 2)), {}});
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw IniSyntaxError(line_no, "expected key=value");
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw IniSyntaxError(line_no, "empty key");
    out.push_back({IniLine::Kind::Assignment, line_no, key,
                   trim(line.substr(eq + 1))});
  }
  return out;
}

}  // namespace bboost
