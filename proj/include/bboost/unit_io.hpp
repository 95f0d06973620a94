#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "bboost/preparse_cache.hpp"
#include "bboost/unit_parser.hpp"

namespace bboost {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_text(const std::filesystem::path& p);
Bytes read_bytes(const std::filesystem::path& p);

// Writes to a sibling temporary and renames it over `p`.
void write_atomic(const std::filesystem::path& p, std::string_view data);

// Every regular file in `dir` whose name is a valid unit name. Other files
// (configs, notes) are skipped.
std::map<UnitName, std::string> read_unit_dir(const std::filesystem::path& dir);

// Writes one file per unit, replacing stale unit files in `dir`.
void write_unit_dir(const std::filesystem::path& dir,
                    const std::map<UnitName, std::string>& units);

struct LoadedUnits {
  UnitSet set;
  std::vector<Diagnostic> diagnostics;
  bool from_cache = false;
  bool cache_rebuilt = false;
  std::string notice;
};

// Reads a unit directory, decoding `cache` instead of parsing when it was
// built from the same sources. A missing, stale or corrupt cache is rebuilt
// in place.
LoadedUnits load_units(const std::filesystem::path& dir,
                       const std::optional<std::filesystem::path>& cache);

}  // namespace bboost
