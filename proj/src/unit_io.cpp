#include "bboost/unit_io.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

namespace bboost {

namespace fs = std::filesystem;

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading " + p.string());
  return ss.str();
}

Bytes read_bytes(const fs::path& p) {
  const auto text = read_text(p);
  return Bytes(text.begin(), text.end());
}

void write_atomic(const fs::path& p, std::string_view data) {
  auto tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) throw IoError("error writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, p, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename onto " + p.string());
  }
}

std::map<UnitName, std::string> read_unit_dir(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("not a directory: " + dir.string());
  std::map<UnitName, std::string> out;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (!entry.is_regular_file()) continue;
    auto name = UnitName::parse(entry.path().filename().string());
    if (!name) continue;
    out.emplace(std::move(*name), read_text(entry.path()));
  }
  if (ec) throw IoError("cannot list " + dir.string());
  return out;
}

void write_unit_dir(const fs::path& dir, const std::map<UnitName, std::string>& units) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string());
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto name = UnitName::parse(entry.path().filename().string());
    if (name && !units.count(*name)) fs::remove(entry.path());
  }
  for (const auto& [name, text] : units) write_atomic(dir / name.str(), text);
}

LoadedUnits load_units(const fs::path& dir, const std::optional<fs::path>& cache) {
  const auto sources = read_unit_dir(dir);
  LoadedUnits out;
  const auto digest = source_digest(sources);
  if (cache && fs::exists(*cache)) {
    try {
      auto set = decode_cache(read_bytes(*cache));
      if (set.source_digest == digest) {
        out.set = std::move(set);
        out.from_cache = true;
        return out;
      }
      out.notice = "cache is stale, rebuilding";
    } catch (const CacheError& e) {
      out.notice = std::string("cache unusable (") + e.what() + "), rebuilding";
    }
  } else if (cache) {
    out.notice = "no cache yet, building";
  }

  auto tree = parse_tree(sources);
  out.set = std::move(tree.set);
  out.diagnostics = std::move(tree.diagnostics);
  if (cache) {
    const auto image = encode_cache(out.set);
    write_atomic(*cache, std::string_view(reinterpret_cast<const char*>(image.data()), image.size()));
    out.cache_rebuilt = true;
  }
  return out;
}

}  // namespace bboost
