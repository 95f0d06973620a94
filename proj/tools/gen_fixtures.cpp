// Regenerates the committed fixture directories.
#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "bboost/fixtures.hpp"
#include "bboost/unit_io.hpp"

namespace fs = std::filesystem;
using namespace bboost;

namespace {

void emit(const fs::path& dir, const fixtures::Fixture& f) {
  write_unit_dir(dir, f.units);
  for (const auto& [name, text] : f.files) write_atomic(dir / name, text);
  std::cout << dir.string() << ": " << f.units.size() << " units\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gen_fixtures"};
  std::string out = "fixtures";
  std::uint64_t seed = 0;
  app.add_option("--out", out, "output root");
  app.add_option("--seed", seed, "seed for the generated TV fixture");
  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path root(out);
    emit(root / "tv7", fixtures::tv7());
    emit(root / "tv", fixtures::tv(seed));
    emit(root / "cycle", fixtures::cycle());
    emit(root / "dbus", fixtures::dbus());
  } catch (const std::exception& e) {
    std::cerr << "gen_fixtures: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
