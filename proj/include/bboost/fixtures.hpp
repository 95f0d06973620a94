#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "bboost/unit_model.hpp"

namespace bboost::fixtures {

// Unit sources plus named auxiliary files (sim.conf and friends).
struct Fixture {
  std::map<UnitName, std::string> units;
  std::map<std::string, std::string> files;
};

// The seven booting-critical TV services plus a few outsiders.
Fixture tv7();

// ~136 services modelled on a TV boot, with kernel/init/load phases in
// sim.conf. Completion is fasttv.service.
Fixture tv(std::uint64_t seed = 0);

// A new service that closes an ordering loop between two service groups.
Fixture cycle();

// dbus.service behind var.mount, with a dozen outsiders ordered before
// var.mount.
Fixture dbus();

// n Oneshot services chained by Requires=, every one `each` long.
Fixture serial_chain(std::size_t n, Duration each);

// n services with random durations, types and acyclic dependencies.
Fixture random_corpus(std::size_t n, std::uint64_t seed);

}  // namespace bboost::fixtures
