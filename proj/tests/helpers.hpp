#pragma once

#include <string>

#include "bboost/fixtures.hpp"
#include "bboost/unit_parser.hpp"

namespace testing_helpers {

// The Myapp example unit, title line included.
inline const std::string kMyapp =
    "[Myapp.service]\n"
    "[Unit]\n"
    "Description=Summarized explanation of Myapp.service\n"
    "Before=socket.service\n"
    "[Service]\n"
    "Type=oneshot\n"
    "ExecStart=/usr/bin/myapp-service-daemon\n"
    "[Install]\n"
    "WantedBy=multi-user.target\n";

inline bboost::UnitSet load(const bboost::fixtures::Fixture& f) {
  return bboost::parse_tree(f.units).set;
}

inline std::string conf(const bboost::fixtures::Fixture& f) {
  return f.files.at("sim.conf");
}

}  // namespace testing_helpers
