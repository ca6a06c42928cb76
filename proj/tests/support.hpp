#pragma once

#include <filesystem>
#include <string>

#include "qkdioc/harness.hpp"

namespace qkdioc::fixtures {

inline std::filesystem::path scenario_path(const std::string& name) {
  return std::filesystem::path(QKDIOC_DATA_DIR) / "scenarios" / (name + ".scn");
}

inline harness::Scenario bundled(const std::string& name) { return harness::load_scenario(scenario_path(name)); }

inline const char* const kBundled[] = {"nominal",          "intercept-resend", "phase-remap", "pns",
                                       "blinding-default", "after-gate",       "time-shift",  "jamming-dos"};

}  // namespace qkdioc::fixtures
