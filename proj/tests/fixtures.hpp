#pragma once

#include "iupf/scenario.hpp"
#include "iupf/toml_lite.hpp"

#include <filesystem>
#include <string>

namespace fixture {

inline std::filesystem::path preset(const std::string& name) {
    return std::filesystem::path(IUPF_SOURCE_DIR) / "presets" / (name + ".toml");
}

// Small three-vehicle road that runs in well under a second.
inline const char* kSmallScenario = R"(
name = "small"
seed = 3

[time]
dt_s = 0.1
duration_s = 1.0

[grid]
s_min_m = 0.0
s_max_m = 300.0
n_s = 61
n_d = 9

[fusion]
max_steps = 20
tau_step = 0.01
steady_tol = 1e-3

[planner]
horizon_steps = 8
preview_stride = 2
max_sweeps = 20
fp_max_iterations = 1
w2_tol = 0.05

[output]
snapshot_stride = 5

[[vehicles]]
id = "host"
style = "cooperative"
is_host = true
s_m = 100.0
lane = 1
speed_mps = 20.0

[[vehicles]]
id = "lead"
style = "conservative"
s_m = 140.0
lane = 1
speed_mps = 15.0

[[vehicles]]
id = "fast"
style = "aggressive"
s_m = 80.0
lane = 2
speed_mps = 25.0
)";

inline iupf::Scenario small_scenario(const std::vector<iupf::Override>& ov = {}) {
    return iupf::scenario_from_document(iupf::toml::parse(kSmallScenario), ov);
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("iupf_test_" + name);
    std::filesystem::remove_all(p);
    return p;
}

}  // namespace fixture
