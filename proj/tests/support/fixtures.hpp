#pragma once

// Shared test fixtures: the laboratory pipe, its demand reference and the
// shipped scenario files.

#include "waterlab/hydro.hpp"
#include "waterlab/reference.hpp"
#include "waterlab/scenario.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

namespace fixtures {

inline constexpr double kDayOmega = 2.0 * std::numbers::pi / 86400.0;

inline waterlab::PipeSpec lab_pipe() {
    waterlab::PipeSpec s;
    s.length = 100.0;
    s.diameter = 0.046;
    s.upstream_head = 1.85;
    s.downstream_head = 0.0;
    s.kinematic_viscosity = 1e-6;
    return s;
}

// Laminar coefficients recomputed from first principles, independent of
// derive_coefficients.
inline waterlab::PipeCoefficients lab_coefficients_oracle() {
    const double D = 0.046, len = 100.0, g = 9.81, dH = 1.85, nu = 1e-6;
    const double A = std::numbers::pi * D * D / 4.0;
    return {g * A * dH / len, 32.0 * nu / (D * D)};
}

inline waterlab::DemandPatternOptions two_peak_day() {
    waterlab::DemandPatternOptions o;
    o.base = 0.008;
    o.morning_peak = 0.006;
    o.evening_peak = 0.007;
    return o;
}

inline waterlab::FourierReference lab_reference() {
    const auto samples = waterlab::generate_demand_pattern(two_peak_day());
    return waterlab::fit_reference(samples, kDayOmega);
}

inline std::filesystem::path scenario_path(const std::string& name) {
    return std::filesystem::path(WATERLAB_SCENARIO_DIR) / name;
}

inline waterlab::ScenarioConfig load_scenario(const std::string& name) {
    return waterlab::parse_scenario(scenario_path(name));
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("waterlab_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace fixtures
