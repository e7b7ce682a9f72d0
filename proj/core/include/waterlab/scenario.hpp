#pragma once

// Scenario description: pipes, reference, controller, network nodes, channel,
// faults and run settings. Text format (sections of key = value lines):
//
//   [sim]  [reference]  [controller]  [channel]
//   [pipe <id>]  [node <id>]  [fault <id>]
//
// Lines starting with '#' are comments.

#include "waterlab/anomaly.hpp"
#include "waterlab/channel.hpp"
#include "waterlab/controller.hpp"
#include "waterlab/hydro.hpp"
#include "waterlab/reference.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace waterlab {

struct PipeConfig {
    std::string id;
    PipeSpec spec;
    double initial_flow = 0.0;   // m^3/s
    double initial_valve = 0.0;  // u before the first command arrives
    /// Optional bounded perturbation of the head differential:
    /// K(t) = K (1 + drive_ripple sin(2 pi t / drive_ripple_period)), |drive_ripple| < 1.
    double drive_ripple = 0.0;
    double drive_ripple_period = 86400.0;

    bool operator==(const PipeConfig&) const = default;
};

struct DemandCsvReference {
    std::string path;  // relative paths resolve against the scenario file directory
    double omega = 0.0;

    bool operator==(const DemandCsvReference&) const = default;
};

using ReferenceSource = std::variant<FourierCoefficients, DemandCsvReference>;

enum class NodeRole { Sensor, Controller, Actuator, Detector };

std::string to_string(NodeRole role);
std::optional<NodeRole> parse_node_role(std::string_view text);

struct NodeSpec {
    std::string id;
    NodeRole role = NodeRole::Sensor;
    std::string pipe;

    // sensor
    std::optional<double> sample_period;  // empty: controller sample period
    double noise_rms = 0.0;

    // detector
    std::string sensor;        // sensor node the detector runs on
    std::string neighbor;      // optional node whose samples are fused
    double staleness_bound = 3.0;
    DetectorConfig detector;
    std::string report_to;     // optional node that receives anomaly_flag messages

    bool operator==(const NodeSpec&) const = default;
};

struct LeakFault {
    std::string pipe;
    double coefficient = 0.0;  // extra linear loss lambda [1/s]
    double start = 0.0;

    bool operator==(const LeakFault&) const = default;
};

struct SensorBiasFault {
    std::string node;
    double offset = 0.0;
    double start = 0.0;

    bool operator==(const SensorBiasFault&) const = default;
};

struct SensorSpikeFault {
    std::string node;
    double magnitude = 0.0;
    std::vector<double> times;

    bool operator==(const SensorSpikeFault&) const = default;
};

using FaultKind = std::variant<LeakFault, SensorBiasFault, SensorSpikeFault>;

struct FaultSpec {
    std::string id;
    FaultKind kind;

    bool operator==(const FaultSpec&) const = default;
};

struct SimSettings {
    std::string name = "scenario";
    double horizon = 86400.0;        // s
    double output_interval = 1.0;    // s
    double max_step = 0.25;          // largest RK4 substep, s
    double settle_time = 3600.0;     // transient excluded from post-settle statistics, s
    std::uint64_t seed = 0;

    bool operator==(const SimSettings&) const = default;
};

struct ScenarioConfig {
    SimSettings sim;
    ReferenceSource reference;
    ControllerConfig controller;
    ChannelSpec channel;  // seed is taken from sim.seed at run time
    std::vector<PipeConfig> pipes;
    std::vector<NodeSpec> nodes;
    std::vector<FaultSpec> faults;
    std::filesystem::path base_dir;  // not serialized

    bool operator==(const ScenarioConfig& other) const {
        return sim == other.sim && reference == other.reference && controller == other.controller &&
               channel == other.channel && pipes == other.pipes && nodes == other.nodes && faults == other.faults;
    }

    const PipeConfig* find_pipe(std::string_view id) const;
    const NodeSpec* find_node(std::string_view id) const;
};

/// Every semantic problem in the scenario, empty when valid.
std::vector<std::string> scenario_problems(const ScenarioConfig& cfg);

/// Throws ValidationError carrying all problems.
void validate_scenario(const ScenarioConfig& cfg);

/// Builds the reference, reading and fitting the demand CSV if needed.
FourierReference resolve_reference(const ScenarioConfig& cfg);

// ---- text format ----------------------------------------------------------

struct RawEntry {
    std::string key;
    std::string value;
    int line = 0;
};

struct RawSection {
    std::string type;  // sim, reference, controller, channel, pipe, node, fault
    std::string id;    // empty for singleton sections
    int line = 0;
    std::vector<RawEntry> entries;
};

struct RawDocument {
    std::vector<RawSection> sections;
};

/// Syntax pass. Throws ParseError with the offending line number.
RawDocument parse_document(std::string_view text);

/// Sets (or adds) a value by dotted path: "sim.horizon", "pipe.p1.diameter",
/// "node.s1.noise_rms". Missing sections are created.
void set_value(RawDocument& doc, std::string_view dotted_key, std::string value);

/// Semantic pass. Collects every problem and throws one ValidationError.
ScenarioConfig build_scenario(const RawDocument& doc, const std::filesystem::path& base_dir = {});

ScenarioConfig parse_scenario_text(std::string_view text, const std::filesystem::path& base_dir = {});
ScenarioConfig parse_scenario(const std::filesystem::path& path);
RawDocument read_document(const std::filesystem::path& path);

std::string serialize_scenario(const ScenarioConfig& cfg);

} // namespace waterlab
