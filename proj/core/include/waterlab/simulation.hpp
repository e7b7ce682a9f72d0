#pragma once

// Event-driven co-simulation of the pipes and the wireless sensor/actuator
// network that controls them.

#include "waterlab/channel.hpp"
#include "waterlab/controller.hpp"
#include "waterlab/scenario.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace waterlab {

struct LogRow {
    double t = 0.0;
    std::string pipe_id;
    double q = 0.0;  // true flow
    double R = 0.0;
    double e = 0.0;  // q - R
    double u = 0.0;  // valve setting in force
    double v = 0.0;  // feedback term of the command in force
    bool saturated = false;
    std::uint64_t dropped_cumulative = 0;  // messages from this pipe's nodes lost so far
};

struct AnomalyRow {
    double t = 0.0;
    std::string node_id;
    double score = 0.0;
};

struct PipeStats {
    std::string id;
    double u_bar = 0.0;
    double reference_mean = 0.0;
    double rms_error = 0.0;                 // rows with t >= settle_time
    double max_abs_error_after_settle = 0.0;
    double tail_rms_relative = 0.0;         // last 20% of the horizon, relative to the reference mean
    double saturation_fraction = 0.0;       // share of output rows with a saturated command
    double epsilon_band = 0.0;              // fitted law's band in polynomial mode, configured band otherwise
    std::uint64_t band_exceedances = 0;     // rows after settling with |e| above the band
    std::uint64_t commands_applied = 0;
    std::uint64_t dropped = 0;
    std::uint64_t clamps = 0;               // RK4 substeps clamped at zero flow
    std::optional<PolynomialLaw> law;
};

struct DetectorStats {
    std::string id;
    std::uint64_t flags = 0;
    std::uint64_t fallbacks = 0;  // decisions made without a fresh neighbor sample
    std::uint64_t fused = 0;
};

struct TimeSeriesLog {
    std::vector<LogRow> rows;
    std::vector<AnomalyRow> anomalies;
    std::vector<PipeStats> pipes;
    std::vector<DetectorStats> detectors;
    std::vector<Message> messages;  // only filled when RunOptions::record_messages is set
    std::uint64_t messages_sent = 0;
    std::uint64_t messages_dropped = 0;
    double horizon = 0.0;
    double settle_time = 0.0;
};

struct RunOptions {
    bool record_messages = false;
};

/// Validates the scenario and runs it to the horizon. Throws ValidationError
/// for inconsistent scenarios and IntegrationError on divergence.
TimeSeriesLog run_closed_loop(const ScenarioConfig& scenario, const RunOptions& options = {});

/// Copy of the scenario with the fault added. Throws ValidationError when the
/// fault is dangling or outside the horizon.
ScenarioConfig inject_fault(ScenarioConfig scenario, FaultSpec fault);

void write_timeseries_csv(std::ostream& out, const TimeSeriesLog& log);
void write_anomalies_csv(std::ostream& out, const TimeSeriesLog& log);
/// key = value lines, one block per pipe and detector plus totals.
std::string format_summary(const TimeSeriesLog& log, const std::string& scenario_name);

} // namespace waterlab
