#pragma once

// Lossy, delayed wireless channel between simulated nodes.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>

namespace waterlab {

struct ChannelSpec {
    double drop_probability = 0.0;
    double latency_min = 0.0;  // s
    double latency_max = 0.0;  // s
    std::uint64_t seed = 0;

    bool operator==(const ChannelSpec&) const = default;

    void validate() const;
};

struct FlowSample {
    double q = 0.0;
    double t = 0.0;  // sampling instant
};

struct ValveCommandPayload {
    double u = 0.0;
    double v = 0.0;
    bool saturated = false;
    double t = 0.0;  // instant the command was computed (or applied, for reports)
};

struct AnomalyFlag {
    double score = 0.0;
    double t = 0.0;
};

using Payload = std::variant<FlowSample, ValveCommandPayload, AnomalyFlag>;

struct Message {
    std::string src;
    std::string dst;
    double send_time = 0.0;
    std::optional<double> deliver_time;  // empty when dropped
    Payload payload;
};

/// Per-link message counters. Each (src, dst) link owns an independent
/// random stream, so traffic on one link never shifts draws on another.
class ChannelState {
public:
    std::uint64_t next_counter(const std::string& src, const std::string& dst);

private:
    std::map<std::pair<std::string, std::string>, std::uint64_t> counters_;
};

/// Drops the message with probability p, otherwise delivers it after a
/// Uniform(latency_min, latency_max) delay. Returns the delivery time.
std::optional<double> schedule_send(const Message& msg, const ChannelSpec& channel, ChannelState& state);

} // namespace waterlab
