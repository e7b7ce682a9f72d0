#include "waterlab/channel.hpp"

#include "waterlab/errors.hpp"
#include "waterlab/random.hpp"

#include <cmath>
#include <vector>

namespace waterlab {

void ChannelSpec::validate() const {
    std::vector<std::string> problems;
    if (!(drop_probability >= 0.0 && drop_probability <= 1.0)) {
        problems.emplace_back("channel drop_probability must be in [0, 1]");
    }
    if (!(latency_min >= 0.0)) problems.emplace_back("channel latency_min must be >= 0");
    if (!(latency_max >= latency_min) || !std::isfinite(latency_max)) {
        problems.emplace_back("channel latency_max must be finite and >= latency_min");
    }
    if (!problems.empty()) throw ValidationError(std::move(problems));
}

std::uint64_t ChannelState::next_counter(const std::string& src, const std::string& dst) {
    return counters_[{src, dst}]++;
}

std::optional<double> schedule_send(const Message& msg, const ChannelSpec& channel, ChannelState& state) {
    const std::uint64_t link = rng::mix(rng::hash_name(msg.src), rng::hash_name(msg.dst));
    const std::uint64_t counter = state.next_counter(msg.src, msg.dst);
    if (rng::uniform(channel.seed, link, counter, 0) < channel.drop_probability) return std::nullopt;
    const double span = channel.latency_max - channel.latency_min;
    return msg.send_time + channel.latency_min + span * rng::uniform(channel.seed, link, counter, 1);
}

} // namespace waterlab
