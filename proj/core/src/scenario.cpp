#include "waterlab/scenario.hpp"

#include "waterlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace waterlab {

std::string to_string(NodeRole role) {
    switch (role) {
    case NodeRole::Sensor: return "sensor";
    case NodeRole::Controller: return "controller";
    case NodeRole::Actuator: return "actuator";
    case NodeRole::Detector: return "detector";
    }
    return "unknown";
}

std::optional<NodeRole> parse_node_role(std::string_view s) {
    if (s == "sensor") return NodeRole::Sensor;
    if (s == "controller") return NodeRole::Controller;
    if (s == "actuator") return NodeRole::Actuator;
    if (s == "detector") return NodeRole::Detector;
    return std::nullopt;
}

const PipeConfig* ScenarioConfig::find_pipe(std::string_view id) const {
    auto it = std::find_if(pipes.begin(), pipes.end(), [&](const PipeConfig& p) { return p.id == id; });
    return it == pipes.end() ? nullptr : &*it;
}

const NodeSpec* ScenarioConfig::find_node(std::string_view id) const {
    auto it = std::find_if(nodes.begin(), nodes.end(), [&](const NodeSpec& n) { return n.id == id; });
    return it == nodes.end() ? nullptr : &*it;
}

FourierReference resolve_reference(const ScenarioConfig& cfg) {
    if (const auto* c = std::get_if<FourierCoefficients>(&cfg.reference)) return FourierReference(*c);
    const auto& csv = std::get<DemandCsvReference>(cfg.reference);
    std::filesystem::path path = csv.path;
    if (path.is_relative() && !cfg.base_dir.empty()) path = cfg.base_dir / path;
    const auto samples = read_demand_csv(path.string());
    return fit_reference(samples, csv.omega);
}

namespace {

template <typename F>
void collect(std::vector<std::string>& problems, const std::string& prefix, F&& check) {
    try {
        check();
    } catch (const ValidationError& e) {
        for (const auto& p : e.problems()) problems.push_back(prefix + p);
    } catch (const Error& e) {
        problems.push_back(prefix + e.what());
    }
}

} // namespace

std::vector<std::string> scenario_problems(const ScenarioConfig& cfg) {
    std::vector<std::string> problems;
    const auto& sim = cfg.sim;
    if (!(sim.horizon > 0.0) || !std::isfinite(sim.horizon)) problems.emplace_back("sim: horizon must be positive");
    if (!(sim.output_interval > 0.0)) problems.emplace_back("sim: output_interval must be positive");
    if (!(sim.max_step > 0.0)) problems.emplace_back("sim: max_step must be positive");
    if (!(sim.settle_time >= 0.0)) problems.emplace_back("sim: settle_time must be >= 0");

    collect(problems, "reference: ", [&] { resolve_reference(cfg); });
    collect(problems, "", [&] { cfg.controller.validate(); });
    collect(problems, "", [&] { cfg.channel.validate(); });

    if (cfg.pipes.empty()) problems.emplace_back("scenario defines no pipes");
    std::set<std::string> pipe_ids;
    for (const auto& p : cfg.pipes) {
        const std::string where = "pipe '" + p.id + "': ";
        if (!pipe_ids.insert(p.id).second) problems.push_back(where + "duplicate pipe id");
        collect(problems, where, [&] { p.spec.validate(); });
        if (!(p.initial_flow >= 0.0) || !std::isfinite(p.initial_flow)) {
            problems.push_back(where + "initial_flow must be finite and >= 0");
        }
        if (!(p.initial_valve >= 0.0)) problems.push_back(where + "initial_valve must be >= 0");
        if (!(std::abs(p.drive_ripple) < 1.0)) problems.push_back(where + "drive_ripple must satisfy |ripple| < 1");
        if (!(p.drive_ripple_period > 0.0)) problems.push_back(where + "drive_ripple_period must be positive");
    }

    std::map<std::string, const NodeSpec*> nodes;
    for (const auto& n : cfg.nodes) {
        if (!nodes.emplace(n.id, &n).second) problems.push_back("node '" + n.id + "': duplicate node id");
    }
    std::map<std::string, int> sensors, controllers, actuators;
    for (const auto& n : cfg.nodes) {
        const std::string where = "node '" + n.id + "': ";
        if (!cfg.find_pipe(n.pipe)) problems.push_back(where + "unknown pipe '" + n.pipe + "'");
        switch (n.role) {
        case NodeRole::Sensor:
            ++sensors[n.pipe];
            if (n.sample_period && !(*n.sample_period > 0.0)) problems.push_back(where + "sample_period must be positive");
            if (!(n.noise_rms >= 0.0)) problems.push_back(where + "noise_rms must be >= 0");
            break;
        case NodeRole::Controller: ++controllers[n.pipe]; break;
        case NodeRole::Actuator: ++actuators[n.pipe]; break;
        case NodeRole::Detector: {
            auto it = nodes.find(n.sensor);
            if (n.sensor.empty()) {
                problems.push_back(where + "detector needs a sensor");
            } else if (it == nodes.end() || it->second->role != NodeRole::Sensor) {
                problems.push_back(where + "sensor '" + n.sensor + "' is not a sensor node");
            }
            if (!n.neighbor.empty()) {
                auto nb = nodes.find(n.neighbor);
                if (nb == nodes.end()) {
                    problems.push_back(where + "unknown neighbor '" + n.neighbor + "'");
                } else if (nb->second->role != NodeRole::Sensor && nb->second->role != NodeRole::Actuator) {
                    problems.push_back(where + "neighbor '" + n.neighbor + "' must be a sensor or actuator");
                } else if (n.neighbor == n.sensor) {
                    problems.push_back(where + "neighbor must differ from the detector's own sensor");
                }
            }
            if (!n.report_to.empty() && !nodes.count(n.report_to)) {
                problems.push_back(where + "unknown report_to node '" + n.report_to + "'");
            }
            if (!(n.staleness_bound >= 0.0)) problems.push_back(where + "staleness must be >= 0");
            collect(problems, where, [&] { n.detector.validate(); });
            break;
        }
        }
    }
    for (const auto& [pipe, count] : actuators) {
        if (count > 1) problems.push_back("pipe '" + pipe + "': more than one actuator");
        if (controllers[pipe] != 1) problems.push_back("pipe '" + pipe + "': actuator needs exactly one controller");
    }
    for (const auto& [pipe, count] : controllers) {
        if (count > 1) problems.push_back("pipe '" + pipe + "': more than one controller");
        if (sensors[pipe] < 1) problems.push_back("pipe '" + pipe + "': controller has no sensor");
        if (actuators[pipe] != 1) problems.push_back("pipe '" + pipe + "': controller needs exactly one actuator");
    }

    auto in_horizon = [&](double t) { return t >= 0.0 && t <= sim.horizon; };
    auto sensor_node = [&](const std::string& id) {
        const NodeSpec* n = cfg.find_node(id);
        return n && n->role == NodeRole::Sensor;
    };
    std::set<std::string> fault_ids;
    for (const auto& f : cfg.faults) {
        const std::string where = "fault '" + f.id + "': ";
        if (!fault_ids.insert(f.id).second) problems.push_back(where + "duplicate fault id");
        std::visit(
            [&](const auto& k) {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, LeakFault>) {
                    if (!cfg.find_pipe(k.pipe)) problems.push_back(where + "unknown pipe '" + k.pipe + "'");
                    if (!(k.coefficient >= 0.0)) problems.push_back(where + "leak coefficient must be >= 0");
                    if (!in_horizon(k.start)) problems.push_back(where + "start must lie within the horizon");
                } else if constexpr (std::is_same_v<K, SensorBiasFault>) {
                    if (!sensor_node(k.node)) problems.push_back(where + "unknown sensor node '" + k.node + "'");
                    if (!std::isfinite(k.offset)) problems.push_back(where + "offset must be finite");
                    if (!in_horizon(k.start)) problems.push_back(where + "start must lie within the horizon");
                } else {
                    if (!sensor_node(k.node)) problems.push_back(where + "unknown sensor node '" + k.node + "'");
                    if (!std::isfinite(k.magnitude)) problems.push_back(where + "magnitude must be finite");
                    if (k.times.empty()) problems.push_back(where + "spike needs at least one time");
                    for (double t : k.times) {
                        if (!in_horizon(t)) problems.push_back(where + "spike time outside the horizon");
                    }
                }
            },
            f.kind);
    }
    return problems;
}

void validate_scenario(const ScenarioConfig& cfg) {
    auto problems = scenario_problems(cfg);
    if (!problems.empty()) throw ValidationError(std::move(problems));
}

} // namespace waterlab
