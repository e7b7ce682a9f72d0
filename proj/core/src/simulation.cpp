#include "waterlab/simulation.hpp"

#include "waterlab/anomaly.hpp"
#include "waterlab/errors.hpp"
#include "waterlab/hydro.hpp"
#include "waterlab/random.hpp"
#include "waterlab/text.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <queue>
#include <sstream>
#include <tuple>

namespace waterlab {

namespace {

constexpr double kNever = -std::numeric_limits<double>::infinity();
constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

struct Event {
    double t;
    // Tie-break class at equal times: faults switch on first (0), then node
    // events (1), then the output row sees their effect (2).
    int cls;
    std::size_t order;
    std::uint64_t seq;
    bool deliver;
    std::size_t index;  // pipe for leaks, node for samples, message for deliveries, k for outputs
    std::uint64_t k = 0;
};

struct LaterFirst {
    bool operator()(const Event& a, const Event& b) const {
        return std::tie(a.t, a.cls, a.order, a.seq) > std::tie(b.t, b.cls, b.order, b.seq);
    }
};

struct PipeRuntime {
    PipeRuntime(const PipeConfig* c, PipeCoefficients b, FourierReference r) : cfg(c), base(b), ref(std::move(r)) {}

    const PipeConfig* cfg = nullptr;
    PipeCoefficients base;
    FourierReference ref;
    double q = 0.0;
    double u = 0.0;
    double v = 0.0;
    bool saturated = false;
    double leak = 0.0;
    std::optional<FlowController> controller;
    PipeStats stats;
};

struct NodeRuntime {
    const NodeSpec* spec = nullptr;
    std::size_t pipe = 0;

    // sensor
    double period = 0.0;
    std::uint64_t noise_stream = 0;
    std::vector<std::size_t> sample_targets;
    std::vector<std::size_t> local_detectors;
    std::vector<const SensorBiasFault*> biases;
    std::map<std::uint64_t, double> spikes;  // sample index -> added magnitude

    // controller
    double last_sample_t = kNever;
    std::size_t actuator = kNone;

    // actuator
    double last_command_t = kNever;
    std::vector<std::size_t> report_targets;

    // detector
    std::optional<RlsDetector> solo;
    std::optional<FusedDetector> fused;
    std::deque<double> window;
    std::optional<NeighborSample> neighbor;
    std::size_t report_to = kNone;
    DetectorStats stats;
};

class Simulator {
public:
    Simulator(const ScenarioConfig& scenario, const RunOptions& options)
        : sc_(scenario), options_(options) {
        channel_ = sc_.channel;
        channel_.seed = sc_.sim.seed;
        const FourierReference ref = resolve_reference(sc_);
        build_pipes(ref);
        build_nodes();
    }

    TimeSeriesLog run() {
        const double horizon = sc_.sim.horizon;
        for (std::size_t i = 0; i < pipes_.size(); ++i) {
            for (const auto& f : sc_.faults) {
                const auto* leak = std::get_if<LeakFault>(&f.kind);
                // A zero leak schedules nothing, so the run stays bitwise identical.
                if (leak && leak->pipe == pipes_[i].cfg->id && leak->coefficient > 0.0) {
                    push(Event{leak->start, 0, i, seq_++, false, i});
                }
            }
        }
        for (std::size_t n = 0; n < nodes_.size(); ++n) {
            if (nodes_[n].spec->role == NodeRole::Sensor) schedule_sample(n, 0);
        }
        output_count_ = static_cast<std::uint64_t>(std::floor(horizon / sc_.sim.output_interval * (1.0 + 1e-12)));
        schedule_output(0);

        while (!queue_.empty()) {
            const Event ev = queue_.top();
            queue_.pop();
            advance(ev.t);
            if (ev.cls == 0) {
                start_leak(ev.index);
            } else if (ev.cls == 2) {
                emit_rows(ev.t);
                schedule_output(ev.k + 1);
            } else if (ev.deliver) {
                deliver(ev.index, ev.order, ev.t);
            } else {
                sample(ev.index, ev.k, ev.t);
            }
        }
        return finish();
    }

private:
    void build_pipes(const FourierReference& ref) {
        for (const auto& p : sc_.pipes) {
            PipeRuntime rt(&p, derive_coefficients(p.spec), ref);
            rt.q = p.initial_flow;
            rt.u = p.initial_valve;
            rt.stats.id = p.id;
            rt.stats.reference_mean = ref.mean();
            const bool controlled = std::any_of(sc_.nodes.begin(), sc_.nodes.end(), [&](const NodeSpec& n) {
                return n.role == NodeRole::Controller && n.pipe == p.id;
            });
            if (controlled) {
                const ControllerConfig cfg = resolve_controller(sc_.controller, rt.base, ref);
                std::optional<PolynomialLaw> law;
                if (cfg.mode == ControlMode::Polynomial) law = fit_polynomial_controller(rt.base, ref, cfg);
                rt.stats.u_bar = *cfg.u_bar;
                rt.stats.epsilon_band = law ? law->epsilon_band : cfg.epsilon_band;
                rt.stats.law = law;
                rt.controller.emplace(rt.base, ref, cfg, law);
            }
            pipes_.push_back(std::move(rt));
        }
    }

    std::size_t pipe_index(const std::string& id) const {
        for (std::size_t i = 0; i < pipes_.size(); ++i) {
            if (pipes_[i].cfg->id == id) return i;
        }
        return kNone;
    }

    std::size_t node_index(const std::string& id) const {
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            if (nodes_[i].spec->id == id) return i;
        }
        return kNone;
    }

    void build_nodes() {
        for (const auto& n : sc_.nodes) {
            NodeRuntime rt;
            rt.spec = &n;
            rt.pipe = pipe_index(n.pipe);
            nodes_.push_back(std::move(rt));
        }
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            NodeRuntime& rt = nodes_[i];
            const NodeSpec& n = *rt.spec;
            switch (n.role) {
            case NodeRole::Sensor:
                rt.period = n.sample_period.value_or(sc_.controller.sample_period);
                rt.noise_stream = rng::hash_name("sensor-noise/" + n.id);
                for (std::size_t j = 0; j < nodes_.size(); ++j) {
                    const NodeSpec& other = *nodes_[j].spec;
                    if (other.role == NodeRole::Controller && other.pipe == n.pipe) rt.sample_targets.push_back(j);
                    if (other.role == NodeRole::Detector && other.neighbor == n.id) rt.sample_targets.push_back(j);
                    if (other.role == NodeRole::Detector && other.sensor == n.id) rt.local_detectors.push_back(j);
                }
                for (const auto& f : sc_.faults) {
                    if (const auto* b = std::get_if<SensorBiasFault>(&f.kind); b && b->node == n.id) {
                        rt.biases.push_back(b);
                    }
                    if (const auto* s = std::get_if<SensorSpikeFault>(&f.kind); s && s->node == n.id) {
                        for (double t : s->times) {
                            rt.spikes[static_cast<std::uint64_t>(std::llround(t / rt.period))] += s->magnitude;
                        }
                    }
                }
                break;
            case NodeRole::Controller:
                for (std::size_t j = 0; j < nodes_.size(); ++j) {
                    if (nodes_[j].spec->role == NodeRole::Actuator && nodes_[j].spec->pipe == n.pipe) rt.actuator = j;
                }
                break;
            case NodeRole::Actuator:
                for (std::size_t j = 0; j < nodes_.size(); ++j) {
                    const NodeSpec& other = *nodes_[j].spec;
                    if (other.role == NodeRole::Detector && other.neighbor == n.id) rt.report_targets.push_back(j);
                }
                break;
            case NodeRole::Detector:
                if (n.neighbor.empty()) {
                    rt.solo.emplace(n.detector);
                } else {
                    rt.fused.emplace(n.detector, n.staleness_bound);
                }
                if (!n.report_to.empty()) rt.report_to = node_index(n.report_to);
                rt.stats.id = n.id;
                break;
            }
        }
    }

    void push(Event ev) { queue_.push(ev); }

    void schedule_sample(std::size_t node, std::uint64_t k) {
        const double t = static_cast<double>(k) * nodes_[node].period;
        if (t > sc_.sim.horizon) return;
        Event ev{t, 1, node, seq_++, false, node};
        ev.k = k;
        push(ev);
    }

    void schedule_output(std::uint64_t k) {
        if (k > output_count_) return;
        Event ev{static_cast<double>(k) * sc_.sim.output_interval, 2, 0, seq_++, false, 0};
        ev.k = k;
        push(ev);
    }

    void send(std::size_t src, std::size_t dst, double now, Payload payload) {
        Message msg{nodes_[src].spec->id, nodes_[dst].spec->id, now, std::nullopt, payload};
        msg.deliver_time = schedule_send(msg, channel_, channel_state_);
        ++sent_;
        if (!msg.deliver_time) {
            ++dropped_;
            if (nodes_[src].pipe != kNone) ++pipes_[nodes_[src].pipe].stats.dropped;
        }
        const std::size_t index = messages_.size();
        if (msg.deliver_time && *msg.deliver_time <= sc_.sim.horizon) {
            push(Event{*msg.deliver_time, 1, dst, seq_++, true, index});
        }
        messages_.push_back(std::move(msg));
    }

    void advance(double t1) {
        if (t1 <= now_) return;
        for (auto& p : pipes_) integrate(p, now_, t1);
        now_ = t1;
    }

    void integrate(PipeRuntime& p, double t0, double t1) {
        const double span = t1 - t0;
        const double damping = p.base.damping + p.leak;
        const double drive_max = p.base.drive * (1.0 + std::abs(p.cfg->drive_ripple));
        const double q_bound = std::max(p.q, drive_max / damping);
        const double h = std::min(sc_.sim.max_step, 0.5 / (damping + 2.0 * q_bound * p.u));
        const auto steps = static_cast<std::uint64_t>(std::ceil(span / h));
        const double dt = span / static_cast<double>(steps);
        PipeCoefficients c{p.base.drive, damping};
        for (std::uint64_t i = 0; i < steps; ++i) {
            const double t = t0 + static_cast<double>(i) * dt;
            if (p.cfg->drive_ripple != 0.0) {
                c.drive = p.base.drive *
                          (1.0 + p.cfg->drive_ripple * std::sin(2.0 * std::numbers::pi * t / p.cfg->drive_ripple_period));
            }
            const StepResult r = integrate_step(p.q, p.u, c, dt, t);
            p.q = r.flow;
            if (r.clamped) ++p.stats.clamps;
        }
    }

    void start_leak(std::size_t pipe) {
        double total = 0.0;
        for (const auto& f : sc_.faults) {
            const auto* leak = std::get_if<LeakFault>(&f.kind);
            if (leak && leak->pipe == pipes_[pipe].cfg->id && leak->start <= now_) total += leak->coefficient;
        }
        pipes_[pipe].leak = total;
    }

    void sample(std::size_t node, std::uint64_t k, double t) {
        NodeRuntime& s = nodes_[node];
        const NodeSpec& spec = *s.spec;
        double measured = pipes_[s.pipe].q;
        if (spec.noise_rms > 0.0) measured += spec.noise_rms * rng::normal(channel_.seed, s.noise_stream, k);
        for (const auto* b : s.biases) {
            if (t >= b->start) measured += b->offset;
        }
        if (auto it = s.spikes.find(k); it != s.spikes.end()) measured += it->second;

        for (std::size_t dst : s.sample_targets) send(node, dst, t, FlowSample{measured, t});
        for (std::size_t det : s.local_detectors) run_detector(det, measured, t);
        schedule_sample(node, k + 1);
    }

    void run_detector(std::size_t node, double measured, double t) {
        NodeRuntime& d = nodes_[node];
        const std::size_t w = d.spec->detector.window;
        if (d.window.size() == w) {
            const std::vector<double> regressor(d.window.begin(), d.window.end());
            Verdict verdict;
            if (d.fused) {
                verdict = d.fused->observe(regressor, measured, d.neighbor, t);
                d.stats.fallbacks = d.fused->fallbacks();
                d.stats.fused = d.fused->fused_decisions();
            } else {
                verdict = d.solo->observe(regressor, measured);
            }
            if (verdict.anomalous) {
                ++d.stats.flags;
                anomalies_.push_back(AnomalyRow{t, d.spec->id, verdict.score});
                if (d.report_to != kNone) send(node, d.report_to, t, AnomalyFlag{verdict.score, t});
            }
        }
        d.window.push_back(measured);
        if (d.window.size() > w) d.window.pop_front();
    }

    void deliver(std::size_t index, std::size_t dst, double t) {
        const Message& msg = messages_[index];
        NodeRuntime& node = nodes_[dst];
        const NodeRole role = node.spec->role;
        if (const auto* s = std::get_if<FlowSample>(&msg.payload)) {
            if (role == NodeRole::Controller) {
                on_controller_sample(dst, *s, t);
            } else if (role == NodeRole::Detector) {
                store_neighbor(node, NeighborSample{s->q, s->t});
            }
        } else if (const auto* c = std::get_if<ValveCommandPayload>(&msg.payload)) {
            if (role == NodeRole::Actuator) {
                on_actuator_command(dst, *c, t);
            } else if (role == NodeRole::Detector) {
                store_neighbor(node, NeighborSample{c->u, c->t});
            }
        }
        // Anomaly flags only need to arrive; the harness aggregates them.
    }

    static void store_neighbor(NodeRuntime& node, const NeighborSample& s) {
        if (!node.neighbor || s.time >= node.neighbor->time) node.neighbor = s;
    }

    void on_controller_sample(std::size_t node, const FlowSample& s, double now) {
        NodeRuntime& c = nodes_[node];
        if (s.t < c.last_sample_t) return;  // overtaken by a newer sample
        c.last_sample_t = s.t;
        const auto decision = pipes_[c.pipe].controller->decide(now, s.q);
        send(node, c.actuator, now,
             ValveCommandPayload{decision.command.u, decision.v, decision.command.saturated, now});
    }

    void on_actuator_command(std::size_t node, const ValveCommandPayload& cmd, double now) {
        NodeRuntime& a = nodes_[node];
        if (cmd.t < a.last_command_t) return;
        a.last_command_t = cmd.t;
        PipeRuntime& p = pipes_[a.pipe];
        p.u = cmd.u;
        p.v = cmd.v;
        p.saturated = cmd.saturated;
        ++p.stats.commands_applied;
        for (std::size_t dst : a.report_targets) send(node, dst, now, ValveCommandPayload{cmd.u, cmd.v, cmd.saturated, now});
    }

    void emit_rows(double t) {
        for (const auto& p : pipes_) {
            const double R = p.ref.value(t);
            rows_.push_back(LogRow{t, p.cfg->id, p.q, R, p.q - R, p.u, p.v, p.saturated, p.stats.dropped});
        }
    }

    TimeSeriesLog finish() {
        TimeSeriesLog log;
        log.horizon = sc_.sim.horizon;
        log.settle_time = sc_.sim.settle_time;
        const double tail_start = 0.8 * sc_.sim.horizon;
        for (auto& p : pipes_) {
            double sum2 = 0.0, tail2 = 0.0, max_abs = 0.0;
            std::uint64_t n = 0, tail_n = 0, total = 0, saturated = 0, exceed = 0;
            for (const auto& r : rows_) {
                if (r.pipe_id != p.cfg->id) continue;
                ++total;
                if (r.saturated) ++saturated;
                if (r.t >= sc_.sim.settle_time) {
                    sum2 += r.e * r.e;
                    ++n;
                    max_abs = std::max(max_abs, std::abs(r.e));
                    if (p.controller && std::abs(r.e) > p.stats.epsilon_band) ++exceed;
                }
                if (r.t >= tail_start) {
                    tail2 += r.e * r.e;
                    ++tail_n;
                }
            }
            p.stats.rms_error = n ? std::sqrt(sum2 / static_cast<double>(n)) : 0.0;
            p.stats.max_abs_error_after_settle = max_abs;
            p.stats.tail_rms_relative =
                tail_n ? std::sqrt(tail2 / static_cast<double>(tail_n)) / p.stats.reference_mean : 0.0;
            p.stats.saturation_fraction = total ? static_cast<double>(saturated) / static_cast<double>(total) : 0.0;
            p.stats.band_exceedances = exceed;
            log.pipes.push_back(p.stats);
        }
        for (const auto& n : nodes_) {
            if (n.spec->role == NodeRole::Detector) log.detectors.push_back(n.stats);
        }
        log.rows = std::move(rows_);
        log.anomalies = std::move(anomalies_);
        log.messages_sent = sent_;
        log.messages_dropped = dropped_;
        if (options_.record_messages) log.messages = std::move(messages_);
        return log;
    }

    const ScenarioConfig& sc_;
    RunOptions options_;
    ChannelSpec channel_;
    ChannelState channel_state_;
    std::vector<PipeRuntime> pipes_;
    std::vector<NodeRuntime> nodes_;
    std::priority_queue<Event, std::vector<Event>, LaterFirst> queue_;
    std::vector<Message> messages_;
    std::vector<LogRow> rows_;
    std::vector<AnomalyRow> anomalies_;
    std::uint64_t seq_ = 0;
    std::uint64_t output_count_ = 0;
    std::uint64_t sent_ = 0;
    std::uint64_t dropped_ = 0;
    double now_ = 0.0;
};

} // namespace

TimeSeriesLog run_closed_loop(const ScenarioConfig& scenario, const RunOptions& options) {
    validate_scenario(scenario);
    return Simulator(scenario, options).run();
}

ScenarioConfig inject_fault(ScenarioConfig scenario, FaultSpec fault) {
    scenario.faults.push_back(std::move(fault));
    validate_scenario(scenario);
    return scenario;
}

void write_timeseries_csv(std::ostream& out, const TimeSeriesLog& log) {
    using text::scientific;
    out << "t,pipe_id,q,R,e,u,v,saturated,dropped_cumulative\n";
    for (const auto& r : log.rows) {
        out << scientific(r.t) << ',' << r.pipe_id << ',' << scientific(r.q) << ',' << scientific(r.R) << ','
            << scientific(r.e) << ',' << scientific(r.u) << ',' << scientific(r.v) << ',' << (r.saturated ? 1 : 0)
            << ',' << r.dropped_cumulative << '\n';
    }
}

void write_anomalies_csv(std::ostream& out, const TimeSeriesLog& log) {
    using text::scientific;
    out << "t,node_id,score\n";
    for (const auto& a : log.anomalies) out << scientific(a.t) << ',' << a.node_id << ',' << scientific(a.score) << '\n';
}

std::string format_summary(const TimeSeriesLog& log, const std::string& scenario_name) {
    using text::shortest;
    std::ostringstream out;
    std::uint64_t flags = 0;
    for (const auto& d : log.detectors) flags += d.flags;
    out << "scenario = " << scenario_name << '\n'
        << "horizon = " << shortest(log.horizon) << '\n'
        << "settle_time = " << shortest(log.settle_time) << '\n'
        << "messages_sent = " << log.messages_sent << '\n'
        << "messages_dropped = " << log.messages_dropped << '\n'
        << "flags = " << flags << '\n';
    for (const auto& p : log.pipes) {
        const std::string k = "pipe." + p.id + ".";
        out << k << "u_bar = " << shortest(p.u_bar) << '\n'
            << k << "reference_mean = " << shortest(p.reference_mean) << '\n'
            << k << "rms_error = " << shortest(p.rms_error) << '\n'
            << k << "max_abs_error_after_settle = " << shortest(p.max_abs_error_after_settle) << '\n'
            << k << "tail_rms_relative = " << shortest(p.tail_rms_relative) << '\n'
            << k << "converged = " << (p.tail_rms_relative < 0.01 ? "yes" : "no") << '\n'
            << k << "saturation_fraction = " << shortest(p.saturation_fraction) << '\n'
            << k << "epsilon_band = " << shortest(p.epsilon_band) << '\n'
            << k << "band_exceedances = " << p.band_exceedances << '\n'
            << k << "commands_applied = " << p.commands_applied << '\n'
            << k << "dropped = " << p.dropped << '\n'
            << k << "clamps = " << p.clamps << '\n';
        if (p.law) {
            out << k << "poly_degree = " << p.law->degree() << '\n'
                << k << "poly_max_grid_error = " << shortest(p.law->max_grid_error) << '\n'
                << k << "poly_rms_grid_error = " << shortest(p.law->rms_grid_error) << '\n';
        }
    }
    for (const auto& d : log.detectors) {
        const std::string k = "detector." + d.id + ".";
        out << k << "flags = " << d.flags << '\n' << k << "fallbacks = " << d.fallbacks << '\n'
            << k << "fused = " << d.fused << '\n';
    }
    return out.str();
}

} // namespace waterlab
