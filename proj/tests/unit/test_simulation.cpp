#include "fixtures.hpp"

#include "waterlab/errors.hpp"
#include "waterlab/simulation.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

using namespace waterlab;

namespace {

std::string csv_of(const TimeSeriesLog& log) {
    std::ostringstream out;
    write_timeseries_csv(out, log);
    write_anomalies_csv(out, log);
    return out.str();
}

ScenarioConfig short_fig2(double horizon = 3600.0) {
    auto cfg = fixtures::load_scenario("fig2.cfg");
    cfg.sim.horizon = horizon;
    cfg.sim.settle_time = std::min(cfg.sim.settle_time, horizon / 2.0);
    return cfg;
}

double first_flag_after(const TimeSeriesLog& log, double t0) {
    for (const auto& a : log.anomalies) {
        if (a.t >= t0) return a.t - t0;
    }
    return -1.0;
}

std::size_t flags_before(const TimeSeriesLog& log, double t0) {
    return static_cast<std::size_t>(
        std::count_if(log.anomalies.begin(), log.anomalies.end(), [&](const AnomalyRow& a) { return a.t < t0; }));
}

} // namespace

TEST(Simulation, IdealChannelTracksReference) {
    const auto log = run_closed_loop(fixtures::load_scenario("fig2.cfg"));
    ASSERT_EQ(log.pipes.size(), 1u);
    EXPECT_LT(log.pipes[0].tail_rms_relative, 0.01);
    EXPECT_EQ(log.messages_dropped, 0u);
    EXPECT_EQ(log.rows.size(), 86401u);
    EXPECT_EQ(log.rows.front().q, 8.6e-6);
}

TEST(Simulation, SameSeedGivesIdenticalLogs) {
    auto cfg = fixtures::load_scenario("fig2_lossy.cfg");
    cfg.sim.horizon = 3600.0;
    EXPECT_EQ(csv_of(run_closed_loop(cfg)), csv_of(run_closed_loop(cfg)));
    auto other = cfg;
    other.sim.seed += 1;
    EXPECT_NE(csv_of(run_closed_loop(cfg)), csv_of(run_closed_loop(other)));
}

TEST(Simulation, RowsAreTimeOrderedWithoutDuplicates) {
    auto cfg = fixtures::load_scenario("two_pipes.cfg");
    cfg.sim.horizon = 900.0;
    cfg.sim.output_interval = 2.5;
    const auto log = run_closed_loop(cfg);
    std::set<std::pair<double, std::string>> seen;
    double last = -1.0;
    for (const auto& r : log.rows) {
        EXPECT_GE(r.t, last);
        last = r.t;
        EXPECT_TRUE(seen.insert({r.t, r.pipe_id}).second);
    }
    EXPECT_EQ(log.rows.size(), 2u * 361u);
}

TEST(Simulation, MessagesRespectChannelCausality) {
    auto cfg = fixtures::load_scenario("fig2_lossy.cfg");
    cfg.sim.horizon = 1200.0;
    const auto log = run_closed_loop(cfg, RunOptions{true});
    ASSERT_EQ(log.messages.size(), log.messages_sent);
    std::uint64_t dropped = 0;
    for (const auto& m : log.messages) {
        if (!m.deliver_time) {
            ++dropped;
            continue;
        }
        EXPECT_GE(*m.deliver_time, m.send_time + cfg.channel.latency_min);
        EXPECT_LE(*m.deliver_time, m.send_time + cfg.channel.latency_max);
        // Commands are computed from samples that had already arrived.
        if (const auto* c = std::get_if<ValveCommandPayload>(&m.payload)) EXPECT_EQ(c->t, m.send_time);
        if (const auto* s = std::get_if<FlowSample>(&m.payload)) EXPECT_EQ(s->t, m.send_time);
    }
    EXPECT_EQ(dropped, log.messages_dropped);
    EXPECT_EQ(log.rows.back().dropped_cumulative, dropped);
    const double fraction = static_cast<double>(dropped) / static_cast<double>(log.messages_sent);
    EXPECT_NEAR(fraction, 0.3, 0.05);
}

TEST(Simulation, LossyChannelDegradesBoundedly) {
    // Oracle run at seed 42 over one day: the post-settle RMS error grows by
    // 4.28x over the ideal channel, the worst single excursion by 8.93x.
    const auto ideal = run_closed_loop(fixtures::load_scenario("fig2.cfg")).pipes[0];
    const auto lossy = run_closed_loop(fixtures::load_scenario("fig2_lossy.cfg")).pipes[0];
    EXPECT_GT(lossy.rms_error, ideal.rms_error);
    EXPECT_LE(lossy.rms_error, 5.0 * ideal.rms_error);
    EXPECT_NEAR(lossy.rms_error / ideal.rms_error, 4.28, 0.01);
    EXPECT_NEAR(lossy.max_abs_error_after_settle / ideal.max_abs_error_after_settle, 8.93, 0.01);
}

TEST(Simulation, NullLeakLeavesOutputBitwiseUnchanged) {
    const auto cfg = short_fig2();
    const auto faulted = inject_fault(cfg, FaultSpec{"leak0", LeakFault{"p1", 0.0, 1800.0}});
    EXPECT_EQ(csv_of(run_closed_loop(faulted)), csv_of(run_closed_loop(cfg)));
}

TEST(Simulation, OpenLoopLeakHalvesSteadyFlow) {
    auto cfg = short_fig2(3000.0);
    cfg.nodes.erase(std::remove_if(cfg.nodes.begin(), cfg.nodes.end(),
                                   [](const NodeSpec& n) { return n.role != NodeRole::Sensor; }),
                    cfg.nodes.end());
    const auto c = derive_coefficients(cfg.pipes[0].spec);
    cfg = inject_fault(cfg, FaultSpec{"leak", LeakFault{"p1", c.damping, 0.0}});
    const auto log = run_closed_loop(cfg);
    EXPECT_NEAR(log.rows.back().q, c.drive / (2.0 * c.damping), 1e-12);
    EXPECT_EQ(log.rows.back().u, 0.0);
}

TEST(Simulation, SensorBiasShiftsTrueFlow) {
    // The loop regulates the measured value, so a +1e-4 offset pulls the
    // true flow 1e-4 below the reference once tracking has settled.
    const auto base = short_fig2(14400.0);
    const auto biased = inject_fault(base, FaultSpec{"bias", SensorBiasFault{"s1", 1e-4, 3600.0}});
    const auto a = run_closed_loop(base), b = run_closed_loop(biased);
    ASSERT_EQ(a.rows.size(), b.rows.size());
    double shift = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        if (a.rows[i].t < 3600.0) EXPECT_EQ(a.rows[i].q, b.rows[i].q);
        if (a.rows[i].t >= 7200.0) {
            shift += b.rows[i].e - a.rows[i].e;
            ++n;
        }
    }
    EXPECT_NEAR(shift / n, -1e-4, 1e-5);
}

TEST(Simulation, SensorSpikeIsFlagged) {
    auto cfg = fixtures::load_scenario("fig2_leak.cfg");
    cfg.faults.clear();
    cfg.sim.horizon = 7200.0;
    cfg = inject_fault(cfg, FaultSpec{"spike", SensorSpikeFault{"s1", 2e-3, {5000.0}}});
    const auto log = run_closed_loop(cfg);
    EXPECT_TRUE(std::any_of(log.anomalies.begin(), log.anomalies.end(),
                            [](const AnomalyRow& a) { return a.t == 5000.0 && a.node_id == "d1"; }));
}

TEST(Simulation, ConvergesToContinuousLoopAsSamplingShrinks) {
    // Oracle: the continuous closed loop integrated directly with RK4 at 1 ms.
    const auto cfg0 = short_fig2(120.0);
    const auto coeffs = derive_coefficients(cfg0.pipes[0].spec);
    const auto ref = resolve_reference(cfg0);
    const auto ctl = resolve_controller(cfg0.controller, coeffs, ref);
    auto rhs = [&](double t, double q) {
        const double v = sontag_law(lie_derivatives(make_frame(ref, t, q), coeffs, *ctl.u_bar));
        return rhs_laminar(q, coeffs, apply_valve_command(v, ctl).u);
    };
    std::vector<double> oracle{cfg0.pipes[0].initial_flow};
    double q = oracle.front();
    const double h = 1e-3;
    for (int s = 1; s <= 120; ++s) {
        for (int i = 0; i < 1000; ++i) {
            const double t = (s - 1) + i * h;
            const double k1 = rhs(t, q), k2 = rhs(t + h / 2, q + h / 2 * k1);
            const double k3 = rhs(t + h / 2, q + h / 2 * k2), k4 = rhs(t + h, q + h * k3);
            q += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        }
        oracle.push_back(q);
    }
    double previous = std::numeric_limits<double>::infinity();
    for (double ts : {1.0, 0.5, 0.25, 0.125}) {
        auto cfg = cfg0;
        cfg.controller.sample_period = ts;
        cfg.sim.max_step = std::min(0.25, ts);
        double dev = 0.0;
        for (const auto& r : run_closed_loop(cfg).rows) {
            dev = std::max(dev, std::abs(r.q - oracle[static_cast<std::size_t>(std::llround(r.t))]));
        }
        EXPECT_LT(dev, 0.6 * previous) << "Ts=" << ts;
        previous = dev;
    }
    EXPECT_LT(previous, 2e-5);
}

TEST(Simulation, FusedDetectorLeakLatency) {
    // Paired runs at the scenario seed: fusing the actuator report flags the
    // leak 1 s after onset with 6 false flags beforehand; the solo detector
    // on the same noisy stream needs 2 s and raises 1844 false flags.
    const auto fused_cfg = fixtures::load_scenario("fig2_leak.cfg");
    auto solo_cfg = fused_cfg;
    for (auto& n : solo_cfg.nodes) n.neighbor.clear();
    const auto fused = run_closed_loop(fused_cfg);
    const auto solo = run_closed_loop(solo_cfg);
    EXPECT_EQ(first_flag_after(fused, 43200.0), 1.0);
    EXPECT_EQ(first_flag_after(solo, 43200.0), 2.0);
    EXPECT_EQ(flags_before(fused, 43200.0), 6u);
    EXPECT_EQ(flags_before(solo, 43200.0), 1844u);
    ASSERT_EQ(fused.detectors.size(), 1u);
    EXPECT_EQ(fused.detectors[0].fallbacks, 0u);
}

TEST(Simulation, StaleNeighborFallsBackToSolo) {
    auto cfg = fixtures::load_scenario("fig2_leak.cfg");
    cfg.sim.horizon = 600.0;
    cfg.faults.clear();
    cfg.nodes.back().staleness_bound = 0.0;  // reports are always a sample old
    const auto log = run_closed_loop(cfg);
    EXPECT_EQ(log.detectors[0].fused, 0u);
    EXPECT_GT(log.detectors[0].fallbacks, 500u);
}

TEST(Simulation, PolynomialLawStaysInsideItsBand) {
    const auto log = run_closed_loop(fixtures::load_scenario("fig2_polynomial.cfg"));
    const auto& p = log.pipes[0];
    ASSERT_TRUE(p.law.has_value());
    EXPECT_EQ(p.law->degree(), 12);
    EXPECT_EQ(p.band_exceedances, 0u);
    EXPECT_LE(p.max_abs_error_after_settle, p.epsilon_band);
}

TEST(Simulation, InjectFaultRejectsDanglingReferences) {
    const auto cfg = short_fig2();
    EXPECT_THROW(inject_fault(cfg, FaultSpec{"x", LeakFault{"nope", 0.1, 10.0}}), ValidationError);
    EXPECT_THROW(inject_fault(cfg, FaultSpec{"x", SensorBiasFault{"ghost", 0.1, 10.0}}), ValidationError);
    EXPECT_THROW(inject_fault(cfg, FaultSpec{"x", SensorBiasFault{"c1", 0.1, 10.0}}), ValidationError);
    EXPECT_THROW(inject_fault(cfg, FaultSpec{"x", LeakFault{"p1", 0.1, 1e9}}), ValidationError);
    EXPECT_EQ(inject_fault(cfg, FaultSpec{"x", LeakFault{"p1", 0.1, 10.0}}).faults.size(), 1u);
}

TEST(Simulation, InvalidScenarioIsRejectedBeforeRunning) {
    auto cfg = short_fig2();
    cfg.sim.horizon = 0.0;
    EXPECT_THROW(run_closed_loop(cfg), ValidationError);
}

TEST(Simulation, SummaryReportsKeyFigures) {
    const auto log = run_closed_loop(short_fig2(1800.0));
    const std::string s = format_summary(log, "fig2");
    for (const char* key : {"scenario = fig2", "pipe.p1.rms_error = ", "pipe.p1.max_abs_error_after_settle = ",
                            "pipe.p1.saturation_fraction = ", "pipe.p1.dropped = 0", "flags = 0"}) {
        EXPECT_NE(s.find(key), std::string::npos) << key;
    }
}

TEST(Simulation, CsvHeaders) {
    const auto log = run_closed_loop(short_fig2(10.0));
    std::ostringstream ts, an;
    write_timeseries_csv(ts, log);
    write_anomalies_csv(an, log);
    EXPECT_EQ(ts.str().substr(0, ts.str().find('\n')), "t,pipe_id,q,R,e,u,v,saturated,dropped_cumulative");
    EXPECT_EQ(an.str(), "t,node_id,score\n");
    EXPECT_NE(ts.str().find("\n1.0000000000000000e+01,p1,"), std::string::npos);
}
