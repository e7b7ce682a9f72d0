#include "waterlab/anomaly.hpp"
#include "waterlab/controller.hpp"
#include "waterlab/hydro.hpp"
#include "waterlab/random.hpp"
#include "waterlab/scenario.hpp"
#include "waterlab/simulation.hpp"

#include <benchmark/benchmark.h>

#include <vector>

using namespace waterlab;

namespace {

PipeSpec lab_pipe() {
    PipeSpec s;
    s.length = 100.0;
    s.diameter = 0.046;
    s.upstream_head = 1.85;
    s.downstream_head = 0.0;
    return s;
}

void BM_IntegrateStep(benchmark::State& state) {
    const auto c = derive_coefficients(lab_pipe());
    double q = 8.6e-6;
    for (auto _ : state) {
        q = integrate_step(q, 1.2, c, 0.25).flow;
        benchmark::DoNotOptimize(q);
    }
}
BENCHMARK(BM_IntegrateStep);

void BM_SontagLaw(benchmark::State& state) {
    const auto c = derive_coefficients(lab_pipe());
    const auto cfg = parse_scenario(WATERLAB_SCENARIO_DIR "/fig2.cfg");
    const auto ref = resolve_reference(cfg);
    const auto ctl = resolve_controller(cfg.controller, c, ref);
    double t = 0.0;
    for (auto _ : state) {
        const auto fr = make_frame(ref, t, 0.009);
        benchmark::DoNotOptimize(sontag_feedback(fr, c, ctl));
        t += 1.0;
    }
}
BENCHMARK(BM_SontagLaw);

void BM_RlsObserve(benchmark::State& state) {
    DetectorConfig cfg;
    cfg.window = static_cast<std::size_t>(state.range(0));
    RlsDetector det(cfg);
    std::vector<double> window(cfg.window);
    std::uint64_t i = 0;
    for (auto _ : state) {
        const double x = rng::normal(1, 2, i++);
        benchmark::DoNotOptimize(det.observe(window, x));
        window.erase(window.begin());
        window.push_back(x);
    }
}
BENCHMARK(BM_RlsObserve)->Arg(2)->Arg(5)->Arg(10);

void BM_LabPipeHour(benchmark::State& state) {
    auto cfg = parse_scenario(WATERLAB_SCENARIO_DIR "/fig2.cfg");
    cfg.sim.horizon = 3600.0;
    cfg.sim.settle_time = 600.0;
    for (auto _ : state) benchmark::DoNotOptimize(run_closed_loop(cfg).rows.size());
}
BENCHMARK(BM_LabPipeHour)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
