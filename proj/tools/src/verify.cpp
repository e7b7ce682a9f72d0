#include "waterlab_tools/commands.hpp"

#include "waterlab/anomaly.hpp"
#include "waterlab/channel.hpp"
#include "waterlab/controller.hpp"
#include "waterlab/hydro.hpp"
#include "waterlab/text.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>

namespace waterlab::tools {

namespace {

PipeSpec lab_pipe() {
    PipeSpec s;
    s.length = 100.0;
    s.diameter = 0.046;
    s.upstream_head = 1.85;
    s.downstream_head = 0.0;
    return s;
}

std::string fmt(double x) { return text::shortest(x); }

// Max |q_n - q(t_n)| of fixed-step RK4 with u = 0 against the closed form.
double linear_ode_error(const PipeCoefficients& c, double dt, double horizon) {
    const double q_inf = c.drive / c.damping;
    double q = 0.0;
    double worst = 0.0;
    const auto steps = static_cast<long>(std::llround(horizon / dt));
    for (long n = 1; n <= steps; ++n) {
        q = integrate_step(q, 0.0, c, dt).flow;
        const double t = static_cast<double>(n) * dt;
        worst = std::max(worst, std::abs(q - (q_inf - q_inf * std::exp(-c.damping * t))));
    }
    return worst;
}

CheckResult check_linear_ode() {
    const PipeCoefficients c = derive_coefficients(lab_pipe());
    const double err = linear_ode_error(c, 0.5, 1000.0);
    return {"linear ODE closed form (dt 0.5 s, 1000 s)", err < 1e-12, "max abs error " + fmt(err) + " m^3/s"};
}

CheckResult check_order() {
    const PipeCoefficients c = derive_coefficients(lab_pipe());
    const double e1 = linear_ode_error(c, 1.0, 1000.0);
    const double e2 = linear_ode_error(c, 0.5, 1000.0);
    const double e3 = linear_ode_error(c, 0.25, 1000.0);
    const double p1 = std::log2(e1 / e2);
    const double p2 = std::log2(e2 / e3);
    const double order = std::min(p1, p2);
    return {"integrator order (Richardson)", order >= 3.9,
            "order " + fmt(order) + " (" + fmt(p1) + ", " + fmt(p2) + ")"};
}

CheckResult check_steady_states() {
    std::mt19937_64 gen(20240611);
    std::uniform_real_distribution<double> logk(-5.0, -3.0), logl(-3.0, -1.0), logu(-1.0, 2.0);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const PipeCoefficients c{std::pow(10.0, logk(gen)), std::pow(10.0, logl(gen))};
        const double u = std::pow(10.0, logu(gen));
        const double expected = (-c.damping + std::sqrt(c.damping * c.damping + 4.0 * u * c.drive)) / (2.0 * u);
        const double rate = c.damping + 2.0 * expected * u;
        const double dt = 0.5 / (c.damping + 2.0 * (c.drive / c.damping) * u);
        double q = 0.0;
        for (double t = 0.0; t < 80.0 / rate; t += dt) q = integrate_step(q, u, c, dt).flow;
        worst = std::max(worst, std::abs(q - expected) / expected);
    }
    return {"quadratic steady states (100 draws)", worst <= 1e-9, "max relative error " + fmt(worst)};
}

CheckResult check_lyapunov() {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    int counted = 0;
    while (counted < 10000) {
        const PipeCoefficients c{std::pow(10.0, -5.0 + 2.0 * unit(gen)), std::pow(10.0, -3.0 + 2.0 * unit(gen))};
        ErrorFrame f;
        f.t = 86400.0 * unit(gen);
        f.R = 0.001 + 0.02 * unit(gen);
        f.R_dot = 1e-6 * (2.0 * unit(gen) - 1.0);
        f.e = (2.0 * unit(gen) - 1.0) * f.R;
        const double u_bar = 10.0 * unit(gen);
        const LieDerivatives d = lie_derivatives(f, c, u_bar);
        if (d.lg == 0.0) continue;
        const double v = sontag_law(d);
        const double root = std::sqrt(d.lf * d.lf + std::pow(d.lg, 4));
        worst = std::max(worst, std::abs(d.lf + d.lg * v + root) / (1.0 + root));
        ++counted;
    }
    return {"Lyapunov identity (10000 draws)", worst <= 1e-10, "max relative deviation " + fmt(worst)};
}

CheckResult check_rls_batch() {
    DetectorConfig cfg;
    cfg.window = 2;
    cfg.forgetting = 1.0;
    cfg.warmup = 0;
    RlsDetector det(cfg);
    std::mt19937_64 gen(11);
    std::normal_distribution<double> noise(0.0, 0.1);
    std::vector<double> x{1.0, 0.5};
    for (int i = 0; i < 60; ++i) x.push_back(0.6 * x[x.size() - 1] - 0.2 * x[x.size() - 2] + 0.3 + noise(gen));
    const int n = 50;
    Eigen::MatrixXd A(n, 3);
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) {
        const double window[2] = {x[static_cast<std::size_t>(i)], x[static_cast<std::size_t>(i) + 1]};
        det.rls_update(window, x[static_cast<std::size_t>(i) + 2]);
        A.row(i) << window[0], window[1], 1.0;
        b(i) = x[static_cast<std::size_t>(i) + 2];
    }
    const Eigen::VectorXd batch = A.colPivHouseholderQr().solve(b);
    const double diff = (det.weights() - batch).cwiseAbs().maxCoeff();
    return {"RLS equals batch least squares (n 50, forgetting 1)", diff <= 1e-8, "max weight difference " + fmt(diff)};
}

CheckResult check_channel() {
    ChannelSpec spec;
    spec.drop_probability = 0.2;
    spec.latency_min = 0.1;
    spec.latency_max = 0.7;
    spec.seed = 42;
    ChannelState state;
    int delivered = 0;
    bool in_bounds = true;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const double t = static_cast<double>(i);
        Message m{"sensor", "controller", t, std::nullopt, FlowSample{0.0, t}};
        if (auto d = schedule_send(m, spec, state)) {
            ++delivered;
            in_bounds = in_bounds && *d >= t + spec.latency_min && *d <= t + spec.latency_max;
        }
    }
    const double fraction = static_cast<double>(delivered) / n;
    return {"channel statistics (p 0.2, n 10000)", std::abs(fraction - 0.8) <= 0.012 && in_bounds,
            "delivered fraction " + fmt(fraction) + (in_bounds ? ", latencies in bounds" : ", latency out of bounds")};
}

CheckResult check_laminar_reduction() {
    const PipeSpec spec = lab_pipe();
    const PipeCoefficients c = derive_coefficients(spec);
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double q = 1e-6 + 0.02 * unit(gen);
        const double k_v = 1000.0 * unit(gen);
        const double general = rhs_general(q, spec, k_v);
        const double laminar = rhs_laminar(q, c, valve_coefficient_to_control(k_v, spec));
        worst = std::max(worst, std::abs(general - laminar) / std::max(std::abs(laminar), 1e-300));
    }
    return {"laminar reduction identity (1000 draws)", worst <= 1e-12, "max relative difference " + fmt(worst)};
}

} // namespace

std::vector<CheckResult> run_oracle_checks() {
    return {check_linear_ode(), check_order(),   check_steady_states(),   check_lyapunov(),
            check_rls_batch(),  check_channel(), check_laminar_reduction()};
}

} // namespace waterlab::tools
