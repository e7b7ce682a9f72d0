#include "waterlab/hydro.hpp"

#include "waterlab/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace waterlab {

void PipeSpec::validate() const {
    std::vector<std::string> problems;
    auto positive = [&](double value, const char* name) {
        if (!(std::isfinite(value) && value > 0.0)) {
            problems.push_back(std::string(name) + " must be positive (got " + std::to_string(value) + ")");
        }
    };
    positive(length, "length");
    positive(diameter, "diameter");
    positive(kinematic_viscosity, "kinematic_viscosity");
    positive(gravity, "gravity");
    if (!std::isfinite(upstream_head) || !std::isfinite(downstream_head)) {
        problems.emplace_back("upstream_head and downstream_head must be finite");
    } else if (upstream_head < downstream_head) {
        problems.push_back("upstream_head (" + std::to_string(upstream_head) + ") must be >= downstream_head (" +
                           std::to_string(downstream_head) + ")");
    }
    if (friction_factor && !(std::isfinite(*friction_factor) && *friction_factor >= 0.0)) {
        problems.emplace_back("friction_factor must be nonnegative");
    }
    if (!problems.empty()) throw ValidationError(std::move(problems));
}

double PipeSpec::cross_section() const {
    return std::numbers::pi * diameter * diameter / 4.0;
}

PipeCoefficients derive_coefficients(const PipeSpec& spec) {
    spec.validate();
    const double area = spec.cross_section();
    return PipeCoefficients{
        .drive = spec.gravity * area * (spec.upstream_head - spec.downstream_head) / spec.length,
        .damping = 64.0 * spec.kinematic_viscosity / (2.0 * spec.diameter * spec.diameter),
    };
}

double rhs_general(double q, const PipeSpec& spec, double k_v) {
    spec.validate();
    if (!(k_v >= 0.0)) throw ValidationError("valve coefficient k_v must be nonnegative");

    const double area = spec.cross_section();
    const double pressure = spec.gravity * area * (spec.upstream_head - spec.downstream_head) / spec.length;

    double friction = 0.0;
    if (spec.friction_factor) {
        friction = *spec.friction_factor / (2.0 * spec.diameter * area) * q * std::abs(q);
    } else if (q != 0.0) {
        // f = 64/Re with Re = |q| D / (nu A)
        const double f = 64.0 * spec.kinematic_viscosity * area / (std::abs(q) * spec.diameter);
        friction = f / (2.0 * spec.diameter * area) * q * std::abs(q);
    }
    const double valve = k_v * q * std::abs(q) / (2.0 * area * spec.length);
    return pressure - friction - valve;
}

double rhs_laminar(double q, const PipeCoefficients& coeffs, double u) noexcept {
    return coeffs.drive - coeffs.damping * q - q * q * u;
}

double valve_coefficient_to_control(double k_v, const PipeSpec& spec) {
    return k_v / (2.0 * spec.cross_section() * spec.length);
}

double steady_flow(const PipeCoefficients& coeffs, double u) {
    if (!(u >= 0.0)) throw ValidationError("valve setting u must be nonnegative");
    if (u == 0.0) return coeffs.drive / coeffs.damping;
    // Rationalized positive root of u q^2 + L q - K = 0; avoids cancellation
    // when 4uK is small next to L^2.
    const double disc = std::sqrt(coeffs.damping * coeffs.damping + 4.0 * u * coeffs.drive);
    return 2.0 * coeffs.drive / (coeffs.damping + disc);
}

double step_stiffness(double q, double u, const PipeCoefficients& coeffs) noexcept {
    return coeffs.damping + 2.0 * std::abs(q) * u;
}

StepResult integrate_step(double q, double u, const PipeCoefficients& coeffs, double dt, double t) {
    if (!(dt > 0.0)) throw ValidationError("integration step dt must be positive");
    if (!(u >= 0.0)) throw ValidationError("valve setting u must be nonnegative");
    if (!(dt * step_stiffness(q, u, coeffs) < 1.0)) {
        throw ValidationError("integration step too large: dt*(L + 2|q|u) = " +
                              std::to_string(dt * step_stiffness(q, u, coeffs)) + " must be < 1");
    }

    const double k1 = rhs_laminar(q, coeffs, u);
    const double k2 = rhs_laminar(q + 0.5 * dt * k1, coeffs, u);
    const double k3 = rhs_laminar(q + 0.5 * dt * k2, coeffs, u);
    const double k4 = rhs_laminar(q + dt * k3, coeffs, u);
    const double next = q + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

    if (!std::isfinite(next)) throw IntegrationError(t + dt, next);
    if (next < 0.0) return {0.0, true};
    return {next, false};
}

} // namespace waterlab
