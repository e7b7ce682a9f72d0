#pragma once

// Rigid water-column model of a single valved pipe.
//
//   general:  dq/dt = gA(Hu-Hd)/L - f/(2DA) q|q| - k_v q|q| / (2AL)
//   laminar:  dq/dt = K - L q - q^2 u,   K = gA(Hu-Hd)/L,  L = 64 nu / (2 D^2),  u = k_v / (2AL)
//
// The laminar form is what the simulator integrates.

#include <optional>

namespace waterlab {

/// Geometry, fluid and boundary heads of one valved pipe. SI units throughout.
struct PipeSpec {
    double length = 0.0;               // m
    double diameter = 0.0;             // m
    double upstream_head = 0.0;        // m
    double downstream_head = 0.0;      // m
    double kinematic_viscosity = 1e-6; // m^2/s
    double gravity = 9.81;             // m/s^2
    /// Constant Darcy friction factor for rhs_general. Empty selects the
    /// laminar substitution f = 64/Re.
    std::optional<double> friction_factor;

    bool operator==(const PipeSpec&) const = default;

    /// Throws ValidationError listing every offending field.
    void validate() const;

    double cross_section() const;  // A = pi D^2 / 4
};

/// Coefficients of the laminar model.
struct PipeCoefficients {
    double drive = 0.0;    // K [m^3/s^2]
    double damping = 0.0;  // L [1/s]

    bool operator==(const PipeCoefficients&) const = default;
};

/// Flow and valve setting of one pipe. u = k_v / (2AL) >= 0.
struct PipeState {
    double flow = 0.0;   // m^3/s
    double valve = 0.0;  // 1/m^3
};

PipeCoefficients derive_coefficients(const PipeSpec& spec);

/// Momentum equation with friction and valve loss. k_v is the dimensionless
/// valve head-loss coefficient.
double rhs_general(double q, const PipeSpec& spec, double k_v);

/// K - L q - q^2 u.
double rhs_laminar(double q, const PipeCoefficients& coeffs, double u) noexcept;

/// Converts a valve head-loss coefficient to the control variable u.
double valve_coefficient_to_control(double k_v, const PipeSpec& spec);

/// Nonnegative equilibrium of rhs_laminar for a fixed valve setting.
double steady_flow(const PipeCoefficients& coeffs, double u);

struct StepResult {
    double flow = 0.0;
    bool clamped = false;  // the raw RK4 result was negative and was clamped to 0
};

/// One classical RK4 step of rhs_laminar with u held over the step.
///
/// Requires dt > 0 and dt * (L + 2|q|u) < 1; the second term reduces to the
/// plain damping guard dt * L < 1 when the valve is open. `t` only labels the
/// IntegrationError thrown on a non-finite result.
StepResult integrate_step(double q, double u, const PipeCoefficients& coeffs, double dt, double t = 0.0);

/// Local stiffness |d rhs / dq| at (q, u), the quantity the step guard bounds.
double step_stiffness(double q, double u, const PipeCoefficients& coeffs) noexcept;

} // namespace waterlab
