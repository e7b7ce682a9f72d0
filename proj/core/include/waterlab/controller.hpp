#pragma once

// Flow tracking by Sontag's universal formula.
//
// With e = q - R and v = u - u_bar the error dynamics are
//   de/dt = f(t,e) + g(t,e) v
//   f = K - L(e+R) - dR/dt - (e+R)^2 u_bar,   g = -(e+R)^2
// and V = e^2/2 is the control Lyapunov function.

#include "waterlab/hydro.hpp"
#include "waterlab/reference.hpp"

#include <Eigen/Core>

#include <iosfwd>
#include <optional>
#include <string>

namespace waterlab {

enum class ControlMode { ExactSontag, Polynomial };

std::string to_string(ControlMode mode);
std::optional<ControlMode> parse_control_mode(std::string_view text);

struct ControllerConfig {
    /// Average valve opening. Empty means "derive from the pipe and reference"
    /// (see default_valve_opening).
    std::optional<double> u_bar;
    double u_min = 0.0;
    double u_max = 50.0;
    double sample_period = 1.0;  // s
    ControlMode mode = ControlMode::ExactSontag;
    int poly_degree = 8;
    double epsilon_band = 1e-4;  // m^3/s
    double delta_bound = 1.5e-2; // m^3/s

    bool operator==(const ControllerConfig&) const = default;

    /// Throws ValidationError listing every violated invariant.
    void validate() const;
};

/// The opening that puts the open-loop equilibrium at the reference mean:
/// (K - L Rbar) / Rbar^2, clamped at 0.
double default_valve_opening(const PipeCoefficients& coeffs, const FourierReference& ref);

/// Copy of cfg with u_bar filled in (clamped into [u_min, u_max]) and validated.
ControllerConfig resolve_controller(const ControllerConfig& cfg, const PipeCoefficients& coeffs,
                                    const FourierReference& ref);

struct ErrorFrame {
    double t = 0.0;
    double e = 0.0;      // q - R
    double R = 0.0;
    double R_dot = 0.0;
};

ErrorFrame make_frame(const FourierReference& ref, double t, double q);

double error_drift_f(const ErrorFrame& frame, const PipeCoefficients& coeffs, double u_bar) noexcept;
double error_gain_g(const ErrorFrame& frame) noexcept;

struct LieDerivatives {
    double lf = 0.0;  // dV/de * f
    double lg = 0.0;  // dV/de * g
};

LieDerivatives lie_derivatives(const ErrorFrame& frame, const PipeCoefficients& coeffs, double u_bar) noexcept;

/// v = -(LfV + sqrt(LfV^2 + LgV^4)) / LgV, or 0 when LgV = 0.
double sontag_law(const LieDerivatives& d) noexcept;

/// Sontag feedback for an exact-mode controller. cfg.u_bar must be resolved.
double sontag_feedback(const ErrorFrame& frame, const PipeCoefficients& coeffs, const ControllerConfig& cfg);

struct ValveCommand {
    double u = 0.0;
    bool saturated = false;
};

/// clamp(u_bar + v, u_min, u_max) with a saturation flag.
ValveCommand apply_valve_command(double v, const ControllerConfig& cfg);

/// Polynomial-in-e, trigonometric-in-t approximation of the Sontag law:
///   v(e,t) ~ sum_{i<=d} sum_k c_ik (e/delta)^i phi_k(t),
///   phi_0 = 1, phi_{2j-1} = cos(j w t), phi_{2j} = sin(j w t), j <= d.
/// e is clamped to [-delta, delta] before evaluation.
class PolynomialLaw {
public:
    PolynomialLaw() = default;
    PolynomialLaw(int degree, double omega, double e_scale, Eigen::MatrixXd coefficients);

    double evaluate(double e, double t) const;

    int degree() const noexcept { return degree_; }
    double omega() const noexcept { return omega_; }
    double e_scale() const noexcept { return e_scale_; }
    const Eigen::MatrixXd& coefficients() const noexcept { return coeffs_; }

    double max_grid_error = 0.0;
    double rms_grid_error = 0.0;
    /// Tracking band implied by max_grid_error: a constant command offset dv
    /// moves the equilibrium flow by |dq*/du| dv = R^2 / (L + 2 R u_bar) dv,
    /// maximised over the reference period.
    double epsilon_band = 0.0;

    bool operator==(const PolynomialLaw& other) const;

private:
    int degree_ = 0;
    double omega_ = 0.0;
    double e_scale_ = 1.0;
    Eigen::MatrixXd coeffs_;  // (degree+1) x (2*degree+1)
};

struct PolynomialFitGrid {
    int e_points = 241;  // odd, so e = 0 is a grid node
    int t_points = 360;
};

/// Least-squares fit of sontag_law samples on the tensor grid
/// [-delta, delta] x [0, period). cfg.u_bar must be resolved.
PolynomialLaw fit_polynomial_controller(const PipeCoefficients& coeffs, const FourierReference& ref,
                                        const ControllerConfig& cfg, const PolynomialFitGrid& grid = {});

std::string format_polynomial_law(const PolynomialLaw& law);
PolynomialLaw parse_polynomial_law(std::istream& in);

/// A resolved controller for one pipe: turns a (possibly stale) flow sample
/// into a valve command.
class FlowController {
public:
    FlowController(PipeCoefficients coeffs, FourierReference ref, ControllerConfig cfg,
                   std::optional<PolynomialLaw> law = std::nullopt);

    struct Decision {
        double v = 0.0;
        ValveCommand command;
    };

    Decision decide(double t, double q_measured) const;

    const ControllerConfig& config() const noexcept { return cfg_; }
    const std::optional<PolynomialLaw>& law() const noexcept { return law_; }

private:
    PipeCoefficients coeffs_;
    FourierReference ref_;
    ControllerConfig cfg_;
    std::optional<PolynomialLaw> law_;
};

} // namespace waterlab
