#include "waterlab/controller.hpp"

#include "waterlab/errors.hpp"
#include "waterlab/text.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <sstream>

namespace waterlab {

std::string to_string(ControlMode mode) {
    return mode == ControlMode::ExactSontag ? "exact_sontag" : "polynomial";
}

std::optional<ControlMode> parse_control_mode(std::string_view s) {
    if (s == "exact_sontag") return ControlMode::ExactSontag;
    if (s == "polynomial") return ControlMode::Polynomial;
    return std::nullopt;
}

void ControllerConfig::validate() const {
    std::vector<std::string> problems;
    if (!(u_min >= 0.0)) problems.emplace_back("controller u_min must be >= 0");
    if (!(u_max >= u_min)) problems.emplace_back("controller u_max must be >= u_min");
    if (u_bar && !(*u_bar >= u_min && *u_bar <= u_max)) {
        problems.emplace_back("controller u_bar must lie in [u_min, u_max]");
    }
    if (!(sample_period > 0.0)) problems.emplace_back("controller sample_period must be positive");
    if (!(epsilon_band > 0.0)) problems.emplace_back("controller epsilon_band must be positive");
    if (!(delta_bound > epsilon_band)) problems.emplace_back("controller delta_bound must exceed epsilon_band");
    if (mode == ControlMode::Polynomial && poly_degree < 1) {
        problems.emplace_back("controller poly_degree must be >= 1");
    }
    if (!problems.empty()) throw ValidationError(std::move(problems));
}

double default_valve_opening(const PipeCoefficients& coeffs, const FourierReference& ref) {
    const double r = ref.mean();
    return std::max(0.0, (coeffs.drive - coeffs.damping * r) / (r * r));
}

ControllerConfig resolve_controller(const ControllerConfig& cfg, const PipeCoefficients& coeffs,
                                    const FourierReference& ref) {
    ControllerConfig out = cfg;
    if (!out.u_bar) out.u_bar = std::clamp(default_valve_opening(coeffs, ref), out.u_min, std::max(out.u_min, out.u_max));
    out.validate();
    return out;
}

ErrorFrame make_frame(const FourierReference& ref, double t, double q) {
    const double r = ref.value(t);
    return {t, q - r, r, ref.derivative(t)};
}

double error_drift_f(const ErrorFrame& fr, const PipeCoefficients& c, double u_bar) noexcept {
    const double q = fr.e + fr.R;
    return c.drive - c.damping * q - fr.R_dot - q * q * u_bar;
}

double error_gain_g(const ErrorFrame& fr) noexcept {
    const double q = fr.e + fr.R;
    return -(q * q);
}

LieDerivatives lie_derivatives(const ErrorFrame& fr, const PipeCoefficients& c, double u_bar) noexcept {
    return {fr.e * error_drift_f(fr, c, u_bar), fr.e * error_gain_g(fr)};
}

double sontag_law(const LieDerivatives& d) noexcept {
    if (d.lg == 0.0) return 0.0;
    const double lg2 = d.lg * d.lg;
    const double root = std::hypot(d.lf, lg2);
    // lf + root loses all digits when lf < 0 and lg^4 << lf^2; use the
    // conjugate form there.
    const double numerator = d.lf > 0.0 ? d.lf + root : (lg2 * lg2) / (root - d.lf);
    return -numerator / d.lg;
}

double sontag_feedback(const ErrorFrame& frame, const PipeCoefficients& coeffs, const ControllerConfig& cfg) {
    if (cfg.mode != ControlMode::ExactSontag) throw ValidationError("sontag_feedback requires exact_sontag mode");
    if (!cfg.u_bar) throw ValidationError("controller u_bar is not resolved");
    return sontag_law(lie_derivatives(frame, coeffs, *cfg.u_bar));
}

ValveCommand apply_valve_command(double v, const ControllerConfig& cfg) {
    if (!cfg.u_bar) throw ValidationError("controller u_bar is not resolved");
    const double raw = *cfg.u_bar + v;
    if (raw < cfg.u_min) return {cfg.u_min, true};
    if (raw > cfg.u_max) return {cfg.u_max, true};
    return {raw, false};
}

// ---------------------------------------------------------------------------

namespace {

Eigen::VectorXd trig_basis(int degree, double omega, double t) {
    Eigen::VectorXd phi(2 * degree + 1);
    phi(0) = 1.0;
    for (int j = 1; j <= degree; ++j) {
        phi(2 * j - 1) = std::cos(j * omega * t);
        phi(2 * j) = std::sin(j * omega * t);
    }
    return phi;
}

Eigen::VectorXd power_basis(int degree, double x) {
    Eigen::VectorXd p(degree + 1);
    p(0) = 1.0;
    for (int i = 1; i <= degree; ++i) p(i) = p(i - 1) * x;
    return p;
}

std::string trig_name(int k) {
    if (k == 0) return "const";
    return (k % 2 == 1 ? "cos" : "sin") + std::to_string((k + 1) / 2);
}

} // namespace

PolynomialLaw::PolynomialLaw(int degree, double omega, double e_scale, Eigen::MatrixXd coefficients)
    : degree_(degree), omega_(omega), e_scale_(e_scale), coeffs_(std::move(coefficients)) {
    if (degree_ < 1) throw ValidationError("polynomial degree must be >= 1");
    if (!(omega_ > 0.0) || !(e_scale_ > 0.0)) throw ValidationError("polynomial omega and e_scale must be positive");
    if (coeffs_.rows() != degree_ + 1 || coeffs_.cols() != 2 * degree_ + 1) {
        throw ValidationError("polynomial coefficient table has the wrong shape");
    }
}

double PolynomialLaw::evaluate(double e, double t) const {
    const double x = std::clamp(e, -e_scale_, e_scale_) / e_scale_;
    return power_basis(degree_, x).dot(coeffs_ * trig_basis(degree_, omega_, t));
}

bool PolynomialLaw::operator==(const PolynomialLaw& o) const {
    return degree_ == o.degree_ && omega_ == o.omega_ && e_scale_ == o.e_scale_ && coeffs_ == o.coeffs_ &&
           max_grid_error == o.max_grid_error && rms_grid_error == o.rms_grid_error &&
           epsilon_band == o.epsilon_band;
}

PolynomialLaw fit_polynomial_controller(const PipeCoefficients& coeffs, const FourierReference& ref,
                                        const ControllerConfig& cfg, const PolynomialFitGrid& grid) {
    if (!cfg.u_bar) throw ValidationError("controller u_bar is not resolved");
    const int d = cfg.poly_degree;
    if (d < 1) throw ValidationError("poly_degree must be >= 1");
    if (grid.e_points < d + 1 || grid.t_points < 2 * d + 1) {
        throw FitError("fit grid too small for degree " + std::to_string(d));
    }
    const double delta = cfg.delta_bound;
    const double u_bar = *cfg.u_bar;
    const double T = ref.period();

    Eigen::VectorXd e_grid(grid.e_points);
    for (int i = 0; i < grid.e_points; ++i) {
        e_grid(i) = grid.e_points == 1 ? 0.0 : -delta + 2.0 * delta * i / (grid.e_points - 1);
    }
    Eigen::VectorXd t_grid(grid.t_points);
    for (int k = 0; k < grid.t_points; ++k) t_grid(k) = T * k / grid.t_points;

    Eigen::MatrixXd target(grid.e_points, grid.t_points);
    for (int k = 0; k < grid.t_points; ++k) {
        ErrorFrame fr{t_grid(k), 0.0, ref.value(t_grid(k)), ref.derivative(t_grid(k))};
        for (int i = 0; i < grid.e_points; ++i) {
            fr.e = e_grid(i);
            target(i, k) = sontag_law(lie_derivatives(fr, coeffs, u_bar));
        }
    }

    Eigen::MatrixXd E(grid.e_points, d + 1);
    for (int i = 0; i < grid.e_points; ++i) E.row(i) = power_basis(d, e_grid(i) / delta).transpose();
    Eigen::MatrixXd Phi(grid.t_points, 2 * d + 1);
    for (int k = 0; k < grid.t_points; ++k) Phi.row(k) = trig_basis(d, ref.omega(), t_grid(k)).transpose();

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_e(E);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_t(Phi);
    qr_e.setThreshold(1e-12);
    qr_t.setThreshold(1e-12);
    if (qr_e.rank() < d + 1 || qr_t.rank() < 2 * d + 1) {
        throw FitError("rank-deficient polynomial design (e rank " + std::to_string(qr_e.rank()) + ", t rank " +
                       std::to_string(qr_t.rank()) + ")");
    }

    // On a tensor grid the design matrix is kron(Phi, E), whose least-squares
    // solution factorizes as C = E^+ F (Phi^+)^T.
    const Eigen::MatrixXd left = qr_e.solve(target);                        // (d+1) x nt
    const Eigen::MatrixXd C = qr_t.solve(left.transpose()).transpose();     // (d+1) x (2d+1)

    const Eigen::MatrixXd residual = E * C * Phi.transpose() - target;
    PolynomialLaw law(d, ref.omega(), delta, C);
    law.max_grid_error = residual.cwiseAbs().maxCoeff();
    law.rms_grid_error = std::sqrt(residual.squaredNorm() / static_cast<double>(residual.size()));

    double sensitivity = 0.0;
    for (int k = 0; k < grid.t_points; ++k) {
        const double r = ref.value(t_grid(k));
        sensitivity = std::max(sensitivity, r * r / (coeffs.damping + 2.0 * r * u_bar));
    }
    law.epsilon_band = law.max_grid_error * sensitivity;
    return law;
}

std::string format_polynomial_law(const PolynomialLaw& law) {
    std::ostringstream out;
    out << "degree = " << law.degree() << '\n';
    out << "omega = " << text::shortest(law.omega()) << '\n';
    out << "e_scale = " << text::shortest(law.e_scale()) << '\n';
    out << "max_grid_error = " << text::shortest(law.max_grid_error) << '\n';
    out << "rms_grid_error = " << text::shortest(law.rms_grid_error) << '\n';
    out << "epsilon_band = " << text::shortest(law.epsilon_band) << '\n';
    const auto& C = law.coefficients();
    for (Eigen::Index i = 0; i < C.rows(); ++i) {
        for (Eigen::Index k = 0; k < C.cols(); ++k) {
            out << 'e' << i << '.' << trig_name(static_cast<int>(k)) << " = " << text::shortest(C(i, k)) << '\n';
        }
    }
    return out.str();
}

PolynomialLaw parse_polynomial_law(std::istream& in) {
    std::map<std::string, double, std::less<>> values;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = text::trim(line);
        if (body.empty() || body.front() == '#') continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) throw ParseError(line_no, "expected key = value");
        const std::string key(text::trim(body.substr(0, eq)));
        const auto value = text::parse_double(body.substr(eq + 1));
        if (!value) throw ParseError(line_no, "value of '" + key + "' is not a number");
        if (!values.emplace(key, *value).second) throw ParseError(line_no, "duplicate key '" + key + "'");
    }

    std::vector<std::string> problems;
    auto take = [&](const std::string& key) {
        auto it = values.find(key);
        if (it == values.end()) {
            problems.push_back("missing key '" + key + "'");
            return 0.0;
        }
        const double v = it->second;
        values.erase(it);
        return v;
    };

    const double degree_value = take("degree");
    const int degree = static_cast<int>(degree_value);
    if (degree < 1 || degree != degree_value) throw ValidationError("polynomial degree must be a positive integer");
    const double omega = take("omega");
    const double e_scale = take("e_scale");
    const double max_err = take("max_grid_error");
    const double rms_err = take("rms_grid_error");
    const double band = take("epsilon_band");
    Eigen::MatrixXd C(degree + 1, 2 * degree + 1);
    for (int i = 0; i <= degree; ++i) {
        for (int k = 0; k <= 2 * degree; ++k) C(i, k) = take('e' + std::to_string(i) + '.' + trig_name(k));
    }
    for (const auto& [key, _] : values) problems.push_back("unknown key '" + key + "'");
    if (!problems.empty()) throw ValidationError(std::move(problems));

    PolynomialLaw law(degree, omega, e_scale, std::move(C));
    law.max_grid_error = max_err;
    law.rms_grid_error = rms_err;
    law.epsilon_band = band;
    return law;
}

FlowController::FlowController(PipeCoefficients coeffs, FourierReference ref, ControllerConfig cfg,
                               std::optional<PolynomialLaw> law)
    : coeffs_(coeffs), ref_(std::move(ref)), cfg_(std::move(cfg)), law_(std::move(law)) {
    if (!cfg_.u_bar) throw ValidationError("controller u_bar is not resolved");
    cfg_.validate();
    if (cfg_.mode == ControlMode::Polynomial && !law_) {
        throw ValidationError("polynomial controller needs a fitted law");
    }
}

FlowController::Decision FlowController::decide(double t, double q_measured) const {
    const ErrorFrame frame = make_frame(ref_, t, q_measured);
    const double v = cfg_.mode == ControlMode::ExactSontag ? sontag_law(lie_derivatives(frame, coeffs_, *cfg_.u_bar))
                                                           : law_->evaluate(frame.e, t);
    return {v, apply_valve_command(v, cfg_)};
}

} // namespace waterlab
