#include "waterlab/reference.hpp"

#include "waterlab/errors.hpp"
#include "waterlab/random.hpp"
#include "waterlab/text.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>

namespace waterlab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kPositivityWarning = 1e-9;

} // namespace

FourierReference::FourierReference(const FourierCoefficients& coeffs) : c_(coeffs) {
    if (!(std::isfinite(c_.omega) && c_.omega > 0.0)) {
        throw ValidationError("reference omega must be positive (got " + std::to_string(c_.omega) + ")");
    }
    auto finite = [](double x) { return std::isfinite(x); };
    if (!finite(c_.mean) || !std::all_of(c_.cos_terms.begin(), c_.cos_terms.end(), finite) ||
        !std::all_of(c_.sin_terms.begin(), c_.sin_terms.end(), finite)) {
        throw ValidationError("reference coefficients must be finite");
    }

    const double T = period();
    grid_min_ = value(0.0);
    grid_max_ = grid_min_;
    for (int k = 1; k < kPositivityGrid; ++k) {
        const double r = value(T * k / kPositivityGrid);
        grid_min_ = std::min(grid_min_, r);
        grid_max_ = std::max(grid_max_, r);
    }
    if (!(grid_min_ > 0.0)) {
        throw PositivityError("reference R(t) is not positive over its period (min " + text::shortest(grid_min_) +
                                  ")",
                              grid_min_);
    }
    if (grid_min_ < kPositivityWarning) {
        std::clog << "warning: reference minimum " << grid_min_ << " is within " << kPositivityWarning
                  << " of zero\n";
    }
}

double FourierReference::period() const noexcept { return kTwoPi / c_.omega; }

double FourierReference::value(double t) const noexcept {
    double r = c_.mean;
    for (int i = 0; i < kHarmonics; ++i) {
        const double arg = (i + 1) * c_.omega * t;
        r += c_.cos_terms[i] * std::cos(arg) + c_.sin_terms[i] * std::sin(arg);
    }
    return r;
}

double FourierReference::derivative(double t) const noexcept {
    double d = 0.0;
    for (int i = 0; i < kHarmonics; ++i) {
        const double w = (i + 1) * c_.omega;
        d += w * (-c_.cos_terms[i] * std::sin(w * t) + c_.sin_terms[i] * std::cos(w * t));
    }
    return d;
}

double eval_reference(const FourierReference& ref, double t) noexcept { return ref.value(t); }

double eval_reference_derivative(const FourierReference& ref, double t) noexcept { return ref.derivative(t); }

FourierReference fit_reference(std::span<const DemandSample> samples, double omega) {
    constexpr int kTerms = 1 + 2 * FourierReference::kHarmonics;
    if (!(std::isfinite(omega) && omega > 0.0)) throw ValidationError("omega must be positive");
    if (samples.size() < static_cast<std::size_t>(kTerms)) {
        throw ValidationError("fit_reference needs at least " + std::to_string(kTerms) + " samples (got " +
                              std::to_string(samples.size()) + ")");
    }

    // Phase coverage: the largest circular gap between sample phases must be
    // under half a period, otherwise the samples do not span the cycle.
    const double T = kTwoPi / omega;
    std::vector<double> phases;
    phases.reserve(samples.size());
    for (const auto& s : samples) {
        if (!std::isfinite(s.t) || !std::isfinite(s.demand)) throw ValidationError("non-finite demand sample");
        double p = std::fmod(s.t, T);
        if (p < 0.0) p += T;
        phases.push_back(p);
    }
    std::sort(phases.begin(), phases.end());
    double max_gap = phases.front() + T - phases.back();
    for (std::size_t i = 1; i < phases.size(); ++i) max_gap = std::max(max_gap, phases[i] - phases[i - 1]);
    if (max_gap >= 0.5 * T) {
        throw FitError("demand samples do not span the period (largest phase gap " + text::shortest(max_gap) +
                       " s of " + text::shortest(T) + " s)");
    }

    const auto n = static_cast<Eigen::Index>(samples.size());
    Eigen::MatrixXd design(n, kTerms);
    Eigen::VectorXd rhs(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const double t = samples[r].t;
        design(r, 0) = 1.0;
        for (int i = 0; i < FourierReference::kHarmonics; ++i) {
            design(r, 1 + 2 * i) = std::cos((i + 1) * omega * t);
            design(r, 2 + 2 * i) = std::sin((i + 1) * omega * t);
        }
        rhs(r) = samples[r].demand;
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < kTerms) {
        throw FitError("rank-deficient Fourier design matrix (rank " + std::to_string(qr.rank()) + " of " +
                       std::to_string(kTerms) + ")");
    }
    const Eigen::VectorXd x = qr.solve(rhs);

    FourierCoefficients c;
    c.omega = omega;
    c.mean = x(0);
    for (int i = 0; i < FourierReference::kHarmonics; ++i) {
        c.cos_terms[i] = x(1 + 2 * i);
        c.sin_terms[i] = x(2 + 2 * i);
    }
    return FourierReference(c);
}

std::vector<DemandSample> generate_demand_pattern(const DemandPatternOptions& o) {
    std::vector<std::string> problems;
    if (!(o.period > 0.0)) problems.emplace_back("period must be positive");
    if (!(o.base > 0.0)) problems.emplace_back("base demand must be positive");
    if (!(o.morning_peak >= 0.0) || !(o.evening_peak >= 0.0)) problems.emplace_back("peaks must be nonnegative");
    if (!(o.noise_rms >= 0.0)) problems.emplace_back("noise_rms must be nonnegative");
    if (o.sample_count < 1) problems.emplace_back("sample_count must be positive");
    if (!problems.empty()) throw ValidationError(std::move(problems));

    const double hour = o.period / 24.0;
    const double width = o.period / 12.0;
    const std::uint64_t stream = rng::hash_name("demand-pattern");

    auto bump = [&](double t, double center) {
        double d = std::abs(t - center);
        d = std::min(d, o.period - d);
        return std::exp(-0.5 * (d / width) * (d / width));
    };

    std::vector<DemandSample> out;
    out.reserve(o.sample_count);
    for (int k = 0; k < o.sample_count; ++k) {
        const double t = o.period * k / o.sample_count;
        double y = o.base + o.morning_peak * bump(t, 7.5 * hour) + o.evening_peak * bump(t, 19.0 * hour);
        if (o.noise_rms > 0.0) y += o.noise_rms * rng::normal(o.seed, stream, static_cast<std::uint64_t>(k));
        out.push_back({t, std::max(y, o.base / 10.0)});
    }
    return out;
}

std::vector<DemandSample> parse_demand_csv(std::istream& in) {
    std::vector<DemandSample> out;
    std::string line;
    int line_no = 0;
    if (!std::getline(in, line)) throw ParseError(1, "empty demand CSV (expected header)");
    ++line_no;
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = text::trim(line);
        if (body.empty()) continue;
        const auto comma = body.find(',');
        if (comma == std::string_view::npos) throw ParseError(line_no, "expected two comma-separated columns");
        const auto t = text::parse_double(body.substr(0, comma));
        const auto d = text::parse_double(body.substr(comma + 1));
        if (!t || !d) throw ParseError(line_no, "non-numeric value in demand CSV");
        out.push_back({*t, *d});
    }
    return out;
}

std::vector<DemandSample> read_demand_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open demand CSV '" + path + "'");
    return parse_demand_csv(in);
}

void write_demand_csv(std::ostream& out, std::span<const DemandSample> samples) {
    out << "t_seconds,demand_m3s\n";
    for (const auto& s : samples) out << text::scientific(s.t) << ',' << text::scientific(s.demand) << '\n';
}

std::string format_coefficients(const FourierCoefficients& c) {
    std::ostringstream out;
    out << "omega = " << text::shortest(c.omega) << '\n';
    out << "b0 = " << text::shortest(c.mean) << '\n';
    for (int i = 0; i < 3; ++i) out << 'b' << i + 1 << " = " << text::shortest(c.cos_terms[i]) << '\n';
    for (int i = 0; i < 3; ++i) out << 'a' << i + 1 << " = " << text::shortest(c.sin_terms[i]) << '\n';
    return out.str();
}

FourierCoefficients parse_coefficients(std::istream& in) {
    std::map<std::string, double, std::less<>> values;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto body = text::trim(line);
        if (body.empty() || body.front() == '#') continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) throw ParseError(line_no, "expected key = value");
        const auto key = std::string(text::trim(body.substr(0, eq)));
        const auto value = text::parse_double(body.substr(eq + 1));
        if (!value) throw ParseError(line_no, "value of '" + key + "' is not a number");
        if (!values.emplace(key, *value).second) throw ParseError(line_no, "duplicate key '" + key + "'");
    }

    std::vector<std::string> problems;
    auto take = [&](const char* key) {
        auto it = values.find(key);
        if (it == values.end()) {
            problems.push_back(std::string("missing coefficient '") + key + "'");
            return 0.0;
        }
        const double v = it->second;
        values.erase(it);
        return v;
    };
    FourierCoefficients c;
    c.omega = take("omega");
    c.mean = take("b0");
    c.cos_terms = {take("b1"), take("b2"), take("b3")};
    c.sin_terms = {take("a1"), take("a2"), take("a3")};
    for (const auto& [key, _] : values) problems.push_back("unknown coefficient '" + key + "'");
    if (!problems.empty()) throw ValidationError(std::move(problems));
    return c;
}

} // namespace waterlab
