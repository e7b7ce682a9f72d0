#pragma once

// Daily demand reference R(t): a truncated Fourier series with a mean term
// and three harmonics of a fixed base frequency omega.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace waterlab {

struct DemandSample {
    double t = 0.0;       // s
    double demand = 0.0;  // m^3/s

    bool operator==(const DemandSample&) const = default;
};

struct FourierCoefficients {
    double omega = 0.0;                 // rad/s
    double mean = 0.0;                  // b0
    std::array<double, 3> cos_terms{};  // b1..b3
    std::array<double, 3> sin_terms{};  // a1..a3

    bool operator==(const FourierCoefficients&) const = default;
};

class FourierReference {
public:
    static constexpr int kHarmonics = 3;
    static constexpr int kPositivityGrid = 10000;

    /// Validates omega > 0 and R(t) > 0 on a uniform grid over one period.
    /// Throws ValidationError or PositivityError.
    explicit FourierReference(const FourierCoefficients& coeffs);

    double value(double t) const noexcept;
    double derivative(double t) const noexcept;

    double omega() const noexcept { return c_.omega; }
    double period() const noexcept;
    /// Mean of R over one period (the b0 term).
    double mean() const noexcept { return c_.mean; }
    /// Smallest value found on the positivity grid.
    double grid_min() const noexcept { return grid_min_; }
    double grid_max() const noexcept { return grid_max_; }

    const FourierCoefficients& coefficients() const noexcept { return c_; }

    bool operator==(const FourierReference& other) const { return c_ == other.c_; }

private:
    FourierCoefficients c_;
    double grid_min_ = 0.0;
    double grid_max_ = 0.0;
};

double eval_reference(const FourierReference& ref, double t) noexcept;
double eval_reference_derivative(const FourierReference& ref, double t) noexcept;

/// Least-squares fit of the 7-term basis {1, cos(i w t), sin(i w t)} at fixed
/// omega. Needs at least 7 samples whose phases cover the period.
FourierReference fit_reference(std::span<const DemandSample> samples, double omega);

struct DemandPatternOptions {
    double period = 86400.0;
    double base = 0.0;
    double morning_peak = 0.0;
    double evening_peak = 0.0;
    double noise_rms = 0.0;
    std::uint64_t seed = 0;
    int sample_count = 288;
};

/// Synthetic day: base level plus Gaussian bumps at 7.5 h and 19 h (scaled to
/// the period, width period/12), plus seeded white noise. Samples are clamped
/// from below at base/10.
std::vector<DemandSample> generate_demand_pattern(const DemandPatternOptions& options);

// Demand CSV: header line, then "t_seconds,demand_m3s" rows.
std::vector<DemandSample> read_demand_csv(const std::string& path);
std::vector<DemandSample> parse_demand_csv(std::istream& in);
void write_demand_csv(std::ostream& out, std::span<const DemandSample> samples);

// Coefficient block: omega, b0..b3, a1..a3 as key=value lines.
std::string format_coefficients(const FourierCoefficients& coeffs);
FourierCoefficients parse_coefficients(std::istream& in);

} // namespace waterlab
