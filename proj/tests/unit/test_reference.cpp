#include "fixtures.hpp"

#include "waterlab/errors.hpp"
#include "waterlab/reference.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace waterlab;

namespace {

FourierCoefficients known_signal() {
    FourierCoefficients c;
    c.omega = fixtures::kDayOmega;
    c.mean = 0.01;
    c.cos_terms = {-0.002, 0.0015, 0.0004};
    c.sin_terms = {0.001, -0.0007, 0.0002};
    return c;
}

std::vector<DemandSample> sample(const FourierCoefficients& c, int n, double span) {
    std::vector<DemandSample> out;
    for (int k = 0; k < n; ++k) {
        const double t = span * k / n;
        double y = c.mean;
        for (int i = 0; i < 3; ++i) {
            y += c.cos_terms[i] * std::cos((i + 1) * c.omega * t) + c.sin_terms[i] * std::sin((i + 1) * c.omega * t);
        }
        out.push_back({t, y});
    }
    return out;
}

} // namespace

TEST(Reference, ExactRecoveryOfThreeHarmonics) {
    const auto truth = known_signal();
    const auto fit = fit_reference(sample(truth, 96, 86400.0), truth.omega).coefficients();
    EXPECT_NEAR(fit.mean, truth.mean, 1e-9);
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(fit.cos_terms[i], truth.cos_terms[i], 1e-9);
        EXPECT_NEAR(fit.sin_terms[i], truth.sin_terms[i], 1e-9);
    }
}

TEST(Reference, SevenSamplesAreEnough) {
    const auto truth = known_signal();
    const auto fit = fit_reference(sample(truth, 7, 86400.0), truth.omega).coefficients();
    EXPECT_NEAR(fit.cos_terms[2], truth.cos_terms[2], 1e-9);
}

TEST(Reference, TooFewSamplesIsAPreconditionError) {
    const auto truth = known_signal();
    EXPECT_THROW(fit_reference(sample(truth, 6, 86400.0), truth.omega), ValidationError);
    EXPECT_THROW(fit_reference(sample(truth, 3, 86400.0), truth.omega), ValidationError);
}

TEST(Reference, SamplesCoveringHalfAPeriodAreRejected) {
    const auto truth = known_signal();
    EXPECT_THROW(fit_reference(sample(truth, 50, 43200.0), truth.omega), FitError);
}

TEST(Reference, InvalidOmegaIsRejected) {
    const auto s = sample(known_signal(), 20, 86400.0);
    EXPECT_THROW(fit_reference(s, 0.0), ValidationError);
    EXPECT_THROW(fit_reference(s, -1.0), ValidationError);
}

TEST(Reference, PositivityRejection) {
    auto c = known_signal();
    c.mean = 0.001;  // the harmonics now pull R below zero
    try {
        FourierReference ref(c);
        FAIL() << "expected PositivityError";
    } catch (const PositivityError& e) {
        EXPECT_LT(e.min_value(), 0.0);
    }
    const auto dipping = sample(c, 48, 86400.0);
    EXPECT_THROW(fit_reference(dipping, c.omega), PositivityError);
}

TEST(Reference, DerivativeMatchesCentralDifference) {
    const FourierReference ref(known_signal());
    for (double t : {0.0, 1234.5, 40000.0, 86399.0}) {
        const double h = 1.0;
        const double fd = (ref.value(t + h) - ref.value(t - h)) / (2.0 * h);
        EXPECT_NEAR(ref.derivative(t), fd, 1e-12);
        EXPECT_EQ(eval_reference(ref, t), ref.value(t));
        EXPECT_EQ(eval_reference_derivative(ref, t), ref.derivative(t));
    }
}

TEST(Reference, IsPeriodic) {
    const FourierReference ref(known_signal());
    EXPECT_NEAR(ref.period(), 86400.0, 1e-9);
    for (double t : {0.0, 5000.0, 70000.0}) EXPECT_NEAR(ref.value(t), ref.value(t + ref.period()), 1e-15);
}

TEST(Reference, TwoPeakDayMatchesIndependentLeastSquares) {
    // Oracle: numpy.linalg.lstsq on the same 288 samples.
    const auto ref = fixtures::lab_reference();
    const auto& c = ref.coefficients();
    const double tol = 1e-15;
    EXPECT_NEAR(c.mean, 0.010715513958796783, tol);
    EXPECT_NEAR(c.cos_terms[0], -0.00017643361490352972, tol);
    EXPECT_NEAR(c.sin_terms[0], -0.0004437377841987012, tol);
    EXPECT_NEAR(c.cos_terms[1], -0.0024880003305049773, tol);
    EXPECT_NEAR(c.sin_terms[1], -0.0018693868856681979, tol);
    EXPECT_NEAR(c.cos_terms[2], 7.220908148096112e-05, tol);
    EXPECT_NEAR(c.sin_terms[2], 0.0003228438184555517, tol);

    const auto samples = generate_demand_pattern(fixtures::two_peak_day());
    double sum2 = 0.0, mean = 0.0;
    for (const auto& s : samples) {
        sum2 += std::pow(s.demand - ref.value(s.t), 2);
        mean += s.demand;
    }
    mean /= static_cast<double>(samples.size());
    const double relative_rms = std::sqrt(sum2 / static_cast<double>(samples.size())) / mean;
    EXPECT_NEAR(relative_rms, 0.038889340914550596, 1e-12);
    EXPECT_GT(ref.grid_min(), 0.0076);
    EXPECT_LT(ref.grid_max(), 0.0144);
}

TEST(Reference, DemandPatternIsSeededAndDeterministic) {
    auto o = fixtures::two_peak_day();
    o.noise_rms = 1e-4;
    o.seed = 5;
    const auto a = generate_demand_pattern(o);
    const auto b = generate_demand_pattern(o);
    EXPECT_EQ(a, b);
    o.seed = 6;
    EXPECT_NE(a, generate_demand_pattern(o));
    for (const auto& s : a) EXPECT_GE(s.demand, o.base / 10.0);
}

TEST(Reference, DemandCsvRoundTrip) {
    const auto samples = generate_demand_pattern(fixtures::two_peak_day());
    std::stringstream buf;
    write_demand_csv(buf, samples);
    const auto back = parse_demand_csv(buf);
    ASSERT_EQ(back.size(), samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        EXPECT_DOUBLE_EQ(back[i].t, samples[i].t);
        EXPECT_NEAR(back[i].demand, samples[i].demand, 1e-18);
    }
}

TEST(Reference, DemandCsvErrorsCarryLineNumbers) {
    std::istringstream bad("t_seconds,demand_m3s\n0,0.01\n300;0.02\n");
    try {
        parse_demand_csv(bad);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3);
    }
    std::istringstream nonnumeric("t_seconds,demand_m3s\n0,abc\n");
    EXPECT_THROW(parse_demand_csv(nonnumeric), ParseError);
    std::istringstream empty("");
    EXPECT_THROW(parse_demand_csv(empty), ParseError);
    EXPECT_THROW(read_demand_csv("/nonexistent/demand.csv"), ValidationError);
}

TEST(Reference, CoefficientBlockRoundTrips) {
    const auto c = fixtures::lab_reference().coefficients();
    std::istringstream in(format_coefficients(c));
    EXPECT_EQ(parse_coefficients(in), c);
    EXPECT_NO_THROW(FourierReference{c});
}

TEST(Reference, CoefficientBlockReportsAllProblems) {
    std::istringstream in("omega = 1e-4\nb0 = 0.01\nb9 = 3\n");
    try {
        parse_coefficients(in);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.problems().size(), 7u);  // six missing, one unknown
    }
    std::istringstream dup("omega = 1\nomega = 2\n");
    EXPECT_THROW(parse_coefficients(dup), ParseError);
}
