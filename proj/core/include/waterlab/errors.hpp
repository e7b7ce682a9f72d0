#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace waterlab {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid input or violated precondition. Carries every problem found, not
/// just the first one.
class ValidationError : public Error {
public:
    explicit ValidationError(std::string message)
        : Error(message), problems_{std::move(message)} {}

    explicit ValidationError(std::vector<std::string> problems)
        : Error(join(problems)), problems_(std::move(problems)) {}

    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    static std::string join(const std::vector<std::string>& problems) {
        std::string out;
        for (const auto& p : problems) {
            if (!out.empty()) out += "; ";
            out += p;
        }
        return out;
    }

    std::vector<std::string> problems_;
};

/// Malformed configuration text.
class ParseError : public Error {
public:
    ParseError(int line, const std::string& message)
        : Error("line " + std::to_string(line) + ": " + message), line_(line) {}

    int line() const noexcept { return line_; }

private:
    int line_;
};

/// Least-squares fit could not be formed (rank deficiency).
class FitError : public Error {
public:
    using Error::Error;
};

/// A demand reference that is not strictly positive over its period.
class PositivityError : public Error {
public:
    PositivityError(const std::string& message, double min_value)
        : Error(message), min_value_(min_value) {}

    double min_value() const noexcept { return min_value_; }

private:
    double min_value_;
};

/// The plant integration produced a non-finite flow.
class IntegrationError : public Error {
public:
    IntegrationError(double t, double q)
        : Error("integration diverged at t=" + std::to_string(t) + " s (q=" + std::to_string(q) + ")"),
          t_(t), q_(q) {}

    double time() const noexcept { return t_; }
    double flow() const noexcept { return q_; }

private:
    double t_;
    double q_;
};

} // namespace waterlab
