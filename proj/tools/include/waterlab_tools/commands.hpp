#pragma once

// Subcommands of the waterlab tool, callable without a process boundary.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace waterlab::tools {

enum ExitCode : int {
    kOk = 0,
    kValidationFailure = 1,
    kRuntimeFailure = 2,
    kVerifyFailure = 3,
};

struct RunRequest {
    std::filesystem::path scenario;
    std::optional<std::uint64_t> seed;
    std::filesystem::path out_dir = "out";
    std::optional<std::string> horizon;
    std::vector<std::string> overrides;  // "section.key=value" or "pipe.<id>.key=value"
    std::optional<std::string> sweep;    // "section.key=v1,v2,..."
    unsigned threads = 0;                // 0: hardware concurrency
};

/// Runs the scenario (or every sweep point) and writes timeseries.csv,
/// anomalies.csv and summary.txt per run.
int cmd_run(const RunRequest& request, std::ostream& out, std::ostream& err);

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string measured;
};

/// The analytic oracle suite behind `waterlab verify`.
std::vector<CheckResult> run_oracle_checks();

int cmd_verify(std::ostream& out);

int cmd_fit_reference(const std::filesystem::path& csv, double omega, std::ostream& out, std::ostream& err);

} // namespace waterlab::tools
