#include "waterlab_tools/commands.hpp"

#include "waterlab/errors.hpp"
#include "waterlab/reference.hpp"
#include "waterlab/scenario.hpp"
#include "waterlab/simulation.hpp"
#include "waterlab/text.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace waterlab::tools {

namespace {

struct RunPoint {
    RawDocument doc;
    std::filesystem::path out_dir;
    std::string label;
};

struct RunOutcome {
    int code = kOk;
    std::string message;
    std::string summary;
};

std::pair<std::string, std::string> split_assignment(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ValidationError("expected key=value, got '" + text + "'");
    }
    return {std::string(text::trim(text.substr(0, eq))), std::string(text::trim(text.substr(eq + 1)))};
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) out.emplace_back(text::trim(item));
    return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write '" + path.string() + "'");
    f << content;
    if (!f) throw Error("failed writing '" + path.string() + "'");
}

RunOutcome execute(const RunPoint& point, const std::filesystem::path& base_dir) {
    RunOutcome outcome;
    try {
        const ScenarioConfig cfg = build_scenario(point.doc, base_dir);
        const TimeSeriesLog log = run_closed_loop(cfg);
        std::filesystem::create_directories(point.out_dir);
        std::ostringstream ts, an;
        write_timeseries_csv(ts, log);
        write_anomalies_csv(an, log);
        outcome.summary = format_summary(log, cfg.sim.name);
        write_file(point.out_dir / "timeseries.csv", ts.str());
        write_file(point.out_dir / "anomalies.csv", an.str());
        write_file(point.out_dir / "summary.txt", outcome.summary);
    } catch (const ValidationError& e) {
        outcome.code = kValidationFailure;
        outcome.message = "validation failed:";
        for (const auto& p : e.problems()) outcome.message += "\n  " + p;
    } catch (const ParseError& e) {
        outcome.code = kValidationFailure;
        outcome.message = std::string("syntax error: ") + e.what();
    } catch (const std::exception& e) {
        outcome.code = kRuntimeFailure;
        outcome.message = std::string("run failed: ") + e.what();
    }
    return outcome;
}

} // namespace

int cmd_run(const RunRequest& request, std::ostream& out, std::ostream& err) {
    std::vector<RunPoint> points;
    try {
        RawDocument doc = read_document(request.scenario);
        for (const auto& o : request.overrides) {
            auto [key, value] = split_assignment(o);
            set_value(doc, key, value);
        }
        if (request.horizon) set_value(doc, "sim.horizon", *request.horizon);

        std::uint64_t base_seed = 0;
        if (request.seed) {
            base_seed = *request.seed;
            set_value(doc, "sim.seed", std::to_string(base_seed));
        } else {
            base_seed = build_scenario(doc, request.scenario.parent_path()).sim.seed;
        }

        if (!request.sweep) {
            points.push_back({doc, request.out_dir, request.scenario.string()});
        } else {
            auto [key, values] = split_assignment(*request.sweep);
            const auto list = split_list(values);
            if (list.empty()) throw ValidationError("--sweep needs at least one value");
            for (std::size_t i = 0; i < list.size(); ++i) {
                RunPoint p{doc, {}, key + "=" + list[i]};
                set_value(p.doc, key, list[i]);
                set_value(p.doc, "sim.seed", std::to_string(base_seed + i));
                char name[32];
                std::snprintf(name, sizeof name, "run_%03zu", i);
                p.out_dir = request.out_dir / name;
                points.push_back(std::move(p));
            }
        }
    } catch (const ValidationError& e) {
        err << "validation failed:\n";
        for (const auto& p : e.problems()) err << "  " << p << '\n';
        return kValidationFailure;
    } catch (const ParseError& e) {
        err << "syntax error in " << request.scenario.string() << ": " << e.what() << '\n';
        return kValidationFailure;
    }

    // Sweep points are independent: no shared mutable state besides the
    // outcome slot each worker owns.
    std::vector<RunOutcome> outcomes(points.size());
    const std::filesystem::path base_dir = request.scenario.parent_path();
    unsigned threads = request.threads ? request.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(points.size()));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < points.size(); i = next++) outcomes[i] = execute(points[i], base_dir);
    };
    std::vector<std::thread> pool;
    for (unsigned i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    int code = kOk;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& o = outcomes[i];
        if (o.code != kOk) {
            err << points[i].label << ": " << o.message << '\n';
            code = std::max(code, o.code);
            continue;
        }
        if (points.size() > 1) out << "# " << points[i].label << " -> " << points[i].out_dir.string() << '\n';
        out << o.summary;
    }
    if (request.sweep) {
        std::ostringstream index;
        index << "index,assignment,seed_offset,status,out_dir\n";
        for (std::size_t i = 0; i < points.size(); ++i) {
            index << i << ',' << points[i].label << ',' << i << ',' << outcomes[i].code << ','
                  << points[i].out_dir.filename().string() << '\n';
        }
        try {
            std::filesystem::create_directories(request.out_dir);
            write_file(request.out_dir / "sweep.csv", index.str());
        } catch (const std::exception& e) {
            err << e.what() << '\n';
            code = std::max<int>(code, kRuntimeFailure);
        }
    }
    return code;
}

int cmd_verify(std::ostream& out) {
    const auto checks = run_oracle_checks();
    bool ok = true;
    for (const auto& c : checks) {
        out << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.measured << '\n';
        ok = ok && c.passed;
    }
    out << (ok ? "all checks passed" : "some checks FAILED") << '\n';
    return ok ? kOk : kVerifyFailure;
}

int cmd_fit_reference(const std::filesystem::path& csv, double omega, std::ostream& out, std::ostream& err) {
    try {
        const auto samples = read_demand_csv(csv.string());
        const FourierReference ref = fit_reference(samples, omega);
        out << format_coefficients(ref.coefficients());
        return kOk;
    } catch (const PositivityError& e) {
        err << "fitted reference rejected: " << e.what() << '\n';
    } catch (const ValidationError& e) {
        err << "invalid input: " << e.what() << '\n';
    } catch (const Error& e) {
        err << "fit failed: " << e.what() << '\n';
    }
    return kValidationFailure;
}

} // namespace waterlab::tools
