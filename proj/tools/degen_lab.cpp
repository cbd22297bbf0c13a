// degen-lab <experiment> --config <path> [--out <dir>] [--jobs <k>]
//
// Exit status: 0 all checks passed, 1 a check failed, 2 configuration or
// input error, 3 numerical failure.

#include "degen/runner.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Numerical experiments for degenerate parabolic equations"};
    std::string experiment, config, out = "out";
    int jobs = 1;
    std::string names;
    for (const auto& n : degen::experiment_names()) names += (names.empty() ? "" : ", ") + n;
    app.add_option("experiment", experiment, "one of: " + names)->required();
    app.add_option("--config", config, "JSON configuration file")->required();
    app.add_option("--out", out, "output directory")->capture_default_str();
    app.add_option("--jobs", jobs, "worker threads")->check(CLI::Range(1, 256))->capture_default_str();
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const auto cfg = degen::load_config(config, experiment);
        const auto reports = degen::run(cfg, jobs);
        const bool ok = degen::write_reports(out, reports, experiment);
        for (const auto& r : reports)
            for (const auto& c : r.checks)
                std::printf("%s %s/%s\n", c.passed ? "PASS" : "FAIL", r.experiment.c_str(), c.name.c_str());
        return ok ? 0 : 1;
    } catch (const degen::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const degen::ParameterError& e) {
        std::fprintf(stderr, "parameter error: %s\n", e.what());
        return 2;
    } catch (const degen::PreconditionError& e) {
        std::fprintf(stderr, "precondition error: %s\n", e.what());
        return 2;
    } catch (const degen::ContractViolation& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return 2;
    } catch (const degen::Error& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
