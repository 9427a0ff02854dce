// spotcov: simulate | estimate | select-bandwidth | mc-study | forecast
//
// Exit codes: 0 success, 1 validation or user error, 2 I/O error.

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "spotcov/cli.hpp"
#include "spotcov/parallel.hpp"

namespace {

struct Common {
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "JSON config file")->required();
    sub->add_option("--out", c.out, "output directory")->capture_default_str();
    sub->add_option("--seed", c.seed, "master seed (overrides the config)");
    sub->add_option("--threads", c.threads, "worker threads (default: $SPOTCOV_THREADS or all cores)");
}

unsigned resolve_threads(const std::optional<unsigned>& flag) {
    if (flag) return *flag;
    if (const char* env = std::getenv("SPOTCOV_THREADS")) {
        try {
            std::size_t pos = 0;
            const long v = std::stol(env, &pos);
            if (pos == std::string(env).size() && v >= 0) return static_cast<unsigned>(v);
        } catch (const std::exception&) {
        }
        throw spotcov::invalid_argument(std::string("SPOTCOV_THREADS must be a nonnegative integer, got '") + env + "'");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kernel spot covariance estimation, simulation and forecasting"};
    app.require_subcommand(1);
    Common c;
    auto* simulate = app.add_subcommand("simulate", "simulate Heston/Bates log-prices");
    auto* estimate = app.add_subcommand("estimate", "spot covariance path (and bands) from a prices CSV");
    auto* select = app.add_subcommand("select-bandwidth", "estimate with a cross-validated bandwidth");
    auto* mc = app.add_subcommand("mc-study", "Monte Carlo IMSE/ISB and standardized-error study");
    auto* forecast = app.add_subcommand("forecast", "VHAR forecasts from realized vs kernel covariance");
    for (auto* s : {simulate, estimate, select, mc, forecast}) add_common(s, c);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    namespace cli = spotcov::cli;
    try {
        spotcov::set_thread_count(resolve_threads(c.threads));
        const cli::fs::path config_path(c.config);
        const cli::Json config = cli::load_json(config_path);
        const cli::fs::path out(c.out);
        if (simulate->parsed()) return cli::run_simulate(config, out, c.seed, std::cout);
        if (estimate->parsed() || select->parsed()) {
            if (c.seed) std::cerr << "note: --seed has no effect on estimate\n";
            return cli::run_estimate(config, config_path.parent_path(), out, select->parsed(), std::cout);
        }
        if (mc->parsed()) return cli::run_mc_study(config, out, c.seed, std::cout);
        if (forecast->parsed()) return cli::run_forecast(config, out, c.seed, std::cout);
    } catch (const spotcov::io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const spotcov::invalid_state& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
