#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "openinc/error.hpp"
#include "openinc/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Class-incremental open-set recognition experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::string> output_dir;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
    bool timing = false;
    std::size_t threads = 0;

    CLI::App* run = app.add_subcommand("run", "Run every method and seed listed in a JSON config");
    run->add_option("config", config_path, "Experiment config (JSON)")->required();
    run->add_option("--output-dir", output_dir, "Override output_dir from the config");
    run->add_option("--seed", seed, "Run this single seed instead of the config's list");
    run->add_option("--threads", threads, "Parallel runs (default: OPENINC_THREADS or 1)");
    run->add_flag("--quiet,-q", quiet, "Only print errors");
    run->add_flag("--timing", timing, "Write measured wall time to the seconds column");

    CLI11_PARSE(app, argc, argv);

    try {
        openinc::ExperimentConfig cfg = openinc::parse_config(config_path);
        if (output_dir) {
            cfg.output_dir = *output_dir;
        }
        if (seed) {
            cfg.seeds = {*seed};
        }
        if (timing) {
            for (auto& m : cfg.methods) {
                m.config.record_wall_time = true;
            }
        }
        return openinc::run_experiment(cfg, std::cerr, {quiet, threads});
    } catch (const openinc::ValidationError& e) {
        std::cerr << "config error (" << e.key() << "): " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
