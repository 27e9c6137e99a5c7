#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "openinc/data.hpp"
#include "openinc/runner.hpp"

namespace openinc {

struct CsvSource {
    std::string path;
    std::uint64_t split_seed = 0;
};

struct SessionSpec {
    std::size_t classes_per_session = 2;
    std::size_t num_outlier_classes = 2;
    /// Class-order shuffle seed; the run seed is used when unset.
    std::optional<std::uint64_t> seed;
};

struct MethodEntry {
    Method method = Method::supcon_rkd;
    /// Fully resolved; the seed field is overwritten per run.
    RunConfig config;
};

struct ExperimentConfig {
    std::variant<BlobSpec, CsvSource> dataset;
    SessionSpec sessions;
    std::vector<MethodEntry> methods;
    std::vector<std::uint64_t> seeds;
    std::filesystem::path output_dir = "results";
};

/// Keys: dataset ("default", {"blobs": {...}} or {"csv": path, "split_seed": n}),
/// sessions, methods (names or {"name": ..., overrides}), seeds, output_dir, and
/// any run parameter as a default for every method.
/// Throws FileNotFound or ValidationError naming the offending key.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& json_text);

Dataset load_dataset(const ExperimentConfig& cfg);
SessionPlan make_plan(const ExperimentConfig& cfg, const Dataset& data, std::uint64_t run_seed);

/// output_dir/<method>/seed_<s>
std::filesystem::path run_directory(const std::filesystem::path& output_dir, Method method, std::uint64_t seed);

/// Per method: runs, then mean and sample std of the final-session accuracy,
/// auroc and r_s, read back from each run's results.csv.
std::string summary_csv(const ExperimentConfig& cfg);

struct ExperimentOptions {
    bool quiet = false;
    /// Worker count; 0 reads OPENINC_THREADS (default 1).
    std::size_t threads = 0;
};

/// Runs every (method, seed) pair, writes the results tree and summary.csv.
/// Returns 0 when all runs complete; failures are reported on `log`.
int run_experiment(const ExperimentConfig& cfg, std::ostream& log, const ExperimentOptions& opts = {});

}  // namespace openinc
