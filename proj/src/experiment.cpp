#include "openinc/experiment.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "openinc/error.hpp"

namespace openinc {
namespace {

using json = nlohmann::json;

std::uint64_t as_uint(const json& v, const std::string& key) {
    if (v.is_number_unsigned()) {
        return v.get<std::uint64_t>();
    }
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
        return static_cast<std::uint64_t>(v.get<std::int64_t>());
    }
    throw ValidationError(key, "expected a non-negative integer");
}

std::size_t as_size(const json& v, const std::string& key, std::size_t min = 0) {
    const std::uint64_t n = as_uint(v, key);
    if (n < min) {
        throw ValidationError(key, "must be >= " + std::to_string(min));
    }
    return static_cast<std::size_t>(n);
}

double as_double(const json& v, const std::string& key) {
    if (!v.is_number()) {
        throw ValidationError(key, "expected a number");
    }
    const double d = v.get<double>();
    if (!std::isfinite(d)) {
        throw ValidationError(key, "must be finite");
    }
    return d;
}

double as_positive(const json& v, const std::string& key) {
    const double d = as_double(v, key);
    if (!(d > 0.0)) {
        throw ValidationError(key, "must be positive");
    }
    return d;
}

std::string as_string(const json& v, const std::string& key) {
    if (!v.is_string()) {
        throw ValidationError(key, "expected a string");
    }
    return v.get<std::string>();
}

const json& as_object(const json& v, const std::string& key) {
    if (!v.is_object()) {
        throw ValidationError(key, "expected an object");
    }
    return v;
}

/// Applies one run parameter; false when `key` is not a run parameter.
bool apply_run_param(RunConfig& rc, const std::string& key, const json& v) {
    if (key == "epochs_base") {
        rc.epochs_base = as_size(v, key);
    } else if (key == "epochs_incremental") {
        rc.epochs_incremental = as_size(v, key);
    } else if (key == "learning_rate") {
        rc.learning_rate = as_positive(v, key);
    } else if (key == "batch_size") {
        rc.batch_size = as_size(v, key, 2);
    } else if (key == "memory") {
        rc.memory = as_size(v, key, 1);
    } else if (key == "alpha") {
        const double a = as_double(v, key);
        if (a < 0.0 || a > 1.0) {
            throw ValidationError(key, "must lie in [0, 1]");
        }
        rc.loss.alpha = a;
    } else if (key == "lambda_dis") {
        const double l = as_double(v, key);
        if (l < 0.0) {
            throw ValidationError(key, "must be non-negative");
        }
        rc.loss.lambda_dis = l;
    } else if (key == "tau") {
        rc.loss.tau = as_positive(v, key);
    } else if (key == "kd_temperature") {
        rc.loss.kd_temperature = as_positive(v, key);
    } else if (key == "k_nn") {
        rc.osr.k_nn = as_size(v, key, 1);
    } else if (key == "threshold") {
        rc.osr.threshold = v.is_null() ? std::nullopt : std::optional<double>(as_double(v, key));
    } else if (key == "classifier_lr") {
        rc.classifier_lr = as_positive(v, key);
    } else if (key == "classifier_epochs") {
        rc.classifier_epochs = as_size(v, key);
    } else if (key == "classifier_batch_size") {
        rc.classifier_batch_size = as_size(v, key, 1);
    } else if (key == "triplet_cap") {
        rc.triplet_cap = as_size(v, key, 1);
    } else if (key == "hidden_dims") {
        if (!v.is_array()) {
            throw ValidationError(key, "expected an array of widths");
        }
        rc.dims.hidden_dims.clear();
        for (const json& w : v) {
            rc.dims.hidden_dims.push_back(as_size(w, key, 1));
        }
    } else if (key == "feature_dim") {
        rc.dims.feature_dim = as_size(v, key, 1);
    } else if (key == "proj_dim") {
        rc.dims.proj_dim = as_size(v, key, 1);
    } else if (key == "record_wall_time") {
        if (!v.is_boolean()) {
            throw ValidationError(key, "expected a boolean");
        }
        rc.record_wall_time = v.get<bool>();
    } else {
        return false;
    }
    return true;
}

BlobSpec parse_blobs(const json& obj) {
    BlobSpec spec;
    for (const auto& [key, v] : as_object(obj, "blobs").items()) {
        if (key == "num_classes") {
            spec.num_classes = as_size(v, key, 2);
        } else if (key == "samples_per_class") {
            spec.samples_per_class = as_size(v, key, 2);
        } else if (key == "input_dim") {
            spec.input_dim = as_size(v, key, 1);
        } else if (key == "center_radius") {
            spec.center_radius = as_double(v, key);
            if (spec.center_radius < 0.0) {
                throw ValidationError(key, "must be non-negative");
            }
        } else if (key == "sigma") {
            spec.sigma = as_positive(v, key);
        } else if (key == "seed") {
            spec.seed = as_uint(v, key);
        } else {
            throw ValidationError(key, "unknown key in dataset.blobs");
        }
    }
    return spec;
}

std::variant<BlobSpec, CsvSource> parse_dataset(const json& v) {
    if (v.is_string()) {
        if (v.get<std::string>() != "default") {
            throw ValidationError("dataset", "expected \"default\", {\"blobs\": ...} or {\"csv\": ...}");
        }
        return BlobSpec{};
    }
    const json& obj = as_object(v, "dataset");
    if (obj.contains("blobs") && obj.contains("csv")) {
        throw ValidationError("dataset", "give either blobs or csv");
    }
    if (obj.contains("csv")) {
        CsvSource src;
        for (const auto& [key, item] : obj.items()) {
            if (key == "csv") {
                src.path = as_string(item, key);
            } else if (key == "split_seed") {
                src.split_seed = as_uint(item, key);
            } else {
                throw ValidationError(key, "unknown key in dataset");
            }
        }
        return src;
    }
    for (const auto& [key, item] : obj.items()) {
        if (key != "blobs") {
            throw ValidationError(key, "unknown key in dataset");
        }
    }
    return obj.contains("blobs") ? parse_blobs(obj.at("blobs")) : BlobSpec{};
}

SessionSpec parse_sessions(const json& v) {
    SessionSpec spec;
    for (const auto& [key, item] : as_object(v, "sessions").items()) {
        if (key == "classes_per_session") {
            spec.classes_per_session = as_size(item, key, 1);
        } else if (key == "num_outlier_classes") {
            spec.num_outlier_classes = as_size(item, key, 1);
        } else if (key == "seed") {
            spec.seed = as_uint(item, key);
        } else {
            throw ValidationError(key, "unknown key in sessions");
        }
    }
    return spec;
}

Method method_named(const json& v) {
    const std::string name = as_string(v, "methods");
    const auto m = parse_method(name);
    if (!m) {
        throw ValidationError("methods", "unknown method '" + name + "'");
    }
    return *m;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(Errc::io_error, "cannot read " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') {
        cells.emplace_back();
    }
    return cells;
}

std::optional<double> parse_cell(const std::string& cell) {
    if (cell.empty()) {
        return std::nullopt;
    }
    double v = 0.0;
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc()) {
        return std::nullopt;
    }
    return v;
}

struct FinalRow {
    std::optional<double> accuracy;
    std::optional<double> auroc;
    std::optional<double> r_s;
};

std::optional<FinalRow> read_final_row(const std::filesystem::path& results) {
    if (!std::filesystem::exists(results)) {
        return std::nullopt;
    }
    std::istringstream in(read_text(results));
    std::string line;
    std::string last;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (!line.empty()) {
            last = line;
        }
    }
    if (last.empty()) {
        return std::nullopt;
    }
    const auto cells = split_line(last);
    if (cells.size() < 8) {
        return std::nullopt;
    }
    return FinalRow{parse_cell(cells[2]), parse_cell(cells[3]), parse_cell(cells[6])};
}

void append_stats(std::ostringstream& out, const std::vector<double>& xs) {
    if (xs.empty()) {
        out << ",,";
        return;
    }
    double mean = 0.0;
    for (double x : xs) {
        mean += x;
    }
    mean /= static_cast<double>(xs.size());
    out << ',' << format_number(mean) << ',';
    if (xs.size() >= 2) {
        double ss = 0.0;
        for (double x : xs) {
            ss += (x - mean) * (x - mean);
        }
        out << format_number(std::sqrt(ss / static_cast<double>(xs.size() - 1)));
    }
}

std::size_t thread_count(std::size_t requested) {
    if (requested > 0) {
        return requested;
    }
    if (const char* env = std::getenv("OPENINC_THREADS")) {
        std::size_t n = 0;
        const std::string_view s(env);
        const auto res = std::from_chars(s.data(), s.data() + s.size(), n);
        if (res.ec == std::errc() && n > 0) {
            return n;
        }
    }
    return 1;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ValidationError("", std::string("config is not valid JSON: ") + e.what());
    }
    const json& root = as_object(doc, "config");

    ExperimentConfig cfg;
    cfg.dataset = BlobSpec{};
    RunConfig defaults;
    for (const auto& [key, v] : root.items()) {
        if (key == "dataset") {
            cfg.dataset = parse_dataset(v);
        } else if (key == "sessions") {
            cfg.sessions = parse_sessions(v);
        } else if (key == "seeds") {
            if (!v.is_array() || v.empty()) {
                throw ValidationError(key, "expected a non-empty array of seeds");
            }
            for (const json& s : v) {
                cfg.seeds.push_back(as_uint(s, key));
            }
        } else if (key == "output_dir") {
            cfg.output_dir = as_string(v, key);
        } else if (key == "methods") {
            continue;
        } else if (!apply_run_param(defaults, key, v)) {
            throw ValidationError(key, "unknown key");
        }
    }
    if (!root.contains("methods")) {
        throw ValidationError("methods", "missing");
    }
    if (cfg.seeds.empty()) {
        throw ValidationError("seeds", "missing");
    }

    const json& methods = root.at("methods");
    if (!methods.is_array() || methods.empty()) {
        throw ValidationError("methods", "expected a non-empty array");
    }
    std::set<Method> seen;
    for (const json& entry : methods) {
        MethodEntry me;
        me.config = defaults;
        if (entry.is_string()) {
            me.method = method_named(entry);
        } else {
            const json& obj = as_object(entry, "methods");
            if (!obj.contains("name")) {
                throw ValidationError("name", "method entry needs a name");
            }
            me.method = method_named(obj.at("name"));
            for (const auto& [key, v] : obj.items()) {
                if (key != "name" && !apply_run_param(me.config, key, v)) {
                    throw ValidationError(key, "unknown key in method entry");
                }
            }
        }
        if (!seen.insert(me.method).second) {
            throw ValidationError("methods", "duplicate method '" + std::string(to_string(me.method)) + "'");
        }
        me.config.method = me.method;
        try {
            me.config.validate();
        } catch (const Error& e) {
            throw ValidationError("methods", std::string(to_string(me.method)) + ": " + e.what());
        }
        cfg.methods.push_back(std::move(me));
    }
    return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
    if (!std::filesystem::exists(path)) {
        throw Error(Errc::file_not_found, path);
    }
    return parse_config_text(read_text(path));
}

Dataset load_dataset(const ExperimentConfig& cfg) {
    if (const auto* blobs = std::get_if<BlobSpec>(&cfg.dataset)) {
        return generate_blobs(*blobs);
    }
    const auto& csv = std::get<CsvSource>(cfg.dataset);
    return load_csv(csv.path, csv.split_seed);
}

SessionPlan make_plan(const ExperimentConfig& cfg, const Dataset& data, std::uint64_t run_seed) {
    return plan_sessions(data.num_classes, cfg.sessions.classes_per_session, cfg.sessions.num_outlier_classes,
                         cfg.sessions.seed.value_or(run_seed));
}

std::filesystem::path run_directory(const std::filesystem::path& output_dir, Method method, std::uint64_t seed) {
    return output_dir / std::string(to_string(method)) / ("seed_" + std::to_string(seed));
}

std::string summary_csv(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "method,runs,accuracy_mean,accuracy_std,auroc_mean,auroc_std,r_s_mean,r_s_std\n";
    for (const MethodEntry& me : cfg.methods) {
        std::vector<double> acc;
        std::vector<double> au;
        std::vector<double> rs;
        std::size_t runs = 0;
        for (std::uint64_t seed : cfg.seeds) {
            const auto row = read_final_row(run_directory(cfg.output_dir, me.method, seed) / "results.csv");
            if (!row) {
                continue;
            }
            ++runs;
            if (row->accuracy) {
                acc.push_back(*row->accuracy);
            }
            if (row->auroc) {
                au.push_back(*row->auroc);
            }
            if (row->r_s) {
                rs.push_back(*row->r_s);
            }
        }
        out << to_string(me.method) << ',' << runs;
        append_stats(out, acc);
        append_stats(out, au);
        append_stats(out, rs);
        out << '\n';
    }
    return out.str();
}

int run_experiment(const ExperimentConfig& cfg, std::ostream& log, const ExperimentOptions& opts) {
    std::mutex log_mutex;
    auto say = [&](const std::string& msg) {
        const std::lock_guard lock(log_mutex);
        log << msg << '\n';
    };

    Dataset data;
    try {
        data = load_dataset(cfg);
        std::filesystem::create_directories(cfg.output_dir);
    } catch (const std::exception& e) {
        say(std::string("error: ") + e.what());
        return 1;
    }

    struct Job {
        const MethodEntry* entry;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (const MethodEntry& me : cfg.methods) {
        for (std::uint64_t seed : cfg.seeds) {
            jobs.push_back({&me, seed});
        }
    }

    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> failures{0};
    auto worker = [&] {
        for (std::size_t j = next++; j < jobs.size(); j = next++) {
            const Job& job = jobs[j];
            const std::string tag = std::string(to_string(job.entry->method)) + " seed " + std::to_string(job.seed);
            try {
                RunConfig rc = job.entry->config;
                rc.seed = job.seed;
                const RunResult result = run_method(rc, data, make_plan(cfg, data, job.seed));
                write_run(run_directory(cfg.output_dir, job.entry->method, job.seed), result);
                if (!opts.quiet) {
                    const SessionReport& last = result.sessions.back().report;
                    std::ostringstream msg;
                    msg << tag << ": " << result.sessions.size() << " session(s), final accuracy "
                        << format_number(last.accuracy);
                    if (last.auroc) {
                        msg << ", auroc " << format_number(*last.auroc);
                    }
                    say(msg.str());
                }
            } catch (const std::exception& e) {
                ++failures;
                say("error: " + tag + ": " + e.what());
            }
        }
    };

    const std::size_t n_threads = std::min(thread_count(opts.threads), jobs.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) {
        pool.emplace_back(worker);
    }
    worker();
    for (auto& t : pool) {
        t.join();
    }

    try {
        std::ofstream out(cfg.output_dir / "summary.csv", std::ios::binary | std::ios::trunc);
        out << summary_csv(cfg);
        if (!out) {
            throw Error(Errc::io_error, "cannot write summary.csv");
        }
    } catch (const std::exception& e) {
        say(std::string("error: ") + e.what());
        return 1;
    }
    return failures == 0 ? 0 : 1;
}

}  // namespace openinc
