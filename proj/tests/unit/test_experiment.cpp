#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "openinc/experiment.hpp"
#include "support.hpp"

using namespace openinc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("openinc_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string tiny_config(const fs::path& out, const std::string& extra = "") {
    return R"({"dataset": {"blobs": {"num_classes": 6, "samples_per_class": 20, "input_dim": 5, "seed": 2}},
              "methods": ["supcon_rkd", {"name": "ce_reskd", "alpha": 0.5}],
              "seeds": [1, 2, 3],
              "epochs_base": 2, "epochs_incremental": 2, "batch_size": 16, "memory": 8,
              "classifier_epochs": 3, "hidden_dims": [8], "feature_dim": 4, "proj_dim": 3,
              "output_dir": ")" +
           out.string() + "\"" + extra + "}";
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::map<std::string, std::string> snapshot_tree(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (entry.is_regular_file()) {
            files[fs::relative(entry.path(), root).string()] = read_file(entry.path());
        }
    }
    return files;
}

std::string key_of(const std::string& json) {
    try {
        parse_config_text(json);
    } catch (const ValidationError& e) {
        return e.key();
    }
    return "<accepted>";
}

}  // namespace

TEST(Config, MinimalIsFilledWithDefaults) {
    const ExperimentConfig cfg = parse_config_text(R"({"dataset": "default", "methods": ["supcon_rkd"], "seeds": [1]})");
    ASSERT_EQ(cfg.methods.size(), 1u);
    const RunConfig& rc = cfg.methods[0].config;
    EXPECT_EQ(rc.method, Method::supcon_rkd);
    EXPECT_EQ(rc.loss.alpha, 0.2);
    EXPECT_EQ(rc.loss.lambda_dis, 0.5);
    EXPECT_EQ(rc.loss.tau, 0.05);
    EXPECT_EQ(rc.osr.k_nn, 10u);
    EXPECT_EQ(rc.learning_rate, 1e-3);
    EXPECT_EQ(rc.epochs_base, 100u);
    EXPECT_EQ(rc.epochs_incremental, 200u);
    EXPECT_EQ(rc.memory, 40u);
    EXPECT_FALSE(rc.osr.threshold.has_value());
    EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{1}));
    const auto* blobs = std::get_if<BlobSpec>(&cfg.dataset);
    ASSERT_NE(blobs, nullptr);
    EXPECT_EQ(blobs->num_classes, 10u);
    EXPECT_EQ(blobs->samples_per_class, 200u);
    EXPECT_EQ(cfg.sessions.classes_per_session, 2u);
    EXPECT_EQ(cfg.sessions.num_outlier_classes, 2u);
}

TEST(Config, OverridesLayer) {
    const ExperimentConfig cfg = parse_config_text(
        R"({"dataset": {"csv": "x.csv", "split_seed": 4}, "alpha": 0.4, "seeds": [3, 4],
            "methods": ["ce_rkd", {"name": "supcon_rkd", "alpha": 0.9, "threshold": 0.6}],
            "sessions": {"classes_per_session": 4, "num_outlier_classes": 1, "seed": 9}})");
    EXPECT_EQ(cfg.methods[0].config.loss.alpha, 0.4);
    EXPECT_EQ(cfg.methods[1].config.loss.alpha, 0.9);
    EXPECT_EQ(cfg.methods[1].config.osr.threshold, 0.6);
    EXPECT_EQ(std::get<CsvSource>(cfg.dataset).path, "x.csv");
    EXPECT_EQ(std::get<CsvSource>(cfg.dataset).split_seed, 4u);
    EXPECT_EQ(cfg.sessions.seed, 9u);
}

TEST(Config, Rejections) {
    const std::string base = R"("dataset": "default", "methods": ["supcon_rkd"], "seeds": [1])";
    EXPECT_EQ(key_of("{" + base + R"(, "alpha_kd": 0.3})"), "alpha_kd");
    EXPECT_EQ(key_of("{" + base + R"(, "alpha": 1.5})"), "alpha");
    EXPECT_EQ(key_of("{" + base + R"(, "tau": 0})"), "tau");
    EXPECT_EQ(key_of("{" + base + R"(, "epochs_base": -1})"), "epochs_base");
    EXPECT_EQ(key_of("{" + base + R"(, "batch_size": 1})"), "batch_size");
    EXPECT_EQ(key_of(R"({"dataset": "default", "methods": ["icarl"], "seeds": [1]})"), "methods");
    EXPECT_EQ(key_of(R"({"dataset": "default", "methods": ["ce_rkd", "ce_rkd"], "seeds": [1]})"), "methods");
    EXPECT_EQ(key_of(R"({"dataset": "default", "methods": ["ce_rkd"], "seeds": []})"), "seeds");
    EXPECT_EQ(key_of(R"({"dataset": "default", "methods": ["ce_rkd"]})"), "seeds");
    EXPECT_EQ(key_of(R"({"dataset": {"blobs": {"sigmaa": 1}}, "methods": ["ce_rkd"], "seeds": [1]})"), "sigmaa");
    EXPECT_EQ(key_of(R"({"dataset": "default", "methods": [{"name": "ce_rkd", "k": 3}], "seeds": [1]})"), "k");
    EXPECT_EQ(key_of("{" + base + R"(, "sessions": {"classes": 2}})"), "classes");
    EXPECT_ERRC(parse_config("/nonexistent/config.json"), Errc::file_not_found);
}

TEST(Experiment, TreeSummaryAndDeterminism) {
    const fs::path out = scratch("tree");
    const ExperimentConfig cfg = parse_config_text(tiny_config(out));
    std::ostringstream log;
    ASSERT_EQ(run_experiment(cfg, log, {true, 1}), 0) << log.str();

    std::size_t run_dirs = 0;
    for (const auto& method : {"supcon_rkd", "ce_reskd"}) {
        for (int seed : {1, 2, 3}) {
            const fs::path dir = out / method / ("seed_" + std::to_string(seed));
            ASSERT_TRUE(fs::exists(dir / "results.csv")) << dir;
            EXPECT_TRUE(fs::exists(dir / "scores_0.csv"));
            EXPECT_TRUE(fs::exists(dir / "exemplars_1.csv"));
            EXPECT_TRUE(fs::exists(dir / "model_1.json"));
            ++run_dirs;
        }
    }
    EXPECT_EQ(run_dirs, 6u);

    const std::string summary = read_file(out / "summary.csv");
    std::istringstream lines(summary);
    std::string line;
    std::vector<std::string> rows;
    while (std::getline(lines, line)) {
        rows.push_back(line);
    }
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0], "method,runs,accuracy_mean,accuracy_std,auroc_mean,auroc_std,r_s_mean,r_s_std");

    // Hand-average of the final accuracies.
    double total = 0.0;
    for (int seed : {1, 2, 3}) {
        std::istringstream res(read_file(out / "supcon_rkd" / ("seed_" + std::to_string(seed)) / "results.csv"));
        std::string last;
        while (std::getline(res, line)) {
            last = line;
        }
        std::stringstream cells(last);
        std::string cell;
        for (int c = 0; c < 3; ++c) {
            std::getline(cells, cell, ',');
        }
        total += std::stod(cell);
    }
    std::stringstream srow(rows[1]);
    std::string cell;
    std::getline(srow, cell, ',');
    EXPECT_EQ(cell, "supcon_rkd");
    std::getline(srow, cell, ',');
    EXPECT_EQ(cell, "3");
    std::getline(srow, cell, ',');
    EXPECT_NEAR(std::stod(cell), total / 3.0, 1e-12);

    const auto first = snapshot_tree(out);
    ASSERT_EQ(run_experiment(cfg, log, {true, 3}), 0) << log.str();
    EXPECT_EQ(snapshot_tree(out), first);
    fs::remove_all(out);
}

TEST(Experiment, FailureNamesMethodSeedSession) {
    const fs::path out = scratch("fail");
    ExperimentConfig cfg = parse_config_text(tiny_config(out, R"(, "memory": 3)"));
    cfg.seeds = {5};
    std::ostringstream log;
    EXPECT_NE(run_experiment(cfg, log, {true, 1}), 0);
    const std::string msg = log.str();
    EXPECT_NE(msg.find("supcon_rkd"), std::string::npos) << msg;
    EXPECT_NE(msg.find("seed 5"), std::string::npos) << msg;
    EXPECT_NE(msg.find("session 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("MemoryTooSmall"), std::string::npos) << msg;
    fs::remove_all(out);
}

TEST(Experiment, MissingCsvFails) {
    const fs::path out = scratch("csv");
    ExperimentConfig cfg = parse_config_text(tiny_config(out));
    cfg.dataset = CsvSource{"/nonexistent/data.csv", 0};
    std::ostringstream log;
    EXPECT_NE(run_experiment(cfg, log, {true, 1}), 0);
    EXPECT_NE(log.str().find("FileNotFound"), std::string::npos);
    fs::remove_all(out);
}
