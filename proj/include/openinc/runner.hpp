#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "openinc/data.hpp"
#include "openinc/error.hpp"
#include "openinc/exemplar.hpp"
#include "openinc/losses.hpp"
#include "openinc/model.hpp"
#include "openinc/osr.hpp"

namespace openinc {

enum class Method { supcon_rkd, ce_reskd, ce_rkd, supcon_joint, ce_joint };

std::string_view to_string(Method m) noexcept;
std::optional<Method> parse_method(std::string_view name) noexcept;
bool is_joint(Method m) noexcept;
bool uses_supcon(Method m) noexcept;

struct RunConfig {
    Method method = Method::supcon_rkd;
    std::size_t epochs_base = 100;
    std::size_t epochs_incremental = 200;
    double learning_rate = 1e-3;
    std::size_t batch_size = 64;
    std::size_t memory = 40;
    LossConfig loss;
    OsrConfig osr;
    /// input_dim is taken from the dataset at run time.
    ModelDims dims;
    double classifier_lr = 0.01;
    std::size_t classifier_epochs = 50;
    std::size_t classifier_batch_size = 8;
    std::size_t triplet_cap = 5000;
    std::uint64_t seed = 1;
    /// Write measured wall time into results.csv (breaks byte-for-byte reruns).
    bool record_wall_time = false;

    void validate() const;
};

struct SessionReport {
    int session = 0;
    std::size_t classes = 0;
    double accuracy = 0.0;
    std::optional<double> auroc;
    std::optional<double> s_intra;
    std::optional<double> s_inter;
    std::optional<double> r_s;
    double seconds = 0.0;  ///< as written to results.csv
    double wall_seconds = 0.0;  ///< always measured
};

struct SessionArtifacts {
    SessionReport report;
    std::vector<ScoreRecord> scores;
    std::string exemplar_csv;
    std::string model_json;
};

/// Scores every test row of `observed` (inliers) and `outliers` against the
/// store and the neural classifier, and fills the session metrics.
SessionArtifacts evaluate_session(const ModelState& state, const ExemplarStore& store,
                                  const std::vector<int>& observed, const std::vector<int>& outliers,
                                  const Dataset& data, const OsrConfig& cfg, int session);

/// Class-incremental protocol over a session plan, one session at a time.
class IncrementalRun {
public:
    IncrementalRun(RunConfig cfg, const Dataset& data, SessionPlan plan);

    /// Session 0: representation training without distillation, exemplar
    /// selection, classifier fit on exemplars, evaluation.
    SessionArtifacts train_base_session();
    /// Next session: teacher snapshot, distillation objective, memory update,
    /// classifier refit, evaluation.
    SessionArtifacts train_incremental_session();
    /// Runs whichever of the two is due.
    SessionArtifacts next_session();

    bool has_next_session() const noexcept { return next_ < plan_.num_inlier_sessions(); }
    std::size_t sessions_done() const noexcept { return next_; }
    std::size_t teacher_snapshots() const noexcept { return teacher_snapshots_; }

    const ModelState& state() const noexcept { return state_; }
    const ExemplarStore& store() const noexcept { return store_; }
    /// Class id for each classifier output, in column order.
    const std::vector<int>& observed_classes() const noexcept { return observed_; }
    const RunConfig& config() const noexcept { return cfg_; }

private:
    SessionArtifacts run_session(const std::vector<int>& new_classes, bool incremental, std::size_t epochs);
    void train_representation(const std::vector<std::size_t>& rows, bool incremental, std::size_t epochs);
    void fit_classifier();
    std::size_t column_of(int class_id) const;

    RunConfig cfg_;
    const Dataset& data_;
    SessionPlan plan_;
    Rng rng_;
    ModelState state_;
    ExemplarStore store_;
    std::vector<int> observed_;
    std::size_t next_ = 0;
    std::size_t teacher_snapshots_ = 0;
};

/// A module error raised while running a session, tagged with the session index.
class SessionFailure : public std::runtime_error {
public:
    SessionFailure(std::size_t session, const Error& cause);
    std::size_t session() const noexcept { return session_; }
    Errc code() const noexcept { return code_; }

private:
    std::size_t session_;
    Errc code_;
};

struct RunResult {
    std::vector<SessionArtifacts> sessions;
};

/// Incremental methods walk every inlier session; joint methods train once on
/// all inlier classes and yield a single report. Module errors surface as SessionFailure.
RunResult run_method(const RunConfig& cfg, const Dataset& data, const SessionPlan& plan);
RunResult run_incremental(const RunConfig& cfg, const Dataset& data, const SessionPlan& plan);
RunResult run_joint(const RunConfig& cfg, const Dataset& data, const SessionPlan& plan);

/// Shortest round-trip decimal form.
std::string format_number(double v);

std::string results_csv(const std::vector<SessionReport>& reports);
std::string scores_csv(const std::vector<ScoreRecord>& scores);

/// Writes results.csv, scores_<s>.csv, exemplars_<s>.csv and model_<s>.json.
void write_run(const std::filesystem::path& dir, const RunResult& result);

}  // namespace openinc
