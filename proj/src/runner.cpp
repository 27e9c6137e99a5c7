#include "openinc/runner.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include "openinc/error.hpp"
#include "openinc/metrics.hpp"

namespace openinc {
namespace {

// Index ranges into parameters(Network&): encoder weights/biases first, then
// head (4 tensors), then classifier (2 tensors).
std::vector<std::size_t> trainable_indices(const Network& net, bool supcon) {
    const std::size_t enc = 2 * net.encoder.layers.size();
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < enc; ++i) {
        out.push_back(i);
    }
    if (supcon) {
        for (std::size_t i = enc; i < enc + 4; ++i) {
            out.push_back(i);
        }
    } else {
        out.push_back(enc + 4);
        out.push_back(enc + 5);
    }
    return out;
}

std::vector<std::vector<std::size_t>> make_batches(std::vector<std::size_t> order, std::size_t batch_size) {
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t end = std::min(order.size(), start + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    // A trailing single sample has no partner for any pairwise loss.
    if (batches.size() >= 2 && batches.back().size() < 2) {
        auto tail = std::move(batches.back());
        batches.pop_back();
        batches.back().insert(batches.back().end(), tail.begin(), tail.end());
    }
    return batches;
}

Tensor select_rows(const Tensor& t, const std::vector<std::size_t>& rows) {
    const std::size_t d = t.cols();
    std::vector<double> values;
    values.reserve(rows.size() * d);
    for (std::size_t r : rows) {
        const auto row = t.row(r);
        values.insert(values.end(), row.begin(), row.end());
    }
    return Tensor::matrix(rows.size(), d, std::move(values));
}

Tensor stack_rows(const Tensor& top, const Tensor& bottom) {
    if (bottom.rows() == 0 || bottom.size() == 0) {
        return top;
    }
    std::vector<double> values(top.values());
    values.insert(values.end(), bottom.values().begin(), bottom.values().end());
    return Tensor::matrix(top.rows() + bottom.rows(), top.cols(), std::move(values));
}

std::size_t argmax(std::span<const double> v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

std::string optional_number(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(Errc::io_error, "cannot write " + path.string());
    }
    out << text;
}

}  // namespace

std::string_view to_string(Method m) noexcept {
    switch (m) {
        case Method::supcon_rkd: return "supcon_rkd";
        case Method::ce_reskd: return "ce_reskd";
        case Method::ce_rkd: return "ce_rkd";
        case Method::supcon_joint: return "supcon_joint";
        case Method::ce_joint: return "ce_joint";
    }
    return "unknown";
}

std::optional<Method> parse_method(std::string_view name) noexcept {
    for (Method m : {Method::supcon_rkd, Method::ce_reskd, Method::ce_rkd, Method::supcon_joint, Method::ce_joint}) {
        if (to_string(m) == name) {
            return m;
        }
    }
    return std::nullopt;
}

bool is_joint(Method m) noexcept { return m == Method::supcon_joint || m == Method::ce_joint; }

bool uses_supcon(Method m) noexcept { return m == Method::supcon_rkd || m == Method::supcon_joint; }

void RunConfig::validate() const {
    loss.validate();
    osr.validate();
    if (!(learning_rate > 0.0) || !(classifier_lr > 0.0)) {
        throw Error(Errc::invalid_spec, "learning rates must be positive");
    }
    if (batch_size < 2 || classifier_batch_size == 0) {
        throw Error(Errc::invalid_spec, "batch_size must be >= 2 and classifier_batch_size >= 1");
    }
    if (memory == 0) {
        throw Error(Errc::memory_too_small, "memory must hold at least one exemplar");
    }
    if (dims.feature_dim == 0 || dims.proj_dim == 0) {
        throw Error(Errc::invalid_spec, "feature and projection widths must be positive");
    }
}

SessionArtifacts evaluate_session(const ModelState& state, const ExemplarStore& store,
                                  const std::vector<int>& observed, const std::vector<int>& outliers,
                                  const Dataset& data, const OsrConfig& cfg, int session) {
    SessionArtifacts out;
    SessionReport& report = out.report;
    report.session = session;
    report.classes = observed.size();

    const std::vector<std::size_t> in_rows = data.rows(Split::test, observed);
    const std::vector<std::size_t> out_rows = data.rows(Split::test, outliers);
    if (in_rows.empty()) {
        throw Error(Errc::empty_input, "no inlier test rows for the observed classes");
    }

    auto score_rows = [&](const std::vector<std::size_t>& rows, bool outlier_truth, std::vector<double>& sc,
                          std::vector<int>& predicted, Tensor& features) {
        if (rows.empty()) {
            return;
        }
        features = encode(state, data.gather(rows));
        const Tensor logits = classify(state, features);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            ScoreRecord rec;
            rec.sample_id = rows[i];
            rec.truth = outlier_truth ? -1 : data.labels[rows[i]];
            rec.class_similarity = knn_class_similarity(features.row(i), store, cfg.k_nn);
            rec.sc_osr = osr_score(rec.class_similarity).sc_osr;
            const int cls = observed.at(argmax(logits.row(i)));
            predicted.push_back(cls);
            rec.predicted = (cfg.threshold && rec.sc_osr < *cfg.threshold) ? -1 : cls;
            sc.push_back(rec.sc_osr);
            out.scores.push_back(std::move(rec));
        }
    };

    std::vector<double> in_scores;
    std::vector<double> out_scores;
    std::vector<int> in_pred;
    std::vector<int> out_pred;
    Tensor in_features;
    Tensor out_features;
    score_rows(in_rows, false, in_scores, in_pred, in_features);
    score_rows(out_rows, true, out_scores, out_pred, out_features);

    std::vector<int> truths;
    for (std::size_t r : in_rows) {
        truths.push_back(data.labels[r]);
    }
    report.accuracy = incremental_accuracy(in_pred, truths);
    if (!out_scores.empty()) {
        report.auroc = auroc(in_scores, out_scores);
    }
    report.s_intra = intra_spread(in_features, truths);
    if (observed.size() >= 2) {
        report.s_inter = inter_spread(class_centers(in_features, truths));
        if (*report.s_inter > 0.0) {
            report.r_s = rs_ratio(*report.s_intra, *report.s_inter);
        }
    }
    return out;
}

IncrementalRun::IncrementalRun(RunConfig cfg, const Dataset& data, SessionPlan plan)
    : cfg_(std::move(cfg)), data_(data), plan_(std::move(plan)), rng_(cfg_.seed), store_(cfg_.memory) {
    cfg_.validate();
    data_.require_complete_split();
    cfg_.dims.input_dim = data_.input_dim();
    for (const auto& session : plan_.sessions) {
        for (int c : session) {
            if (c < 0 || static_cast<std::size_t>(c) >= data_.num_classes) {
                throw Error(Errc::label_out_of_range, "session plan names unknown class " + std::to_string(c));
            }
        }
    }
    state_ = init_model(cfg_.dims, 0, rng_);
}

std::size_t IncrementalRun::column_of(int class_id) const {
    const auto it = std::find(observed_.begin(), observed_.end(), class_id);
    if (it == observed_.end()) {
        throw Error(Errc::label_out_of_range, "class " + std::to_string(class_id) + " is not observed");
    }
    return static_cast<std::size_t>(it - observed_.begin());
}

SessionArtifacts IncrementalRun::train_base_session() {
    if (next_ != 0) {
        throw Error(Errc::invalid_count, "base session already trained");
    }
    return run_session(plan_.sessions.at(0), false, cfg_.epochs_base);
}

SessionArtifacts IncrementalRun::train_incremental_session() {
    if (next_ == 0) {
        throw Error(Errc::invalid_count, "train the base session first");
    }
    if (!has_next_session()) {
        throw Error(Errc::invalid_count, "no inlier sessions left");
    }
    return run_session(plan_.sessions.at(next_), true, cfg_.epochs_incremental);
}

SessionArtifacts IncrementalRun::next_session() {
    return next_ == 0 ? train_base_session() : train_incremental_session();
}

SessionArtifacts IncrementalRun::run_session(const std::vector<int>& new_classes, bool incremental,
                                             std::size_t epochs) {
    const auto started = std::chrono::steady_clock::now();
    if (new_classes.empty()) {
        throw Error(Errc::empty_class, "session has no classes");
    }
    if (incremental) {
        snapshot_teacher(state_);
        ++teacher_snapshots_;
    }
    // CE methods need logits for the new classes during training, so the
    // classifier grows before the representation phase for every method.
    expand_classifier(state_, new_classes.size(), rng_);
    observed_.insert(observed_.end(), new_classes.begin(), new_classes.end());

    train_representation(data_.rows(Split::train, new_classes), incremental, epochs);

    std::map<int, NewClassData> fresh;
    for (int c : new_classes) {
        NewClassData d;
        d.source_rows = data_.rows(Split::train, {c});
        d.inputs = data_.gather(d.source_rows);
        d.features = encode(state_, d.inputs);
        fresh.emplace(c, std::move(d));
    }
    update_memory(store_, fresh, rng_);
    refresh_features(store_, state_);
    fit_classifier();

    const int session = static_cast<int>(next_);
    SessionArtifacts art =
        evaluate_session(state_, store_, observed_, plan_.outlier_classes(), data_, cfg_.osr, session);
    art.exemplar_csv = exemplar_csv(store_);
    art.model_json = model_to_json(state_, ModelMeta{cfg_.seed, session, data_.fingerprint});
    ++next_;

    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    art.report.wall_seconds = elapsed;
    art.report.seconds = cfg_.record_wall_time ? elapsed : 0.0;
    return art;
}

void IncrementalRun::train_representation(const std::vector<std::size_t>& rows, bool incremental,
                                          std::size_t epochs) {
    if (epochs == 0 || rows.size() < 2) {
        return;
    }
    const bool supcon = uses_supcon(cfg_.method);
    const bool distill = incremental && cfg_.loss.alpha < 1.0 && state_.teacher && !store_.empty();
    const bool response_kd = cfg_.method == Method::ce_reskd;

    const Tensor exemplar_inputs = store_.inputs();
    const std::vector<int> exemplar_labels = store_.labels();
    const std::size_t n_exemplars = exemplar_labels.size();

    // The teacher is frozen, so its outputs are computed once per session.
    Tensor teacher_exemplar_features;
    Tensor teacher_row_logits;
    Tensor teacher_exemplar_logits;
    std::vector<std::size_t> row_position(data_.size(), 0);
    std::size_t old_columns = 0;
    if (distill) {
        const Network& teacher = *state_.teacher;
        teacher_exemplar_features = encode(teacher, exemplar_inputs);
        if (response_kd) {
            old_columns = teacher.classifier.num_classes();
            teacher_row_logits = classify(teacher, encode(teacher, data_.gather(rows)));
            teacher_exemplar_logits = classify(teacher, teacher_exemplar_features);
            for (std::size_t i = 0; i < rows.size(); ++i) {
                row_position[rows[i]] = i;
            }
        }
    }

    // Selector keeping the first old_columns logits: (C_total x C_old) identity block.
    Tensor old_selector;
    if (response_kd && distill) {
        old_selector = Tensor(Shape{observed_.size(), old_columns}, 0.0);
        for (std::size_t c = 0; c < old_columns; ++c) {
            old_selector(c, c) = 1.0;
        }
    }

    std::vector<std::size_t> train_params = trainable_indices(state_.student, supcon);
    AdamOptimizer adam(cfg_.learning_rate);

    std::vector<std::size_t> all_exemplars(n_exemplars);
    std::iota(all_exemplars.begin(), all_exemplars.end(), std::size_t{0});

    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        std::vector<std::size_t> order = rows;
        std::shuffle(order.begin(), order.end(), rng_);
        for (const auto& batch : make_batches(std::move(order), cfg_.batch_size)) {
            std::vector<std::size_t> ex_batch;
            if (incremental && n_exemplars > 0) {
                if (n_exemplars <= cfg_.batch_size) {
                    ex_batch = all_exemplars;
                } else {
                    std::sample(all_exemplars.begin(), all_exemplars.end(), std::back_inserter(ex_batch),
                                cfg_.batch_size / 2, rng_);
                }
            }

            Tensor x = stack_rows(data_.gather(batch), select_rows(exemplar_inputs, ex_batch));
            std::vector<int> labels;
            for (std::size_t r : batch) {
                labels.push_back(data_.labels[r]);
            }
            for (std::size_t e : ex_batch) {
                labels.push_back(exemplar_labels[e]);
            }

            Tape tape;
            const BoundNetwork net = bind(tape, state_.student, true);
            Var z = encode(net, tape.constant(std::move(x)));
            Var logits;
            Var representation;
            if (supcon) {
                representation = supcon_loss(project(net, z), labels, cfg_.loss.tau).loss;
            } else {
                std::vector<std::size_t> targets;
                for (int l : labels) {
                    targets.push_back(column_of(l));
                }
                logits = classify(net, z);
                representation = ce_loss(logits, targets);
            }

            Var loss = representation;
            if (distill) {
                Var distillation;
                if (response_kd) {
                    std::vector<double> teacher_values;
                    for (std::size_t r : batch) {
                        const auto row = teacher_row_logits.row(row_position[r]);
                        teacher_values.insert(teacher_values.end(), row.begin(), row.end());
                    }
                    for (std::size_t e : ex_batch) {
                        const auto row = teacher_exemplar_logits.row(e);
                        teacher_values.insert(teacher_values.end(), row.begin(), row.end());
                    }
                    const Tensor teacher_logits =
                        Tensor::matrix(labels.size(), old_columns, std::move(teacher_values));
                    Var old_logits = matmul(logits, tape.constant(old_selector));
                    distillation = response_kd_loss(old_logits, teacher_logits, cfg_.loss.kd_temperature);
                } else if (ex_batch.size() >= 3) {
                    std::vector<std::size_t> positions(ex_batch.size());
                    std::iota(positions.begin(), positions.end(), batch.size());
                    Var student_ex = gather_rows(z, positions);
                    const Tensor teacher_ex = select_rows(teacher_exemplar_features, ex_batch);
                    const auto triplets = sample_triplets(ex_batch.size(), cfg_.triplet_cap, rng_);
                    const auto pairs = all_pairs(ex_batch.size());
                    distillation =
                        distill_loss(teacher_ex, student_ex, cfg_.loss.lambda_dis, triplets, pairs).loss;
                }
                if (distillation.valid()) {
                    loss = total_loss(representation, distillation, cfg_.loss.alpha);
                }
            }

            tape.backward(loss);
            const std::vector<Var> bound = net.params();
            std::vector<Tensor*> all = parameters(state_.student);
            std::vector<Tensor*> params;
            std::vector<Tensor> grads;
            for (std::size_t i : train_params) {
                params.push_back(all[i]);
                grads.push_back(tape.grad(bound[i]));
            }
            adam.step(params, grads);
        }
    }
}

void IncrementalRun::fit_classifier() {
    const Tensor features = store_.features();
    std::vector<std::size_t> targets;
    for (int l : store_.labels()) {
        targets.push_back(column_of(l));
    }
    if (targets.empty()) {
        return;
    }
    Linear& fc = state_.student.classifier.fc;
    const SgdOptimizer sgd(cfg_.classifier_lr);
    std::vector<std::size_t> order(targets.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t epoch = 0; epoch < cfg_.classifier_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng_);
        for (std::size_t start = 0; start < order.size(); start += cfg_.classifier_batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg_.classifier_batch_size);
            const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                               order.begin() + static_cast<std::ptrdiff_t>(end));
            std::vector<std::size_t> batch_targets;
            for (std::size_t i : idx) {
                batch_targets.push_back(targets[i]);
            }
            Tape tape;
            const BoundLinear layer{tape.leaf(fc.weight), tape.leaf(fc.bias)};
            Var logits = apply_linear(layer, tape.constant(select_rows(features, idx)));
            tape.backward(ce_loss(logits, batch_targets));
            sgd.step({&fc.weight, &fc.bias}, {tape.grad(layer.weight), tape.grad(layer.bias)});
        }
    }
}

SessionFailure::SessionFailure(std::size_t session, const Error& cause)
    : std::runtime_error("session " + std::to_string(session) + ": " + cause.what()),
      session_(session),
      code_(cause.code()) {}

RunResult run_incremental(const RunConfig& cfg, const Dataset& data, const SessionPlan& plan) {
    RunResult result;
    std::size_t session = 0;
    try {
        IncrementalRun run(cfg, data, plan);
        while (run.has_next_session()) {
            session = run.sessions_done();
            result.sessions.push_back(run.next_session());
        }
    } catch (const Error& e) {
        throw SessionFailure(session, e);
    }
    return result;
}

RunResult run_joint(const RunConfig& cfg, const Dataset& data, const SessionPlan& plan) {
    SessionPlan joint;
    joint.sessions = {plan.inlier_classes(), plan.outlier_classes()};
    joint.outlier_session = 1;
    RunResult result;
    try {
        IncrementalRun run(cfg, data, joint);
        result.sessions.push_back(run.train_base_session());
    } catch (const Error& e) {
        throw SessionFailure(0, e);
    }
    return result;
}

RunResult run_method(const RunConfig& cfg, const Dataset& data, const SessionPlan& plan) {
    return is_joint(cfg.method) ? run_joint(cfg, data, plan) : run_incremental(cfg, data, plan);
}

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string results_csv(const std::vector<SessionReport>& reports) {
    std::ostringstream out;
    out << "session,classes,accuracy,auroc,s_intra,s_inter,r_s,seconds\n";
    for (const SessionReport& r : reports) {
        out << r.session << ',' << r.classes << ',' << format_number(r.accuracy) << ',' << optional_number(r.auroc)
            << ',' << optional_number(r.s_intra) << ',' << optional_number(r.s_inter) << ','
            << optional_number(r.r_s) << ',' << format_number(r.seconds) << '\n';
    }
    return out.str();
}

std::string scores_csv(const std::vector<ScoreRecord>& scores) {
    std::ostringstream out;
    out << "sample_id,truth,sc_osr,predicted\n";
    for (const ScoreRecord& s : scores) {
        out << s.sample_id << ',' << (s.is_outlier_truth() ? std::string("outlier") : std::to_string(s.truth)) << ','
            << format_number(s.sc_osr) << ','
            << (s.predicted < 0 ? std::string("outlier") : std::to_string(s.predicted)) << '\n';
    }
    return out.str();
}

void write_run(const std::filesystem::path& dir, const RunResult& result) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw Error(Errc::io_error, "cannot create " + dir.string() + ": " + ec.message());
    }
    std::vector<SessionReport> reports;
    for (const SessionArtifacts& s : result.sessions) {
        reports.push_back(s.report);
        const std::string tag = std::to_string(s.report.session);
        write_file(dir / ("scores_" + tag + ".csv"), scores_csv(s.scores));
        write_file(dir / ("exemplars_" + tag + ".csv"), s.exemplar_csv);
        write_file(dir / ("model_" + tag + ".json"), s.model_json);
    }
    write_file(dir / "results.csv", results_csv(reports));
}

}  // namespace openinc
