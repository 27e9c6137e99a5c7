#include "openinc/losses.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <map>
#include <numeric>
#include <string>

#include "openinc/error.hpp"

namespace openinc {
namespace {

constexpr double kUnitTolerance = 1e-6;

double row_distance(std::span<const double> a, std::span<const double> b) {
    double ss = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
        const double diff = a[d] - b[d];
        ss += diff * diff;
    }
    return std::sqrt(ss);
}

Var abs_value(Var x) { return add(relu(x), relu(scale(x, -1.0))); }

// A zero that stays connected to `x`, so backward yields zero gradients.
Var zero_like_loss(Var x) { return scale(sum(x), 0.0); }

void require_same_features(const Tensor& teacher, Var student) {
    if (!teacher.same_shape(student.value())) {
        throw Error(Errc::shape_mismatch, "teacher and student features differ in shape");
    }
}

}  // namespace

void LossConfig::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw Error(Errc::alpha_out_of_range, "alpha must lie in [0, 1]");
    }
    if (!(tau > 0.0)) {
        throw Error(Errc::invalid_spec, "tau must be positive");
    }
    if (!(lambda_dis >= 0.0)) {
        throw Error(Errc::invalid_spec, "lambda_dis must be non-negative");
    }
    if (!(kd_temperature > 0.0)) {
        throw Error(Errc::invalid_spec, "kd_temperature must be positive");
    }
}

SupConResult supcon_loss(Var proj, std::span<const int> labels, double tau) {
    const Tensor& z = proj.value();
    const std::size_t n = z.rows();
    if (z.rank() != 2 || n < 2) {
        throw Error(Errc::batch_too_small, "supcon needs at least two samples");
    }
    if (labels.size() != n) {
        throw Error(Errc::shape_mismatch, "one label per row required");
    }
    if (!(tau > 0.0)) {
        throw Error(Errc::invalid_spec, "tau must be positive");
    }
    for (std::size_t i = 0; i < n; ++i) {
        double ss = 0.0;
        for (double v : z.row(i)) {
            ss += v * v;
        }
        if (std::abs(std::sqrt(ss) - 1.0) > kUnitTolerance) {
            throw Error(Errc::non_unit_rows, "row " + std::to_string(i) + " is not unit-norm");
        }
    }

    Tape& tape = *proj.tape();
    // logits[i][a] = z_i . z_a / tau
    Var logits = scale(matmul(proj, transpose(proj)), 1.0 / tau);

    // Push each diagonal entry far enough below every off-diagonal one that
    // exp() underflows to exactly 0 after the row max shift: |logit| <= 1/tau.
    Tensor self_mask(Shape{n, n}, 0.0);
    const double mask_value = -(2.0 / tau + 800.0);
    for (std::size_t i = 0; i < n; ++i) {
        self_mask(i, i) = mask_value;
    }
    Var log_denominator = logsumexp(add(logits, tape.constant(std::move(self_mask))));  // n x 1

    Tensor positive_weight(Shape{n, n}, 0.0);
    Tensor anchor_used(Shape{n, 1}, 0.0);
    SupConResult result;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t positives = 0;
        for (std::size_t p = 0; p < n; ++p) {
            positives += (p != i && labels[p] == labels[i]) ? 1 : 0;
        }
        if (positives == 0) {
            ++result.skipped_anchors;
            continue;
        }
        anchor_used[i] = 1.0;
        for (std::size_t p = 0; p < n; ++p) {
            if (p != i && labels[p] == labels[i]) {
                positive_weight(i, p) = 1.0 / static_cast<double>(positives);
            }
        }
    }
    result.empty_positives = result.skipped_anchors == n;

    Var denominators = sum(mul(log_denominator, tape.constant(std::move(anchor_used))));
    Var numerators = sum(mul(logits, tape.constant(std::move(positive_weight))));
    result.loss = sub(denominators, numerators);
    return result;
}

Var ce_loss(Var logits, std::span<const std::size_t> targets) {
    const Tensor& l = logits.value();
    const std::size_t n = l.rows();
    const std::size_t c = l.cols();
    if (l.rank() != 2 || n == 0) {
        throw Error(Errc::empty_input, "cross-entropy needs a non-empty N x C batch");
    }
    if (targets.size() != n) {
        throw Error(Errc::shape_mismatch, "one target per row required");
    }
    Tensor one_hot(Shape{n, c}, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (targets[i] >= c) {
            throw Error(Errc::label_out_of_range,
                        "target " + std::to_string(targets[i]) + " outside [0, " + std::to_string(c) + ")");
        }
        one_hot(i, targets[i]) = 1.0;
    }
    Tape& tape = *logits.tape();
    Var picked = sum(mul(logits, tape.constant(std::move(one_hot))));
    return scale(sub(sum(logsumexp(logits)), picked), 1.0 / static_cast<double>(n));
}

Var response_kd_loss(Var student_logits, const Tensor& teacher_logits, double temperature) {
    const Tensor& s = student_logits.value();
    if (!s.same_shape(teacher_logits) || s.rank() != 2) {
        throw Error(Errc::shape_mismatch, "student and teacher logits differ in shape");
    }
    if (!(temperature > 0.0)) {
        throw Error(Errc::invalid_spec, "temperature must be positive");
    }
    const std::size_t n = s.rows();
    const std::size_t c = s.cols();
    if (n == 0 || c == 0) {
        throw Error(Errc::empty_input, "response distillation needs a non-empty batch");
    }

    Tensor teacher_prob(Shape{n, c}, 0.0);
    double teacher_neg_entropy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = teacher_logits.row(i);
        const double m = *std::max_element(row.begin(), row.end()) / temperature;
        double total = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            total += std::exp(row[j] / temperature - m);
        }
        const double log_total = std::log(total) + m;
        for (std::size_t j = 0; j < c; ++j) {
            const double log_p = row[j] / temperature - log_total;
            const double p = std::exp(log_p);
            teacher_prob(i, j) = p;
            if (p > 0.0) {
                teacher_neg_entropy += p * log_p;
            }
        }
    }

    // sum_i KL_i = sum p log p - sum p (s / T) + sum_i lse(s_i / T)
    Tape& tape = *student_logits.tape();
    Var scaled = scale(student_logits, 1.0 / temperature);
    Var cross = sub(sum(logsumexp(scaled)), sum(mul(scaled, tape.constant(std::move(teacher_prob)))));
    Var kl_sum = add(cross, tape.constant(Tensor::scalar(teacher_neg_entropy)));
    // KL is non-negative; relu removes round-off below zero at the fixed point.
    return relu(scale(kl_sum, temperature * temperature / static_cast<double>(n)));
}

double angle_similarity(std::span<const double> zi, std::span<const double> zj, std::span<const double> zk) {
    if (zi.size() != zj.size() || zk.size() != zj.size()) {
        throw Error(Errc::shape_mismatch, "triplet vectors differ in length");
    }
    const double nij = row_distance(zi, zj);
    const double nkj = row_distance(zk, zj);
    if (!(nij > kNormEpsilon) || !(nkj > kNormEpsilon)) {
        throw Error(Errc::degenerate_triplet, "triplet has coincident points");
    }
    double cosine = 0.0;
    for (std::size_t d = 0; d < zj.size(); ++d) {
        cosine += (zi[d] - zj[d]) * (zk[d] - zj[d]);
    }
    return cosine / (nij * nkj);
}

RkdTerm rkd_angle_loss(const Tensor& teacher_feats, Var student_feats, std::span<const Triplet> triplets) {
    require_same_features(teacher_feats, student_feats);
    const Tensor& student = student_feats.value();
    const std::size_t n = student.rows();
    if (student.rank() != 2 || n < 3) {
        throw Error(Errc::batch_too_small, "angle distillation needs at least three samples");
    }

    std::vector<std::size_t> is;
    std::vector<std::size_t> js;
    std::vector<std::size_t> ks;
    std::vector<double> teacher_angles;
    RkdTerm term;
    for (const Triplet& t : triplets) {
        if (t.i >= n || t.j >= n || t.k >= n) {
            throw Error(Errc::shape_mismatch, "triplet index out of range");
        }
        try {
            const double psi_t = angle_similarity(teacher_feats.row(t.i), teacher_feats.row(t.j), teacher_feats.row(t.k));
            (void)angle_similarity(student.row(t.i), student.row(t.j), student.row(t.k));
            teacher_angles.push_back(psi_t);
            is.push_back(t.i);
            js.push_back(t.j);
            ks.push_back(t.k);
        } catch (const Error& e) {
            if (e.code() != Errc::degenerate_triplet) {
                throw;
            }
            ++term.skipped_triplets;
        }
    }
    if (is.empty()) {
        term.loss = zero_like_loss(student_feats);
        return term;
    }

    Tape& tape = *student_feats.tape();
    Var vertex = gather_rows(student_feats, js);
    Var e_ij = l2_normalize(sub(gather_rows(student_feats, is), vertex));
    Var e_kj = l2_normalize(sub(gather_rows(student_feats, ks), vertex));
    Var psi = sum_rows(mul(e_ij, e_kj));
    const std::size_t m = teacher_angles.size();
    Var target = tape.constant(Tensor::matrix(m, 1, std::move(teacher_angles)));
    term.loss = sum(abs_value(sub(target, psi)));
    return term;
}

Var rkd_distance_loss(const Tensor& teacher_feats, Var student_feats, std::span<const IndexPair> pairs) {
    require_same_features(teacher_feats, student_feats);
    const std::size_t n = teacher_feats.rows();
    if (teacher_feats.rank() != 2 || n < 2) {
        throw Error(Errc::batch_too_small, "distance distillation needs at least two samples");
    }
    for (const IndexPair& p : pairs) {
        if (p.i >= n || p.j >= n) {
            throw Error(Errc::shape_mismatch, "pair index out of range");
        }
    }
    if (pairs.empty()) {
        return zero_like_loss(student_feats);
    }

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            total += row_distance(teacher_feats.row(i), teacher_feats.row(j));
        }
    }
    const double mean_distance = total / static_cast<double>(n * (n - 1) / 2);
    // A collapsed teacher batch has no scale to normalize by.
    const double norm = mean_distance > kNormEpsilon ? mean_distance : 1.0;

    std::vector<std::size_t> is;
    std::vector<std::size_t> js;
    std::vector<double> teacher_dist;
    for (const IndexPair& p : pairs) {
        is.push_back(p.i);
        js.push_back(p.j);
        teacher_dist.push_back(row_distance(teacher_feats.row(p.i), teacher_feats.row(p.j)) / norm);
    }
    Tape& tape = *student_feats.tape();
    Var diff = sub(gather_rows(student_feats, is), gather_rows(student_feats, js));
    Var student_dist = scale(sqrt(sum_rows(square(diff))), 1.0 / norm);
    const std::size_t m = teacher_dist.size();
    Var target = tape.constant(Tensor::matrix(m, 1, std::move(teacher_dist)));
    return sum(abs_value(sub(target, student_dist)));
}

RkdTerm distill_loss(const Tensor& teacher_feats, Var student_feats, double lambda_dis,
                     std::span<const Triplet> triplets, std::span<const IndexPair> pairs) {
    if (student_feats.value().rows() < 3) {
        throw Error(Errc::batch_too_small, "distillation needs at least three samples");
    }
    RkdTerm angle = rkd_angle_loss(teacher_feats, student_feats, triplets);
    if (lambda_dis == 0.0) {
        return angle;
    }
    angle.loss = add(angle.loss, scale(rkd_distance_loss(teacher_feats, student_feats, pairs), lambda_dis));
    return angle;
}

Var total_loss(Var representation, Var distill, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw Error(Errc::alpha_out_of_range, "alpha must lie in [0, 1]");
    }
    return add(scale(representation, alpha), scale(distill, 1.0 - alpha));
}

std::vector<Triplet> sample_triplets(std::size_t n, std::size_t cap, Rng& rng) {
    if (n < 3) {
        return {};
    }
    const std::size_t per_i = (n - 1) * (n - 2);
    const std::size_t total = n * per_i;
    auto decode = [n, per_i](std::size_t code) {
        const std::size_t i = code / per_i;
        const std::size_t rest = code % per_i;
        std::size_t j = rest / (n - 2);
        std::size_t k = rest % (n - 2);
        if (j >= i) {
            ++j;
        }
        const std::size_t lo = std::min(i, j);
        const std::size_t hi = std::max(i, j);
        if (k >= lo) {
            ++k;
        }
        if (k >= hi) {
            ++k;
        }
        return Triplet{i, j, k};
    };

    std::vector<std::size_t> codes(total);
    std::iota(codes.begin(), codes.end(), std::size_t{0});
    if (total > cap) {
        std::vector<std::size_t> kept;
        kept.reserve(cap);
        std::sample(codes.begin(), codes.end(), std::back_inserter(kept), cap, rng);
        codes = std::move(kept);
    }
    std::vector<Triplet> out;
    out.reserve(codes.size());
    for (std::size_t c : codes) {
        out.push_back(decode(c));
    }
    return out;
}

std::vector<IndexPair> all_pairs(std::size_t n) {
    std::vector<IndexPair> out;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            out.push_back({i, j});
        }
    }
    return out;
}

}  // namespace openinc
