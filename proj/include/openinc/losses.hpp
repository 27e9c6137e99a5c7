#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "openinc/autodiff.hpp"
#include "openinc/model.hpp"

namespace openinc {

struct LossConfig {
    double alpha = 0.2;        ///< weight of the representation term in the total objective
    double lambda_dis = 0.5;   ///< weight of the distance term inside the distillation loss
    double tau = 0.05;         ///< SupCon temperature
    double kd_temperature = 2.0;  ///< softmax temperature for response distillation

    /// Throws AlphaOutOfRange or InvalidSpec.
    void validate() const;
};

struct SupConResult {
    Var loss;
    std::size_t skipped_anchors = 0;
    /// Set when no anchor had a positive; the loss is then exactly 0.
    bool empty_positives = false;
};

/// Supervised contrastive loss, summed over anchors.
///
/// For anchor i with positives P(i) (same label, excluding i) and A(i) = every
/// other index:
///   -sum_i 1/|P(i)| sum_{p in P(i)} log( exp(z_i.z_p/tau) / sum_{a in A(i)} exp(z_i.z_a/tau) )
/// Anchors without positives are skipped. Rows of `proj` must be unit-norm.
SupConResult supcon_loss(Var proj, std::span<const int> labels, double tau);

/// Mean cross-entropy of raw logits against column indices in [0, C).
Var ce_loss(Var logits, std::span<const std::size_t> targets);

/// T^2 * mean_i KL(softmax(teacher_i / T) || softmax(student_i / T)); teacher is constant.
Var response_kd_loss(Var student_logits, const Tensor& teacher_logits, double temperature);

/// Cosine of the angle at vertex zj formed by zi and zk.
/// Throws DegenerateTriplet when zi or zk coincides with zj.
double angle_similarity(std::span<const double> zi, std::span<const double> zj, std::span<const double> zk);

/// (i, j, k) with j the vertex.
struct Triplet {
    std::size_t i;
    std::size_t j;
    std::size_t k;
};

struct IndexPair {
    std::size_t i;
    std::size_t j;
};

struct RkdTerm {
    Var loss;
    /// Triplets dropped because either network placed two of their points together.
    std::size_t skipped_triplets = 0;
};

/// Sum over triplets of |psi_A(teacher) - psi_A(student)|.
RkdTerm rkd_angle_loss(const Tensor& teacher_feats, Var student_feats, std::span<const Triplet> triplets);

/// Sum over pairs of |d_T(i,j) - d_S(i,j)| / mu_T, where mu_T is the mean pairwise
/// teacher distance over the whole batch.
Var rkd_distance_loss(const Tensor& teacher_feats, Var student_feats, std::span<const IndexPair> pairs);

/// angle + lambda_dis * distance over the same batch.
RkdTerm distill_loss(const Tensor& teacher_feats, Var student_feats, double lambda_dis,
                     std::span<const Triplet> triplets, std::span<const IndexPair> pairs);

/// alpha * representation + (1 - alpha) * distillation. Throws AlphaOutOfRange.
Var total_loss(Var representation, Var distill, double alpha);

/// Every ordered triplet of distinct indices in [0, n) when there are at most
/// `cap`, otherwise a uniform sample of `cap` of them without replacement.
std::vector<Triplet> sample_triplets(std::size_t n, std::size_t cap, Rng& rng);

std::vector<IndexPair> all_pairs(std::size_t n);

}  // namespace openinc
