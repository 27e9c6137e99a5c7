#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "openinc/exemplar.hpp"

namespace openinc {

struct OsrConfig {
    std::size_t k_nn = 10;
    /// Decision threshold on sc_osr; only needed for hard in/outlier decisions.
    std::optional<double> threshold;

    void validate() const;
};

/// For every stored class (ascending id), the mean of the min(k_nn, |class|)
/// largest cosine similarities between `z` and that class's cached features.
/// Throws EmptyStore or DegenerateVector (zero query).
std::vector<double> knn_class_similarity(std::span<const double> z, const ExemplarStore& store, std::size_t k_nn);

struct OsrScore {
    double sc_osr = 0.0;
    std::size_t predicted = 0;  ///< position in the per-class vector
};

/// Clamps negatives to 0, normalizes by the sum, and returns the maximum share.
/// A sum <= 1e-12 falls back to the uniform score 1/C at position 0.
OsrScore osr_score(std::span<const double> per_class_sims);

struct UnifiedDecision {
    bool outlier = false;
    int class_id = -1;  ///< set for inliers only
    double sc_osr = 0.0;
};

/// Outlier when sc_osr < threshold; otherwise the class chosen by `classifier`.
/// Throws MissingThreshold when cfg.threshold is unset.
UnifiedDecision classify_unified(std::span<const double> z, const ExemplarStore& store,
                                 const std::function<int(std::span<const double>)>& classifier, const OsrConfig& cfg);

/// Mann-Whitney estimate of P(outlier scores below inlier), ties counted 1/2.
/// Throws EmptySide when either list is empty.
double auroc(std::span<const double> inlier_scores, std::span<const double> outlier_scores);

struct ScoreRecord {
    std::size_t sample_id = 0;
    int truth = -1;  ///< class id; -1 marks an outlier-session sample
    std::vector<double> class_similarity;
    double sc_osr = 0.0;
    int predicted = -1;  ///< classifier class, or -1 when the threshold rejects the sample
    bool is_outlier_truth() const noexcept { return truth < 0; }
};

}  // namespace openinc
