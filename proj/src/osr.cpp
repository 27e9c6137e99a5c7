#include "openinc/osr.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>

#include "openinc/error.hpp"

namespace openinc {

void OsrConfig::validate() const {
    if (k_nn == 0) {
        throw Error(Errc::invalid_spec, "k_nn must be at least 1");
    }
    if (threshold && !(*threshold >= 0.0 && *threshold <= 1.0)) {
        throw Error(Errc::invalid_spec, "threshold must lie in [0, 1]");
    }
}

std::vector<double> knn_class_similarity(std::span<const double> z, const ExemplarStore& store, std::size_t k_nn) {
    if (store.empty() || store.total() == 0) {
        throw Error(Errc::empty_store, "no exemplars to compare against");
    }
    double zn = 0.0;
    for (double v : z) {
        zn += v * v;
    }
    zn = std::sqrt(zn);
    if (!(zn > kNormEpsilon)) {
        throw Error(Errc::degenerate_vector, "query feature has zero norm");
    }

    std::vector<double> out;
    out.reserve(store.num_classes());
    std::vector<double> sims;
    for (const auto& [cls, items] : store.classes()) {
        if (items.empty()) {
            throw Error(Errc::empty_store, "class " + std::to_string(cls) + " has no exemplars");
        }
        sims.clear();
        for (const Exemplar& e : items) {
            if (e.feature.size() != z.size()) {
                throw Error(Errc::shape_mismatch, "exemplar feature width differs from query");
            }
            double dot = 0.0;
            double en = 0.0;
            for (std::size_t k = 0; k < z.size(); ++k) {
                dot += z[k] * e.feature[k];
                en += e.feature[k] * e.feature[k];
            }
            en = std::sqrt(en);
            // A zero exemplar feature carries no direction; it counts as orthogonal.
            sims.push_back(en > kNormEpsilon ? dot / (zn * en) : 0.0);
        }
        const std::size_t k = std::min(k_nn, sims.size());
        std::partial_sort(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(k), sims.end(), std::greater<>());
        double total = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            total += sims[i];
        }
        out.push_back(total / static_cast<double>(k));
    }
    return out;
}

OsrScore osr_score(std::span<const double> per_class_sims) {
    const std::size_t c = per_class_sims.size();
    if (c == 0) {
        throw Error(Errc::no_classes, "no class similarities to normalize");
    }
    double total = 0.0;
    for (double s : per_class_sims) {
        total += std::max(s, 0.0);
    }
    if (!(total > kNormEpsilon)) {
        return OsrScore{1.0 / static_cast<double>(c), 0};
    }
    OsrScore best{-1.0, 0};
    for (std::size_t i = 0; i < c; ++i) {
        const double share = std::max(per_class_sims[i], 0.0) / total;
        if (share > best.sc_osr) {
            best = OsrScore{share, i};
        }
    }
    return best;
}

UnifiedDecision classify_unified(std::span<const double> z, const ExemplarStore& store,
                                 const std::function<int(std::span<const double>)>& classifier, const OsrConfig& cfg) {
    if (!cfg.threshold) {
        throw Error(Errc::missing_threshold, "unified classification needs a threshold");
    }
    const std::vector<double> sims = knn_class_similarity(z, store, cfg.k_nn);
    const OsrScore score = osr_score(sims);
    UnifiedDecision out;
    out.sc_osr = score.sc_osr;
    if (score.sc_osr < *cfg.threshold) {
        out.outlier = true;
        return out;
    }
    out.class_id = classifier(z);
    return out;
}

double auroc(std::span<const double> inlier_scores, std::span<const double> outlier_scores) {
    if (inlier_scores.empty() || outlier_scores.empty()) {
        throw Error(Errc::empty_side, "AUROC needs inlier and outlier scores");
    }
    std::vector<double> outliers(outlier_scores.begin(), outlier_scores.end());
    std::sort(outliers.begin(), outliers.end());
    // Twice the Mann-Whitney U, kept integral until the final division.
    std::uint64_t doubled = 0;
    for (double s : inlier_scores) {
        const auto lower = std::lower_bound(outliers.begin(), outliers.end(), s);
        const auto upper = std::upper_bound(lower, outliers.end(), s);
        doubled += 2 * static_cast<std::uint64_t>(lower - outliers.begin()) + static_cast<std::uint64_t>(upper - lower);
    }
    const double pairs = static_cast<double>(inlier_scores.size()) * static_cast<double>(outlier_scores.size());
    return static_cast<double>(doubled) / (2.0 * pairs);
}

}  // namespace openinc
