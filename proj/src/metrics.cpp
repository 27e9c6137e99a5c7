#include "openinc/metrics.hpp"

#include <algorithm>
#include <iterator>
#include <limits>
#include <string>

#include "openinc/error.hpp"

namespace openinc {
namespace {

void check_labels(const Tensor& features, std::span<const int> labels) {
    if (features.rank() != 2 || features.rows() == 0) {
        throw Error(Errc::empty_input, "no features given");
    }
    if (labels.size() != features.rows()) {
        throw Error(Errc::shape_mismatch, "one label per feature row required");
    }
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double ss = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        ss += d * d;
    }
    return ss;
}

}  // namespace

ClassCenters class_centers(const Tensor& features, std::span<const int> labels) {
    check_labels(features, labels);
    const std::size_t d = features.cols();
    ClassCenters sums;
    std::map<int, std::size_t> counts;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto& c = sums[labels[i]];
        c.resize(d, 0.0);
        const auto row = features.row(i);
        for (std::size_t k = 0; k < d; ++k) {
            c[k] += row[k];
        }
        ++counts[labels[i]];
    }
    for (auto& [cls, c] : sums) {
        for (double& v : c) {
            v /= static_cast<double>(counts[cls]);
        }
    }
    return sums;
}

double intra_spread(const Tensor& features, std::span<const int> labels) {
    const ClassCenters centers = class_centers(features, labels);
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        total += squared_distance(centers.at(labels[i]), features.row(i));
    }
    return total / static_cast<double>(labels.size());
}

double inter_spread(const ClassCenters& centers) {
    if (centers.size() < 2) {
        throw Error(Errc::single_class, "inter spread needs at least two classes");
    }
    double best = std::numeric_limits<double>::infinity();
    for (auto a = centers.begin(); a != centers.end(); ++a) {
        for (auto b = std::next(a); b != centers.end(); ++b) {
            if (a->second.size() != b->second.size()) {
                throw Error(Errc::shape_mismatch, "class centers differ in width");
            }
            best = std::min(best, squared_distance(a->second, b->second));
        }
    }
    return best;
}

double rs_ratio(double s_intra, double s_inter) {
    if (!(s_inter > 0.0)) {
        throw Error(Errc::zero_inter_spread, "inter spread is zero");
    }
    return s_intra / s_inter;
}

SpreadReport spread_report(const Tensor& features, std::span<const int> labels) {
    SpreadReport r;
    r.class_centers = class_centers(features, labels);
    r.s_intra = intra_spread(features, labels);
    r.s_inter = inter_spread(r.class_centers);
    r.r_s = rs_ratio(r.s_intra, r.s_inter);
    return r;
}

double incremental_accuracy(std::span<const int> predictions, std::span<const int> truths) {
    if (truths.empty()) {
        throw Error(Errc::empty_input, "accuracy over an empty test set");
    }
    if (predictions.size() != truths.size()) {
        throw Error(Errc::shape_mismatch, "prediction and truth counts differ");
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        correct += predictions[i] == truths[i] ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(truths.size());
}

}  // namespace openinc
