#pragma once

#include <map>
#include <span>
#include <vector>

#include "openinc/tensor.hpp"

namespace openinc {

using ClassCenters = std::map<int, std::vector<double>>;

ClassCenters class_centers(const Tensor& features, std::span<const int> labels);

/// Mean over samples of the squared distance to the sample's own class center.
double intra_spread(const Tensor& features, std::span<const int> labels);

/// Minimum squared distance over unordered pairs of class centers. Throws SingleClass.
double inter_spread(const ClassCenters& centers);

/// s_intra / s_inter; smaller means tighter, better-separated classes. Throws ZeroInterSpread.
double rs_ratio(double s_intra, double s_inter);

struct SpreadReport {
    double s_intra = 0.0;
    double s_inter = 0.0;
    double r_s = 0.0;
    ClassCenters class_centers;
};

SpreadReport spread_report(const Tensor& features, std::span<const int> labels);

/// Fraction of positions where prediction equals truth. Throws EmptyInput.
double incremental_accuracy(std::span<const int> predictions, std::span<const int> truths);

}  // namespace openinc
