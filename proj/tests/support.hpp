#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "openinc/autodiff.hpp"
#include "openinc/error.hpp"
#include "openinc/model.hpp"
#include "openinc/tensor.hpp"

namespace openinc::test {

inline Tensor random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> values(rows * cols);
    for (double& v : values) {
        v = dist(rng);
    }
    return Tensor::matrix(rows, cols, std::move(values));
}

inline Tensor normalize_rows(Tensor t) {
    for (std::size_t r = 0; r < t.rows(); ++r) {
        double ss = 0.0;
        for (double v : t.row(r)) {
            ss += v * v;
        }
        const double norm = std::sqrt(ss);
        for (double& v : t.row(r)) {
            v /= norm;
        }
    }
    return t;
}

/// ||a - b|| / max(||a||, ||b||, 1e-8)
inline double relative_error(const Tensor& a, const Tensor& b) {
    double diff = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-8});
}

struct GradCheck {
    Tensor analytic;
    Tensor numeric;
    double rel = 0.0;
};

/// Compares backward() against central differences for a scalar function of one leaf.
inline GradCheck check_gradient(const std::function<Var(Tape&, Var)>& build, const Tensor& x, double h = 1e-5) {
    Tape tape;
    Var leaf = tape.leaf(x);
    tape.backward(build(tape, leaf));
    GradCheck out;
    out.analytic = tape.grad(leaf);
    out.numeric = finite_diff_gradient(
        [&](const Tensor& probe) {
            Tape t;
            return build(t, t.leaf(probe)).value().item();
        },
        x, h);
    out.rel = relative_error(out.analytic, out.numeric);
    return out;
}

inline double value_of(const std::function<Var(Tape&)>& build) {
    Tape tape;
    return build(tape).value().item();
}

}  // namespace openinc::test

#define EXPECT_ERRC(statement, errc)                                  \
    do {                                                              \
        try {                                                         \
            statement;                                                \
            ADD_FAILURE() << "expected " << ::openinc::to_string(errc); \
        } catch (const ::openinc::Error& e) {                         \
            EXPECT_EQ(e.code(), errc) << e.what();                    \
        }                                                             \
    } while (0)
