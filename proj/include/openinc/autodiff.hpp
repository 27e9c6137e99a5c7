#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "openinc/tensor.hpp"

namespace openinc {

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
public:
    Var() = default;

    Tape* tape() const noexcept { return tape_; }
    std::uint32_t id() const noexcept { return id_; }
    bool valid() const noexcept { return tape_ != nullptr; }

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    bool requires_grad() const;

private:
    friend class Tape;
    Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::uint32_t id_ = 0;
};

/// Define-by-run operation record for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so parents always precede
/// children and `backward` is a single reverse sweep. A tape is not
/// thread-safe; separate tapes are independent.
class Tape {
public:
    using BackwardFn = std::function<void(Tape& tape, const Tensor& grad_out)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Tracked input; receives a gradient on backward.
    Var leaf(Tensor value);
    /// Untracked input; gradients never flow into it.
    Var constant(Tensor value);

    /// Records an op result. `fn` is kept only when some parent is tracked.
    Var record(Tensor value, std::span<const Var> parents, BackwardFn fn);

    const Tensor& value(Var v) const;
    bool requires_grad(Var v) const;

    /// Gradient of the last backward root w.r.t. `v`; zeros if untouched.
    Tensor grad(Var v) const;

    /// Reverse sweep from a single-element root. Throws NonScalarRoot otherwise.
    void backward(Var root);

    /// Adds `g` into the gradient accumulator of `v` (no-op when untracked).
    void accumulate(Var v, const Tensor& g);

    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        bool has_grad = false;
        BackwardFn backward;
    };

    void check_owned(Var v) const;

    std::deque<Node> nodes_;
};

// Op set. Binary ops require both operands on the same tape and equal shapes
// unless noted; violations throw ShapeMismatch.

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var relu(Var a);
Var square(Var a);
/// Elementwise square root; the derivative at exactly 0 is taken as 0.
Var sqrt(Var a);
/// Row-wise L2 normalization (whole vector for rank <= 1).
/// Throws DegenerateVector when a row norm is <= kNormEpsilon.
Var l2_normalize(Var a);
/// Row-wise max-shifted log-sum-exp: rows x 1 for matrices, scalar for vectors.
Var logsumexp(Var a);
Var gather_rows(Var a, std::span<const std::size_t> indices);
Var sum(Var a);
/// Row sums as a rows x 1 matrix.
Var sum_rows(Var a);
Var mean(Var a);
/// Inner product of two equally sized tensors, as a scalar.
Var dot(Var a, Var b);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }

/// Central-difference gradient of `f` at `x` with step `h`.
Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x, double h);

}  // namespace openinc
