#include "openinc/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "openinc/error.hpp"

namespace openinc {
namespace {

Tape& common_tape(Var a, Var b) {
    if (!a.valid() || a.tape() != b.tape()) {
        throw Error(Errc::shape_mismatch, "operands live on different tapes");
    }
    return *a.tape();
}

Tape& tape_of(Var a) {
    if (!a.valid()) {
        throw Error(Errc::shape_mismatch, "operand is not attached to a tape");
    }
    return *a.tape();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw Error(Errc::shape_mismatch, std::string(op) + ": operand shapes differ");
    }
}

// out[m x n] = a[m x k] * b[k x n], with optional transposes of the operands.
Tensor matmul_kernel(const Tensor& a, bool ta, const Tensor& b, bool tb) {
    const std::size_t m = ta ? a.cols() : a.rows();
    const std::size_t k = ta ? a.rows() : a.cols();
    const std::size_t kb = tb ? b.cols() : b.rows();
    const std::size_t n = tb ? b.rows() : b.cols();
    if (k != kb) {
        throw Error(Errc::shape_mismatch, "matmul: inner dimensions " + std::to_string(k) + " and " +
                                              std::to_string(kb) + " differ");
    }
    Tensor out(Shape{m, n}, 0.0);
    const std::size_t ac = a.cols();
    const std::size_t bc = b.cols();
    const auto ad = a.data();
    const auto bd = b.data();
    auto od = out.data();
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = od.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ta ? ad[p * ac + i] : ad[i * ac + p];
            if (av == 0.0) {
                continue;
            }
            if (!tb) {
                const double* brow = bd.data() + p * bc;
                for (std::size_t j = 0; j < n; ++j) {
                    orow[j] += av * brow[j];
                }
            } else {
                for (std::size_t j = 0; j < n; ++j) {
                    orow[j] += av * bd[j * bc + p];
                }
            }
        }
    }
    return out;
}

Tensor reshaped(const Tensor& like, Tensor t) {
    // Gradients for rank-1 operands of matrix ops are computed as 1 x d.
    return Tensor(like.shape(), std::vector<double>(t.values()));
}

template <typename F>
Tensor map(const Tensor& a, F f) {
    Tensor out(a.shape(), 0.0);
    const auto in = a.data();
    auto od = out.data();
    for (std::size_t i = 0; i < in.size(); ++i) {
        od[i] = f(in[i]);
    }
    return out;
}

template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, F f) {
    Tensor out(a.shape(), 0.0);
    const auto x = a.data();
    const auto y = b.data();
    auto od = out.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
        od[i] = f(x[i], y[i]);
    }
    return out;
}

Shape reduced_rows_shape(const Tensor& a) {
    if (a.rank() == 2) {
        return Shape{a.rows(), 1};
    }
    return Shape{};
}

}  // namespace

const Tensor& Var::value() const { return tape_->value(*this); }

bool Var::requires_grad() const { return tape_->requires_grad(*this); }

Var Tape::leaf(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, true, false, {}});
    return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::constant(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, false, false, {}});
    return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::record(Tensor value, std::span<const Var> parents, BackwardFn fn) {
    bool tracked = false;
    for (const Var& p : parents) {
        check_owned(p);
        tracked = tracked || nodes_[p.id()].requires_grad;
    }
    nodes_.push_back(Node{std::move(value), {}, tracked, false, tracked ? std::move(fn) : BackwardFn{}});
    return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

void Tape::check_owned(Var v) const {
    if (v.tape() != this || v.id() >= nodes_.size()) {
        throw Error(Errc::shape_mismatch, "variable does not belong to this tape");
    }
}

const Tensor& Tape::value(Var v) const {
    check_owned(v);
    return nodes_[v.id()].value;
}

bool Tape::requires_grad(Var v) const {
    check_owned(v);
    return nodes_[v.id()].requires_grad;
}

Tensor Tape::grad(Var v) const {
    check_owned(v);
    const Node& n = nodes_[v.id()];
    if (!n.has_grad) {
        return Tensor(n.value.shape(), 0.0);
    }
    return n.grad;
}

void Tape::accumulate(Var v, const Tensor& g) {
    Node& n = nodes_[v.id()];
    if (!n.requires_grad) {
        return;
    }
    if (!n.has_grad) {
        n.grad = Tensor(n.value.shape(), std::vector<double>(g.values()));
        n.has_grad = true;
        return;
    }
    auto dst = n.grad.data();
    const auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] += src[i];
    }
}

void Tape::backward(Var root) {
    check_owned(root);
    if (nodes_[root.id()].value.size() != 1) {
        throw Error(Errc::non_scalar_root, "backward requires a single-element root");
    }
    for (Node& n : nodes_) {
        n.has_grad = false;
        n.grad = Tensor();
    }
    accumulate(root, Tensor(nodes_[root.id()].value.shape(), 1.0));
    for (std::size_t i = root.id() + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.has_grad || !n.backward) {
            continue;
        }
        // Callbacks only touch parents, which precede node i.
        n.backward(*this, n.grad);
    }
}

Var matmul(Var a, Var b) {
    Tape& t = common_tape(a, b);
    Tensor out = matmul_kernel(a.value(), false, b.value(), false);
    const Var parents[] = {a, b};
    return t.record(std::move(out), parents, [a, b](Tape& tp, const Tensor& g) {
        const Tensor& av = tp.value(a);
        const Tensor& bv = tp.value(b);
        if (tp.requires_grad(a)) {
            tp.accumulate(a, reshaped(av, matmul_kernel(g, false, bv, true)));
        }
        if (tp.requires_grad(b)) {
            tp.accumulate(b, reshaped(bv, matmul_kernel(av, true, g, false)));
        }
    });
}

Var transpose(Var a) {
    Tape& t = tape_of(a);
    const Tensor& av = a.value();
    const std::size_t r = av.rows();
    const std::size_t c = av.cols();
    Tensor out(Shape{c, r}, 0.0);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            out(j, i) = av(i, j);
        }
    }
    const Var parents[] = {a};
    return t.record(std::move(out), parents, [a, r, c](Tape& tp, const Tensor& g) {
        Tensor ga(tp.value(a).shape(), 0.0);
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
                ga[i * c + j] = g[j * r + i];
            }
        }
        tp.accumulate(a, ga);
    });
}

Var add(Var a, Var b) {
    Tape& t = common_tape(a, b);
    require_same_shape(a.value(), b.value(), "add");
    const Var parents[] = {a, b};
    return t.record(zip(a.value(), b.value(), [](double x, double y) { return x + y; }), parents,
                    [a, b](Tape& tp, const Tensor& g) {
                        tp.accumulate(a, g);
                        tp.accumulate(b, g);
                    });
}

Var sub(Var a, Var b) {
    Tape& t = common_tape(a, b);
    require_same_shape(a.value(), b.value(), "sub");
    const Var parents[] = {a, b};
    return t.record(zip(a.value(), b.value(), [](double x, double y) { return x - y; }), parents,
                    [a, b](Tape& tp, const Tensor& g) {
                        tp.accumulate(a, g);
                        if (tp.requires_grad(b)) {
                            tp.accumulate(b, map(g, [](double v) { return -v; }));
                        }
                    });
}

Var mul(Var a, Var b) {
    Tape& t = common_tape(a, b);
    require_same_shape(a.value(), b.value(), "mul");
    const Var parents[] = {a, b};
    return t.record(zip(a.value(), b.value(), [](double x, double y) { return x * y; }), parents,
                    [a, b](Tape& tp, const Tensor& g) {
                        if (tp.requires_grad(a)) {
                            tp.accumulate(a, zip(g, tp.value(b), [](double x, double y) { return x * y; }));
                        }
                        if (tp.requires_grad(b)) {
                            tp.accumulate(b, zip(g, tp.value(a), [](double x, double y) { return x * y; }));
                        }
                    });
}

Var scale(Var a, double factor) {
    Tape& t = tape_of(a);
    const Var parents[] = {a};
    return t.record(map(a.value(), [factor](double x) { return x * factor; }), parents,
                    [a, factor](Tape& tp, const Tensor& g) {
                        tp.accumulate(a, map(g, [factor](double x) { return x * factor; }));
                    });
}

Var relu(Var a) {
    Tape& t = tape_of(a);
    const Var parents[] = {a};
    return t.record(map(a.value(), [](double x) { return x > 0.0 ? x : 0.0; }), parents,
                    [a](Tape& tp, const Tensor& g) {
                        tp.accumulate(a, zip(g, tp.value(a), [](double gv, double x) { return x > 0.0 ? gv : 0.0; }));
                    });
}

Var square(Var a) {
    Tape& t = tape_of(a);
    const Var parents[] = {a};
    return t.record(map(a.value(), [](double x) { return x * x; }), parents, [a](Tape& tp, const Tensor& g) {
        tp.accumulate(a, zip(g, tp.value(a), [](double gv, double x) { return 2.0 * x * gv; }));
    });
}

Var sqrt(Var a) {
    Tape& t = tape_of(a);
    for (double v : a.value().data()) {
        if (v < 0.0) {
            throw Error(Errc::degenerate_vector, "sqrt of a negative value");
        }
    }
    Tensor out = map(a.value(), [](double x) { return std::sqrt(x); });
    Tensor y = out;
    const Var parents[] = {a};
    return t.record(std::move(out), parents, [a, y = std::move(y)](Tape& tp, const Tensor& g) {
        tp.accumulate(a, zip(g, y, [](double gv, double root) { return root > 0.0 ? gv / (2.0 * root) : 0.0; }));
    });
}

Var l2_normalize(Var a) {
    Tape& t = tape_of(a);
    const Tensor& av = a.value();
    const std::size_t r = av.rows();
    const std::size_t c = av.cols();
    Tensor out(av.shape(), 0.0);
    std::vector<double> norms(r);
    for (std::size_t i = 0; i < r; ++i) {
        double ss = 0.0;
        for (double v : av.row(i)) {
            ss += v * v;
        }
        const double n = std::sqrt(ss);
        if (!(n > kNormEpsilon)) {
            throw Error(Errc::degenerate_vector, "row " + std::to_string(i) + " has norm <= 1e-12");
        }
        norms[i] = n;
        for (std::size_t j = 0; j < c; ++j) {
            out[i * c + j] = av[i * c + j] / n;
        }
    }
    Tensor y = out;
    const Var parents[] = {a};
    return t.record(std::move(out), parents,
                    [a, y = std::move(y), norms = std::move(norms), r, c](Tape& tp, const Tensor& g) {
                        // d(v/|v|) = (g - y (y.g)) / |v|
                        Tensor ga(tp.value(a).shape(), 0.0);
                        for (std::size_t i = 0; i < r; ++i) {
                            double yg = 0.0;
                            for (std::size_t j = 0; j < c; ++j) {
                                yg += y[i * c + j] * g[i * c + j];
                            }
                            for (std::size_t j = 0; j < c; ++j) {
                                ga[i * c + j] = (g[i * c + j] - y[i * c + j] * yg) / norms[i];
                            }
                        }
                        tp.accumulate(a, ga);
                    });
}

Var logsumexp(Var a) {
    Tape& t = tape_of(a);
    const Tensor& av = a.value();
    const std::size_t r = av.rows();
    const std::size_t c = av.cols();
    if (c == 0 || av.size() == 0) {
        throw Error(Errc::empty_input, "logsumexp of an empty vector");
    }
    Tensor out(reduced_rows_shape(av), 0.0);
    Tensor softmax(av.shape(), 0.0);
    for (std::size_t i = 0; i < r; ++i) {
        const auto row = av.row(i);
        const double m = *std::max_element(row.begin(), row.end());
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            const double e = std::exp(row[j] - m);
            softmax[i * c + j] = e;
            s += e;
        }
        for (std::size_t j = 0; j < c; ++j) {
            softmax[i * c + j] /= s;
        }
        out[i] = m + std::log(s);
    }
    const Var parents[] = {a};
    return t.record(std::move(out), parents, [a, softmax = std::move(softmax), r, c](Tape& tp, const Tensor& g) {
        Tensor ga(tp.value(a).shape(), 0.0);
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
                ga[i * c + j] = g[i] * softmax[i * c + j];
            }
        }
        tp.accumulate(a, ga);
    });
}

Var gather_rows(Var a, std::span<const std::size_t> indices) {
    Tape& t = tape_of(a);
    const Tensor& av = a.value();
    const std::size_t c = av.cols();
    Tensor out(Shape{indices.size(), c}, 0.0);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= av.rows()) {
            throw Error(Errc::shape_mismatch, "gather_rows: index out of range");
        }
        std::copy_n(av.row(indices[i]).begin(), c, out.row(i).begin());
    }
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    const Var parents[] = {a};
    return t.record(std::move(out), parents, [a, idx = std::move(idx), c](Tape& tp, const Tensor& g) {
        Tensor ga(tp.value(a).shape(), 0.0);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            for (std::size_t j = 0; j < c; ++j) {
                ga[idx[i] * c + j] += g[i * c + j];
            }
        }
        tp.accumulate(a, ga);
    });
}

Var sum(Var a) {
    Tape& t = tape_of(a);
    double s = 0.0;
    for (double v : a.value().data()) {
        s += v;
    }
    const Var parents[] = {a};
    return t.record(Tensor::scalar(s), parents, [a](Tape& tp, const Tensor& g) {
        tp.accumulate(a, Tensor(tp.value(a).shape(), g.item()));
    });
}

Var sum_rows(Var a) {
    Tape& t = tape_of(a);
    const Tensor& av = a.value();
    const std::size_t r = av.rows();
    const std::size_t c = av.cols();
    Tensor out(Shape{r, 1}, 0.0);
    for (std::size_t i = 0; i < r; ++i) {
        double s = 0.0;
        for (double v : av.row(i)) {
            s += v;
        }
        out[i] = s;
    }
    const Var parents[] = {a};
    return t.record(std::move(out), parents, [a, r, c](Tape& tp, const Tensor& g) {
        Tensor ga(tp.value(a).shape(), 0.0);
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
                ga[i * c + j] = g[i];
            }
        }
        tp.accumulate(a, ga);
    });
}

Var mean(Var a) {
    const std::size_t n = a.value().size();
    if (n == 0) {
        throw Error(Errc::empty_input, "mean of an empty tensor");
    }
    return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var dot(Var a, Var b) {
    Tape& t = common_tape(a, b);
    if (a.value().size() != b.value().size()) {
        throw Error(Errc::shape_mismatch, "dot: operand sizes differ");
    }
    double s = 0.0;
    const auto x = a.value().data();
    const auto y = b.value().data();
    for (std::size_t i = 0; i < x.size(); ++i) {
        s += x[i] * y[i];
    }
    const Var parents[] = {a, b};
    return t.record(Tensor::scalar(s), parents, [a, b](Tape& tp, const Tensor& g) {
        const double gv = g.item();
        if (tp.requires_grad(a)) {
            tp.accumulate(a, map(tp.value(b), [gv](double v) { return gv * v; }));
        }
        if (tp.requires_grad(b)) {
            tp.accumulate(b, map(tp.value(a), [gv](double v) { return gv * v; }));
        }
    });
}

Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x, double h) {
    Tensor grad(x.shape(), 0.0);
    Tensor probe = x;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double orig = probe[k];
        probe[k] = orig + h;
        const double up = f(probe);
        probe[k] = orig - h;
        const double down = f(probe);
        probe[k] = orig;
        grad[k] = (up - down) / (2.0 * h);
    }
    return grad;
}

}  // namespace openinc
