#include "openinc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "openinc/error.hpp"

namespace openinc {
namespace {

std::size_t product(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void check_rank(const Shape& shape) {
    if (shape.size() > 2) {
        throw Error(Errc::shape_mismatch, "tensors are limited to rank 2");
    }
}

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_rank(shape_);
    if (product(shape_) != data_.size()) {
        throw Error(Errc::shape_mismatch, "data length does not match shape");
    }
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    check_rank(shape_);
    data_.assign(product(shape_), fill);
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

Tensor Tensor::vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor(Shape{n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Tensor(Shape{rows, cols}, std::move(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t n = rows.size();
    const std::size_t m = n == 0 ? 0 : rows.begin()->size();
    std::vector<double> values;
    values.reserve(n * m);
    for (const auto& r : rows) {
        if (r.size() != m) {
            throw Error(Errc::shape_mismatch, "ragged matrix literal");
        }
        values.insert(values.end(), r.begin(), r.end());
    }
    return Tensor(Shape{n, m}, std::move(values));
}

std::size_t Tensor::rows() const noexcept { return shape_.size() == 2 ? shape_[0] : 1; }

std::size_t Tensor::cols() const noexcept {
    switch (shape_.size()) {
        case 0: return 1;
        case 1: return shape_[0];
        default: return shape_[1];
    }
}

std::span<const double> Tensor::row(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols(), cols());
}

std::span<double> Tensor::row(std::size_t r) { return std::span<double>(data_).subspan(r * cols(), cols()); }

double Tensor::item() const {
    if (data_.size() != 1) {
        throw Error(Errc::shape_mismatch, "item() requires a single-element tensor");
    }
    return data_.front();
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace openinc
