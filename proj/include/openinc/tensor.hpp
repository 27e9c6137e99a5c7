#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace openinc {

using Shape = std::vector<std::size_t>;

/// Degenerate-norm threshold shared by every normalization in the library.
inline constexpr double kNormEpsilon = 1e-12;

/// Dense row-major tensor of doubles, rank 0 to 2.
///
/// Rank-1 tensors of length d behave as 1 x d matrices for the matrix ops;
/// rank-0 tensors are 1 x 1.
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> data);
    explicit Tensor(Shape shape, double fill = 0.0);

    static Tensor scalar(double value);
    static Tensor vector(std::vector<double> values);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t rows() const noexcept;
    std::size_t cols() const noexcept;

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }

    std::span<const double> row(std::size_t r) const;
    std::span<double> row(std::size_t r);

    /// Value of a single-element tensor.
    double item() const;

    bool all_finite() const noexcept;
    bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }

    bool operator==(const Tensor&) const = default;

private:
    Shape shape_{0};
    std::vector<double> data_;
};

}  // namespace openinc
