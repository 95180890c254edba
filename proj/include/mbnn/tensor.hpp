#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace mbnn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles.
///
/// Extents are positive; a default-constructed tensor is the empty rank-0
/// placeholder and holds no data. Everything in the library passes tensors
/// by value and treats them as immutable once built.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
    static Tensor filled(Shape shape, double v) { return Tensor(std::move(shape), v); }
    static Tensor scalar(double v) { return Tensor({1}, v); }
    static Tensor identity(std::size_t n);
    /// Column vector (n x 1).
    static Tensor column(std::span<const double> values);
    /// Row-major matrix from nested rows.
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
    /// Rank-1 tensor [n] from literal values.
    static Tensor vec(std::initializer_list<double> values) { return Tensor({values.size()}, std::vector<double>(values)); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }
    std::size_t extent(std::size_t axis) const;
    std::size_t rows() const { return extent(0); }
    /// Trailing extent product (1 for rank-1 tensors).
    std::size_t cols() const;

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }

    /// Same data, new extents; sizes must agree.
    Tensor reshaped(Shape shape) const;
    /// Value of a one-element tensor.
    double item() const;

    bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
    bool operator==(const Tensor& other) const = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

// Elementwise helpers over plain tensors (no tape).
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(double s, const Tensor& a);
Tensor hadamard(const Tensor& a, const Tensor& b);

double dot(const Tensor& a, const Tensor& b);
double norm2(const Tensor& a);
double squared_norm(const Tensor& a);
double max_abs(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);
/// ||a - b|| / max(||b||, tiny).
double relative_error(const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& a);
/// Column `j` of a matrix as an n x 1 tensor.
Tensor column_of(const Tensor& m, std::size_t j);
/// Concatenate column vectors / matrices with equal row counts side by side.
Tensor hstack(std::span<const Tensor> columns);

}  // namespace mbnn
