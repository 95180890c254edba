#include "mbnn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mbnn/errors.hpp"

namespace mbnn {

std::size_t shape_size(const Shape& shape) {
    if (shape.empty()) return 0;
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

namespace {

void check_extents(const Shape& shape) {
    for (auto e : shape) {
        if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
    }
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                             shape_string(b.shape()));
    }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    check_extents(shape_);
    data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_extents(shape_);
    if (shape_size(shape_) != data_.size()) {
        throw DimensionError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                             shape_string(shape_));
    }
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
}

Tensor Tensor::column(std::span<const double> values) {
    return Tensor({values.size(), 1}, std::vector<double>(values.begin(), values.end()));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw DimensionError("ragged matrix literal");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(data));
}

std::size_t Tensor::extent(std::size_t axis) const {
    if (axis >= shape_.size()) throw IndexError("axis " + std::to_string(axis) + " out of range for " + shape_string(shape_));
    return shape_[axis];
}

std::size_t Tensor::cols() const {
    if (shape_.empty()) return 0;
    std::size_t c = 1;
    for (std::size_t i = 1; i < shape_.size(); ++i) c *= shape_[i];
    return c;
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_size(shape) != data_.size()) {
        throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    return Tensor(std::move(shape), data_);
}

double Tensor::item() const {
    if (data_.size() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape_));
    return data_[0];
}

Tensor operator+(const Tensor& a, const Tensor& b) {
    require_same(a, b, "add");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
    require_same(a, b, "sub");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

Tensor operator*(double s, const Tensor& a) {
    Tensor out = a;
    for (auto& v : out.data()) v *= s;
    return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    require_same(a, b, "hadamard");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
}

double dot(const Tensor& a, const Tensor& b) {
    if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double squared_norm(const Tensor& a) { return dot(a, a); }
double norm2(const Tensor& a) { return std::sqrt(squared_norm(a)); }

double max_abs(const Tensor& a) {
    double m = 0.0;
    for (double v : a.data()) m = std::max(m, std::abs(v));
    return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.size() != b.size()) throw DimensionError("max_abs_diff: length mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double relative_error(const Tensor& a, const Tensor& b) {
    if (a.size() != b.size()) throw DimensionError("relative_error: length mismatch");
    double num = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) num += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(num) / std::max(norm2(b), std::numeric_limits<double>::min());
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw DimensionError("transpose needs a matrix, got " + shape_string(a.shape()));
    const std::size_t r = a.rows(), c = a.cols();
    Tensor t({c, r});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) t(j, i) = a(i, j);
    return t;
}

Tensor column_of(const Tensor& m, std::size_t j) {
    if (m.rank() != 2 || j >= m.cols()) throw IndexError("column index out of range");
    Tensor out({m.rows(), 1});
    for (std::size_t i = 0; i < m.rows(); ++i) out[i] = m(i, j);
    return out;
}

Tensor hstack(std::span<const Tensor> columns) {
    if (columns.empty()) throw DimensionError("hstack of nothing");
    const std::size_t r = columns.front().rows();
    std::size_t total = 0;
    for (const auto& c : columns) {
        if (c.rows() != r) throw DimensionError("hstack: row count mismatch");
        total += c.cols();
    }
    Tensor out({r, total});
    std::size_t off = 0;
    for (const auto& c : columns) {
        const std::size_t w = c.cols();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < w; ++j) out(i, off + j) = c[i * w + j];
        off += w;
    }
    return out;
}

}  // namespace mbnn
