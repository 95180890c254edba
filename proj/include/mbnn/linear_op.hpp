#pragma once

#include "mbnn/tape.hpp"
#include "mbnn/tensor.hpp"

namespace mbnn {

/// Forward operator H of a linear inverse problem: an explicit matrix or a
/// circular 2-D convolution. Convolutions apply their adjoint as a correlation,
/// so adjoint().adjoint() is the original operator.
class LinearOp {
public:
    enum class Kind { matrix, convolution };

    static LinearOp from_matrix(Tensor matrix);
    /// Convolution of rows x cols images with `kernel` (must fit in the image).
    static LinearOp from_kernel(Tensor kernel, std::size_t rows, std::size_t cols);

    Kind kind() const noexcept { return kind_; }
    bool is_adjoint() const noexcept { return adjoint_; }
    const Tensor& payload() const noexcept { return payload_; }

    /// Shape of accepted inputs: [n] for matrices, [rows, cols] for convolutions.
    const Shape& input_shape() const noexcept { return in_shape_; }
    const Shape& output_shape() const noexcept { return out_shape_; }
    std::size_t input_size() const { return shape_size(in_shape_); }
    std::size_t output_size() const { return shape_size(out_shape_); }
    std::size_t image_rows() const noexcept { return rows_; }
    std::size_t image_cols() const noexcept { return cols_; }

    LinearOp adjoint() const;

    /// H x for a single input (any shape with input_size() entries); result has output_shape().
    Tensor apply(const Tensor& x) const;
    /// H^T y.
    Tensor apply_adjoint(const Tensor& y) const;
    /// H^T H x.
    Tensor apply_normal(const Tensor& x) const;
    /// Columns of x [input_size x batch] mapped through H.
    Tensor apply_batch(const Tensor& x) const;
    /// Recorded on a tape; x is [input_size x batch].
    Var apply(Var x) const;

    /// Dense [output_size x input_size] matrix of the operator.
    Tensor to_matrix() const;
    /// Kernel of the convolution as actually applied (flipped for an adjoint).
    Tensor effective_kernel() const;

private:
    Kind kind_ = Kind::matrix;
    bool adjoint_ = false;
    Tensor payload_;
    Shape in_shape_, out_shape_;
    std::size_t rows_ = 0, cols_ = 0;
};

/// Kernel realizing the adjoint of circular convolution by `kernel` on rows x cols images.
Tensor adjoint_kernel(const Tensor& kernel, std::size_t rows, std::size_t cols);

/// Dominant eigenvalue of H^T H by power iteration from a fixed pseudo-random start.
/// Stops when successive Rayleigh quotients differ by at most tol (relative) or after `iters`.
double power_iteration(const LinearOp& op, std::size_t iters = 1000, double tol = 1e-12);

}  // namespace mbnn
