#pragma once

#include "mbnn/tensor.hpp"

namespace mbnn {

/// Matrix product of a [m x k] and b [k x n]. Rank-1 operands are treated as columns.
Tensor matmul(const Tensor& a, const Tensor& b);
/// a^T b without materializing the transpose.
Tensor matmul_tn(const Tensor& a, const Tensor& b);
/// a b^T without materializing the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);

// Raw kernels used by the tape; all row-major, out is overwritten.
void gemm_nn(const double* a, const double* b, double* out, std::size_t m, std::size_t k, std::size_t n);
void gemm_tn(const double* a, const double* b, double* out, std::size_t m, std::size_t k, std::size_t n);
void gemm_nt(const double* a, const double* b, double* out, std::size_t m, std::size_t k, std::size_t n);

/// Lower Cholesky factor of a symmetric positive-definite matrix.
///
/// Throws SingularityError when a pivot is not positive (relative to the
/// largest diagonal entry), which is how callers detect a singular normal
/// system at zero regularization.
class Cholesky {
public:
    explicit Cholesky(const Tensor& spd);

    std::size_t dim() const noexcept { return n_; }
    /// Solve A X = B for a vector or a matrix right-hand side.
    Tensor solve(const Tensor& rhs) const;
    Tensor inverse() const;
    /// Squared diagonal of L, i.e. the pivots of the LDL^T form.
    Tensor pivots() const;

private:
    std::size_t n_;
    Tensor lower_;
};

/// A^T A + lambda I.
Tensor gram_plus_ridge(const Tensor& a, double lambda);
/// A A^T + lambda I.
Tensor outer_gram_plus_ridge(const Tensor& a, double lambda);

}  // namespace mbnn
