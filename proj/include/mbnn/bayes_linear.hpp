#pragma once

#include <optional>

#include "mbnn/linear_op.hpp"
#include "mbnn/tensor.hpp"

namespace mbnn::bayes {

/// Gaussian noise and signal priors; lambda = v_eps / v_f.
struct GaussPriors {
    double v_eps = 1.0;
    double v_f = 1.0;

    GaussPriors() = default;
    /// Throws ParameterError unless both variances are positive.
    GaussPriors(double v_eps, double v_f);
    double lambda() const noexcept { return v_eps / v_f; }
};

/// Solution of (H^T H + lambda I) f = H^T g. Dense operators use a Cholesky
/// solve; convolutions divide in the Fourier domain. lambda = 0 with a
/// singular normal operator throws SingularityError.
Tensor map_estimate(const LinearOp& H, const Tensor& g, double lambda);
Tensor map_estimate(const LinearOp& H, const Tensor& g, const GaussPriors& priors);

/// Default cap on the unknowns for which a dense covariance is formed.
inline constexpr std::size_t kCovarianceCap = 4096;

/// v_eps (H^T H + lambda I)^-1 as a dense matrix. Convolutions are
/// materialized. Throws CapacityError beyond `cap` unknowns.
Tensor posterior_covariance(const LinearOp& H, const GaussPriors& priors, std::size_t cap = kCovarianceCap);

enum class InverseForm { A, BHt, HtC };

const char* to_string(InverseForm form) noexcept;

/// The three equal regularized inverses of H:
///   A = (H^T H + lambda I)^-1 H^T,  B = (H^T H + lambda I)^-1,  C = (H H^T + lambda I)^-1,
/// so A g = B (H^T g) = H^T (C g). For a convolution H every factor is a
/// circular convolution with a full-size kernel derived from the transfer function.
class InverseFactorization {
public:
    InverseFactorization(LinearOp H, LinearOp Ht, LinearOp A, LinearOp B, std::optional<LinearOp> C, double lambda);

    double lambda() const noexcept { return lambda_; }
    const LinearOp& H() const noexcept { return H_; }
    const LinearOp& Ht() const noexcept { return Ht_; }
    const LinearOp& A() const noexcept { return A_; }
    const LinearOp& B() const noexcept { return B_; }
    /// Throws ParameterError when lambda = 0.
    const LinearOp& C() const;
    bool has_C() const noexcept { return C_.has_value(); }

    /// Applies the chosen factorization to g.
    Tensor apply(InverseForm form, const Tensor& g) const;

private:
    LinearOp H_, Ht_, A_, B_;
    std::optional<LinearOp> C_;
    double lambda_;
};

/// Throws ParameterError for lambda < 0 and SingularityError when lambda = 0
/// and H^T H is singular.
InverseFactorization inverse_factorizations(const LinearOp& H, double lambda);

}  // namespace mbnn::bayes
