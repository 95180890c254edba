#include "mbnn/bayes_linear.hpp"

#include <algorithm>
#include <cmath>

#include "mbnn/conv.hpp"
#include "mbnn/errors.hpp"
#include "mbnn/linalg.hpp"

namespace mbnn::bayes {

namespace {

void check_lambda(double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw ParameterError("lambda must be finite and >= 0, got " + std::to_string(lambda));
    }
}

void check_data(const LinearOp& H, const Tensor& g) {
    if (g.size() != H.output_size()) {
        throw DimensionError("data has " + std::to_string(g.size()) + " entries, operator produces " +
                             std::to_string(H.output_size()));
    }
}

/// |K|^2 of a convolution; throws when lambda = 0 and some frequency is (numerically) lost.
std::vector<double> power_spectrum(const std::vector<Complex>& k, double lambda) {
    std::vector<double> p(k.size());
    double peak = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) {
        p[i] = std::norm(k[i]);
        peak = std::max(peak, p[i]);
    }
    if (lambda == 0.0) {
        const double floor = 1e-13 * peak;
        for (std::size_t i = 0; i < p.size(); ++i)
            if (!(p[i] > floor)) {
                throw SingularityError("H^T H is singular at lambda = 0 (transfer vanishes at frequency " +
                                       std::to_string(i) + ")");
            }
    }
    return p;
}

LinearOp conv_from_transfer(const std::vector<Complex>& t, std::size_t rows, std::size_t cols) {
    return LinearOp::from_kernel(kernel_from_transfer(t, rows, cols), rows, cols);
}

}  // namespace

GaussPriors::GaussPriors(double v_eps_, double v_f_) : v_eps(v_eps_), v_f(v_f_) {
    if (!(v_eps > 0.0)) throw ParameterError("noise variance must be > 0, got " + std::to_string(v_eps));
    if (!(v_f > 0.0)) throw ParameterError("signal variance must be > 0, got " + std::to_string(v_f));
}

Tensor map_estimate(const LinearOp& H, const Tensor& g, double lambda) {
    check_lambda(lambda);
    check_data(H, g);
    if (H.kind() == LinearOp::Kind::matrix) {
        const Tensor M = H.to_matrix();
        const Tensor rhs = matmul_tn(M, g.reshaped({g.size()}));
        return Cholesky(gram_plus_ridge(M, lambda)).solve(rhs).reshaped(H.input_shape());
    }
    const std::size_t rows = H.image_rows(), cols = H.image_cols();
    const auto k = conv_transfer(H.effective_kernel(), rows, cols);
    const auto p = power_spectrum(k, lambda);
    auto spec = to_complex(g.data());
    dft2_inplace(spec, rows, cols, FftDirection::forward);
    for (std::size_t i = 0; i < spec.size(); ++i) spec[i] = std::conj(k[i]) * spec[i] / (p[i] + lambda);
    dft2_inplace(spec, rows, cols, FftDirection::inverse);
    Tensor f({rows, cols});
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = spec[i].real();
    return f;
}

Tensor map_estimate(const LinearOp& H, const Tensor& g, const GaussPriors& priors) {
    return map_estimate(H, g, priors.lambda());
}

Tensor posterior_covariance(const LinearOp& H, const GaussPriors& priors, std::size_t cap) {
    const std::size_t n = H.input_size();
    if (n > cap) {
        throw CapacityError("posterior covariance over " + std::to_string(n) + " unknowns exceeds the cap of " +
                            std::to_string(cap) +
                            "; use a sampling or approximation method instead (MCMC, Perturbation-Optimization, "
                            "Langevin dynamics, or Variational Bayesian Approximation)");
    }
    const Tensor M = H.to_matrix();
    Tensor cov = Cholesky(gram_plus_ridge(M, priors.lambda())).inverse();
    for (auto& v : cov.data()) v *= priors.v_eps;
    return cov;
}

const char* to_string(InverseForm form) noexcept {
    switch (form) {
        case InverseForm::A: return "A";
        case InverseForm::BHt: return "BHt";
        case InverseForm::HtC: return "HtC";
    }
    return "?";
}

InverseFactorization::InverseFactorization(LinearOp H, LinearOp Ht, LinearOp A, LinearOp B, std::optional<LinearOp> C,
                                           double lambda)
    : H_(std::move(H)), Ht_(std::move(Ht)), A_(std::move(A)), B_(std::move(B)), C_(std::move(C)), lambda_(lambda) {}

const LinearOp& InverseFactorization::C() const {
    if (!C_) throw ParameterError("the (H H^T + lambda I)^-1 form needs lambda > 0");
    return *C_;
}

Tensor InverseFactorization::apply(InverseForm form, const Tensor& g) const {
    switch (form) {
        case InverseForm::A: return A_.apply(g);
        case InverseForm::BHt: return B_.apply(Ht_.apply(g));
        case InverseForm::HtC: return Ht_.apply(C().apply(g));
    }
    throw ParameterError("unknown inverse form");
}

InverseFactorization inverse_factorizations(const LinearOp& H, double lambda) {
    check_lambda(lambda);
    if (H.kind() == LinearOp::Kind::matrix) {
        const Tensor M = H.to_matrix();
        const Cholesky normal(gram_plus_ridge(M, lambda));
        LinearOp A = LinearOp::from_matrix(normal.solve(transpose(M)));
        LinearOp B = LinearOp::from_matrix(normal.inverse());
        std::optional<LinearOp> C;
        if (lambda > 0.0) C = LinearOp::from_matrix(Cholesky(outer_gram_plus_ridge(M, lambda)).inverse());
        return InverseFactorization(H, H.adjoint(), std::move(A), std::move(B), std::move(C), lambda);
    }
    const std::size_t rows = H.image_rows(), cols = H.image_cols();
    const auto k = conv_transfer(H.effective_kernel(), rows, cols);
    const auto p = power_spectrum(k, lambda);
    std::vector<Complex> a(k.size()), b(k.size()), ht(k.size());
    for (std::size_t i = 0; i < k.size(); ++i) {
        ht[i] = std::conj(k[i]);
        b[i] = 1.0 / (p[i] + lambda);
        a[i] = ht[i] * b[i];
    }
    std::optional<LinearOp> C;
    // H H^T and H^T H share the transfer |K|^2 for circular convolutions
    if (lambda > 0.0) C = conv_from_transfer(b, rows, cols);
    return InverseFactorization(H, conv_from_transfer(ht, rows, cols), conv_from_transfer(a, rows, cols),
                                conv_from_transfer(b, rows, cols), std::move(C), lambda);
}

}  // namespace mbnn::bayes
