#include <gtest/gtest.h>

#include <cmath>

#include "mbnn/bayes_linear.hpp"
#include "mbnn/errors.hpp"
#include "mbnn/linalg.hpp"
#include "oracles.hpp"

using namespace mbnn;
using namespace mbnn::bayes;

namespace {

/// (H^T H + lambda I)^-1 H^T g by Gaussian elimination on explicitly formed products.
Tensor oracle_map(const Tensor& H, const Tensor& g, double lambda) {
    const Tensor Ht = oracle::naive_transpose(H);
    Tensor N = oracle::naive_matmul(Ht, H);
    for (std::size_t i = 0; i < N.rows(); ++i) N(i, i) += lambda;
    const Tensor rhs = oracle::naive_matmul(Ht, g.reshaped({g.size(), 1}));
    return oracle::gauss_solve(N, rhs).reshaped({N.rows()});
}

Tensor random_kernel(CounterRng& rng, std::size_t kh, std::size_t kw) {
    return oracle::random_tensor({kh, kw}, rng, 0.0, 1.0);
}

}  // namespace

TEST(GaussPriors, LambdaIsRatio) {
    CounterRng rng(1);
    for (int i = 0; i < 50; ++i) {
        const double a = rng.uniform(1e-3, 10.0), b = rng.uniform(1e-3, 10.0);
        EXPECT_NEAR(GaussPriors(a, b).lambda(), a / b, 1e-15 * (a / b));
    }
    EXPECT_THROW(GaussPriors(0.0, 1.0), ParameterError);
    EXPECT_THROW(GaussPriors(1.0, -1.0), ParameterError);
}

TEST(MapEstimate, IdentityHalves) {
    CounterRng rng(2);
    const Tensor g = oracle::random_tensor({5}, rng);
    const Tensor f = map_estimate(LinearOp::from_matrix(Tensor::identity(5)), g, 1.0);
    EXPECT_LT(max_abs_diff(f, 0.5 * g), 1e-15);
}

TEST(MapEstimate, OrthonormalUnregularized) {
    // rotation matrix
    const double c = std::cos(0.7), s = std::sin(0.7);
    const Tensor Q = Tensor::matrix({{c, -s, 0.0}, {s, c, 0.0}, {0.0, 0.0, 1.0}});
    const Tensor g = Tensor::vec({1.0, -2.0, 0.5});
    const Tensor f = map_estimate(LinearOp::from_matrix(Q), g, 0.0);
    EXPECT_LT(max_abs_diff(f, matmul_tn(Q, g)), 1e-12);
}

TEST(MapEstimate, MatchesGaussianElimination) {
    CounterRng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor H = oracle::random_tensor({8, 8}, rng);
        const Tensor g = oracle::random_tensor({8}, rng);
        const Tensor f = map_estimate(LinearOp::from_matrix(H), g, 0.1);
        EXPECT_LT(max_abs_diff(f, oracle_map(H, g, 0.1)), 1e-8);
        // normal-equation residual bound
        const Tensor r = oracle::naive_matmul(oracle::naive_transpose(H), oracle::naive_matmul(H, f.reshaped({8, 1})));
        const Tensor hg = oracle::naive_matmul(oracle::naive_transpose(H), g.reshaped({8, 1}));
        double res = 0.0;
        for (std::size_t i = 0; i < 8; ++i) res += std::pow(r[i] + 0.1 * f[i] - hg[i], 2);
        EXPECT_LT(std::sqrt(res), 1e-8 * (1.0 + norm2(hg)));
    }
}

TEST(MapEstimate, SingularAtZeroLambda) {
    const Tensor H = Tensor::matrix({{1.0, 1.0}, {1.0, 1.0}});
    EXPECT_THROW(map_estimate(LinearOp::from_matrix(H), Tensor({2}), 0.0), SingularityError);
    Tensor k({3, 3}, 1.0 / 9.0);  // box blur on 6x6 loses frequencies
    EXPECT_THROW(map_estimate(LinearOp::from_kernel(k, 6, 6), Tensor({6, 6}), 0.0), SingularityError);
    EXPECT_THROW(map_estimate(LinearOp::from_matrix(H), Tensor({2}), -1.0), ParameterError);
    EXPECT_THROW(map_estimate(LinearOp::from_matrix(H), Tensor({3}), 1.0), DimensionError);
}

TEST(MapEstimate, ShrinksMonotonicallyWithLambda) {
    CounterRng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const LinearOp H = LinearOp::from_matrix(oracle::random_tensor({7, 5}, rng));
        const Tensor g = oracle::random_tensor({7}, rng);
        double prev = norm2(map_estimate(H, g, 1.0));
        for (double lam : {10.0, 100.0, 1000.0}) {
            const double cur = norm2(map_estimate(H, g, lam));
            EXPECT_LT(cur, prev);
            prev = cur;
        }
    }
}

TEST(MapEstimate, ConvolutionMatchesDenseCirculant) {
    CounterRng rng(5);
    for (auto [kh, kw] : {std::pair<std::size_t, std::size_t>{3, 3}, {5, 3}, {2, 4}, {8, 8}}) {
        const LinearOp H = LinearOp::from_kernel(random_kernel(rng, kh, kw), 8, 8);
        const Tensor g = oracle::random_tensor({8, 8}, rng);
        for (double lam : {0.01, 0.5}) {
            const Tensor dense = map_estimate(LinearOp::from_matrix(H.to_matrix()), g.reshaped({64}), lam);
            EXPECT_LT(max_abs_diff(map_estimate(H, g, lam).reshaped({64}), dense), 1e-9);
        }
    }
    // non-power-of-two extents take the direct transform path
    const LinearOp H = LinearOp::from_kernel(random_kernel(rng, 3, 3), 6, 5);
    const Tensor g = oracle::random_tensor({6, 5}, rng);
    const Tensor dense = map_estimate(LinearOp::from_matrix(H.to_matrix()), g.reshaped({30}), 0.2);
    EXPECT_LT(max_abs_diff(map_estimate(H, g, 0.2).reshaped({30}), dense), 1e-9);
    // adjoint convolution operator
    const Tensor ga = oracle::random_tensor({6, 5}, rng);
    const Tensor da = map_estimate(LinearOp::from_matrix(H.adjoint().to_matrix()), ga.reshaped({30}), 0.2);
    EXPECT_LT(max_abs_diff(map_estimate(H.adjoint(), ga, 0.2).reshaped({30}), da), 1e-9);
}

TEST(PosteriorCovariance, KnownCases) {
    const Tensor I2 = posterior_covariance(LinearOp::from_matrix(Tensor::identity(3)), GaussPriors(1.0, 1.0));
    EXPECT_LT(max_abs_diff(I2, 0.5 * Tensor::identity(3)), 1e-15);
    const Tensor d = posterior_covariance(LinearOp::from_matrix(Tensor::matrix({{1.0, 0.0}, {0.0, 2.0}})),
                                          GaussPriors(1.0, 1.0));
    EXPECT_LT(max_abs_diff(d, Tensor::matrix({{0.5, 0.0}, {0.0, 0.2}})), 1e-15);
}

TEST(PosteriorCovariance, LinearInNoiseVariance) {
    CounterRng rng(6);
    const LinearOp H = LinearOp::from_matrix(oracle::random_tensor({6, 4}, rng));
    const Tensor a = posterior_covariance(H, GaussPriors(0.3, 1.5));
    const Tensor b = posterior_covariance(H, GaussPriors(0.6, 3.0));
    EXPECT_LT(max_abs_diff(b, 2.0 * a), 1e-12 * max_abs(b));
}

TEST(PosteriorCovariance, SymmetricPositiveDefinite) {
    CounterRng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const LinearOp H = LinearOp::from_matrix(oracle::random_tensor({5, 6}, rng));
        const Tensor S = posterior_covariance(H, GaussPriors(rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0)));
        EXPECT_LT(max_abs_diff(S, oracle::naive_transpose(S)), 1e-12);
        const Tensor piv = Cholesky(S).pivots();
        for (double p : piv.data()) EXPECT_GT(p, 0.0);
    }
    const Tensor S = posterior_covariance(LinearOp::from_kernel(random_kernel(rng, 3, 3), 4, 4), GaussPriors(1.0, 4.0));
    EXPECT_EQ(S.rows(), 16u);
}

TEST(PosteriorCovariance, CapacityErrorNamesAlternatives) {
    const LinearOp H = LinearOp::from_kernel(Tensor({3, 3}, 1.0 / 9.0), 65, 64);
    try {
        (void)posterior_covariance(H, GaussPriors(1.0, 1.0));
        FAIL() << "expected CapacityError";
    } catch (const CapacityError& e) {
        const std::string msg = e.what();
        for (const char* name : {"MCMC", "Perturbation-Optimization", "Langevin", "Variational Bayesian"})
            EXPECT_NE(msg.find(name), std::string::npos) << name;
    }
    EXPECT_THROW(posterior_covariance(LinearOp::from_matrix(Tensor::identity(10)), GaussPriors(), 9), CapacityError);
}

TEST(InverseFactorizations, IdentityAndScalar) {
    const InverseFactorization f = inverse_factorizations(LinearOp::from_matrix(Tensor::identity(4)), 1.0);
    const Tensor g = Tensor::vec({1.0, 2.0, 3.0, 4.0});
    for (auto form : {InverseForm::A, InverseForm::BHt, InverseForm::HtC})
        EXPECT_LT(max_abs_diff(f.apply(form, g), 0.5 * g), 1e-15);
    const double h = 3.0, lam = 0.7;
    const InverseFactorization s = inverse_factorizations(LinearOp::from_matrix(Tensor::matrix({{h}})), lam);
    const Tensor one = Tensor::vec({2.0});
    for (auto form : {InverseForm::A, InverseForm::BHt, InverseForm::HtC})
        EXPECT_NEAR(s.apply(form, one)[0], h * 2.0 / (h * h + lam), 1e-15);
}

TEST(InverseFactorizations, PushThroughAgreesWithOracle) {
    CounterRng rng(8);
    const Tensor H = oracle::random_tensor({6, 4}, rng);
    const Tensor g = oracle::random_tensor({6}, rng);
    const InverseFactorization f = inverse_factorizations(LinearOp::from_matrix(H), 0.5);
    const Tensor want = oracle_map(H, g, 0.5);
    EXPECT_LT(max_abs_diff(f.apply(InverseForm::A, g), want), 1e-9);
    EXPECT_LT(max_abs_diff(f.apply(InverseForm::BHt, g), want), 1e-9);
    EXPECT_LT(max_abs_diff(f.apply(InverseForm::HtC, g), want), 1e-9);
}

TEST(InverseFactorizations, PushThroughRandom200) {
    CounterRng rng(9);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t m = 1 + rng.below(7), n = 1 + rng.below(7);
        const Tensor H = oracle::random_tensor({m, n}, rng);
        const double lam = rng.uniform(0.05, 3.0);
        const Tensor g = oracle::random_tensor({m}, rng);
        const InverseFactorization f = inverse_factorizations(LinearOp::from_matrix(H), lam);
        const Tensor a = f.apply(InverseForm::A, g);
        const double scale = std::max(norm2(a), 1e-300);
        EXPECT_LT(norm2(a - f.apply(InverseForm::BHt, g)) / scale, 1e-9);
        EXPECT_LT(norm2(a - f.apply(InverseForm::HtC, g)) / scale, 1e-9);
    }
}

TEST(InverseFactorizations, ConvolutionFormsAreConvolutions) {
    CounterRng rng(10);
    const LinearOp H = LinearOp::from_kernel(random_kernel(rng, 3, 3), 8, 8);
    const InverseFactorization f = inverse_factorizations(H, 0.05);
    EXPECT_EQ(f.A().kind(), LinearOp::Kind::convolution);
    EXPECT_EQ(f.B().kind(), LinearOp::Kind::convolution);
    EXPECT_EQ(f.C().kind(), LinearOp::Kind::convolution);
    EXPECT_EQ(f.Ht().kind(), LinearOp::Kind::convolution);
    for (int trial = 0; trial < 10; ++trial) {
        const Tensor g = oracle::random_tensor({8, 8}, rng);
        const Tensor want = oracle_map(H.to_matrix(), g.reshaped({64}), 0.05).reshaped({8, 8});
        for (auto form : {InverseForm::A, InverseForm::BHt, InverseForm::HtC})
            EXPECT_LT(max_abs_diff(f.apply(form, g), want), 1e-9) << to_string(form);
    }
}

TEST(InverseFactorizations, ZeroLambda) {
    const InverseFactorization f = inverse_factorizations(LinearOp::from_matrix(Tensor::matrix({{2.0, 0.0}, {1.0, 1.0}})), 0.0);
    EXPECT_FALSE(f.has_C());
    EXPECT_THROW(f.C(), ParameterError);
    EXPECT_THROW(f.apply(InverseForm::HtC, Tensor({2})), ParameterError);
    EXPECT_NO_THROW(f.apply(InverseForm::A, Tensor({2})));
    EXPECT_THROW(inverse_factorizations(LinearOp::from_matrix(Tensor::matrix({{1.0, 1.0}})), 0.0), SingularityError);
}
