#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mbnn/linear_op.hpp"
#include "mbnn/params.hpp"
#include "mbnn/structured_nets.hpp"
#include "mbnn/train.hpp"

namespace mbnn::unfolded {

/// ISTA settings for J(f) = ||g - H f||^2 + lambda ||f||_1.
///
/// The gradient of the data term is 2 H^T (H f - g), so a step of alpha on
/// f + alpha H^T (g - H f) is a proximal step of size alpha / 2 and the
/// matching threshold is lambda * alpha / 2.
struct IstaConfig {
    double lambda = 0.1;
    double alpha = 0.0;
    std::size_t max_iters = 1000;
    double tol = 1e-10;          ///< stop when max |f_{k+1} - f_k| <= tol
    double lipschitz = 0.0;      ///< largest eigenvalue of H^T H
    bool allow_large_step = false;

    /// Builds a config for H. alpha defaults to 1 / L; an explicit alpha with
    /// alpha L > 1 throws ParameterError unless allow_large_step is set.
    static IstaConfig create(const LinearOp& H, double lambda, std::optional<double> alpha = {},
                             std::size_t max_iters = 1000, double tol = 1e-10, bool allow_large_step = false);

    double threshold() const noexcept { return lambda * alpha / 2.0; }
    void validate() const;
};

double lasso_objective(const LinearOp& H, const Tensor& g, const Tensor& f, double lambda);

struct IstaResult {
    Tensor f;
    std::vector<double> objective;  ///< J(f_0 = 0), J(f_1), ...
    std::size_t iterations = 0;
    bool converged = false;
};

/// f_{k+1} = S_{lambda alpha / 2}(f_k + alpha H^T (g - H f_k)), f_0 = 0.
IstaResult ista_solve(const LinearOp& H, const Tensor& g, const IstaConfig& cfg);

/// K-layer unfolded ISTA: f_1 = S_{theta_1}(W0 g), f_{k+1} = S_{theta_{k+1}}(W_{k+1} f_k + W0 g).
/// Parameters: "W0" [n x m]; filters "W" (tied) or "W2".."WK" (untied) [n x n];
/// log-thresholds "theta" (tied) or "theta1".."thetaK" (untied).
struct UnfoldedNet {
    std::size_t layers = 0;
    bool tied = false;
    std::size_t n = 0, m = 0;  // unknowns, data size

    std::string filter(std::size_t k) const;     // k = 2..layers
    std::string threshold(std::size_t k) const;  // k = 1..layers
};

struct Unfolded {
    UnfoldedNet net;
    ParamSet params;
};

/// Initialized so that the untrained forward pass equals K ISTA iterations:
/// W0 = alpha H^T, W = I - alpha H^T H, theta = lambda alpha / 2.
Unfolded unfold(const LinearOp& H, std::size_t K, const IstaConfig& cfg, bool tied);

/// g is [m x batch]; returns the last layer output [n x batch].
Var unfolded_forward(const UnfoldedNet& net, const BoundParams& params, Var g);
/// Outputs of every layer, f_1..f_K.
std::vector<Var> unfolded_layers(const UnfoldedNet& net, const BoundParams& params, Var g);
/// g is [m] or [m x batch].
Tensor unfolded_apply(const UnfoldedNet& net, const ParamSet& params, const Tensor& g);

/// Mean over entries of (net(g) - f*)^2.
double unfolded_mse(const UnfoldedNet& net, const ParamSet& params, const Dataset& data);

struct ListaMetrics {
    double untrained_test_mse = 0.0;
    double trained_test_mse = 0.0;
    std::vector<double> train_history;  ///< per step (steps + 1 entries)
    std::vector<double> epoch_test_mse; ///< test MSE at the start of each epoch and at the end
};

struct ListaResult {
    ParamSet params;
    ListaMetrics metrics;
};

/// Synthetic sparse deconvolution pairs: f* has `sparsity` nonzero entries
/// (random positions, amplitudes uniform in +-[0.5, 1.5]), g = H f* + noise,
/// with H the circulant Gaussian blur of width `blur_sigma` on `dim` samples.
struct SparseBenchmark {
    LinearOp H;
    Dataset train, test;
};
SparseBenchmark make_sparse_deconvolution(std::size_t dim, std::size_t sparsity, std::size_t n_train,
                                          std::size_t n_test, std::uint64_t seed, double blur_sigma = 1.0,
                                          double noise_sd = 0.01);

/// Trains the unfolded net on (g, f*) pairs with MSE to f*. An epoch is
/// ceil(train size / batch size) steps.
ListaResult lista_train(const Unfolded& model, const Dataset& train, const Dataset& test, const TrainConfig& cfg);

}  // namespace mbnn::unfolded
