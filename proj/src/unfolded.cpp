#include "mbnn/unfolded.hpp"

#include <cmath>

#include "mbnn/errors.hpp"
#include "mbnn/linalg.hpp"
#include "mbnn/rng.hpp"

namespace mbnn::unfolded {

namespace {

Tensor soft(const Tensor& x, double theta) {
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double a = std::abs(x[i]) - theta;
        y[i] = a > 0.0 ? std::copysign(a, x[i]) : 0.0;
    }
    return y;
}

Tensor as_columns(const Tensor& g, std::size_t m) {
    if (g.rank() == 2 && g.rows() == m) return g;
    if (g.size() == m) return g.reshaped({m, 1});
    throw DimensionError("data must be [" + std::to_string(m) + "] or [" + std::to_string(m) + " x batch], got " +
                         shape_string(g.shape()));
}

}  // namespace

IstaConfig IstaConfig::create(const LinearOp& H, double lambda, std::optional<double> alpha, std::size_t max_iters,
                              double tol, bool allow_large_step) {
    IstaConfig c;
    c.lambda = lambda;
    c.lipschitz = power_iteration(H);
    if (alpha) {
        c.alpha = *alpha;
    } else {
        if (!(c.lipschitz > 0.0)) throw ParameterError("operator is zero; no default step size");
        c.alpha = 1.0 / c.lipschitz;
    }
    c.max_iters = max_iters;
    c.tol = tol;
    c.allow_large_step = allow_large_step;
    c.validate();
    return c;
}

void IstaConfig::validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ParameterError("lambda must be >= 0");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ParameterError("alpha must be > 0");
    if (!(tol >= 0.0)) throw ParameterError("tol must be >= 0");
    // slack covers the power-iteration estimate used for the default step
    if (!allow_large_step && alpha * lipschitz > 1.0 + 1e-9) {
        throw ParameterError("alpha = " + std::to_string(alpha) + " violates alpha * L <= 1 (L = " +
                             std::to_string(lipschitz) + ")");
    }
}

double lasso_objective(const LinearOp& H, const Tensor& g, const Tensor& f, double lambda) {
    const Tensor r = g.reshaped({g.size()}) - H.apply(f).reshaped({g.size()});
    double l1 = 0.0;
    for (double v : f.data()) l1 += std::abs(v);
    return squared_norm(r) + lambda * l1;
}

IstaResult ista_solve(const LinearOp& H, const Tensor& g, const IstaConfig& cfg) {
    cfg.validate();
    if (g.size() != H.output_size()) throw DimensionError("data size does not match the operator");
    const Tensor gv = g.reshaped(H.output_shape());
    IstaResult res;
    res.f = Tensor(H.input_shape());
    res.objective.push_back(lasso_objective(H, gv, res.f, cfg.lambda));
    const double theta = cfg.threshold();
    for (std::size_t k = 0; k < cfg.max_iters; ++k) {
        const Tensor resid = gv - H.apply(res.f);
        Tensor step = res.f + cfg.alpha * H.apply_adjoint(resid).reshaped(res.f.shape());
        Tensor next = soft(step, theta);
        const double change = max_abs_diff(next, res.f);
        res.f = std::move(next);
        res.objective.push_back(lasso_objective(H, gv, res.f, cfg.lambda));
        res.iterations = k + 1;
        if (change <= cfg.tol) {
            res.converged = true;
            break;
        }
    }
    return res;
}

std::string UnfoldedNet::filter(std::size_t k) const {
    if (k < 2 || k > layers) throw IndexError("filter index " + std::to_string(k) + " outside 2.." + std::to_string(layers));
    return tied ? "W" : "W" + std::to_string(k);
}

std::string UnfoldedNet::threshold(std::size_t k) const {
    if (k < 1 || k > layers) throw IndexError("threshold index " + std::to_string(k) + " outside 1.." + std::to_string(layers));
    return tied ? "theta" : "theta" + std::to_string(k);
}

Unfolded unfold(const LinearOp& H, std::size_t K, const IstaConfig& cfg, bool tied) {
    if (K == 0) throw ParameterError("an unfolded net needs at least one layer");
    cfg.validate();
    const Tensor M = H.to_matrix();
    Unfolded u;
    u.net.layers = K;
    u.net.tied = tied;
    u.net.n = M.cols();
    u.net.m = M.rows();
    u.params.add("W0", cfg.alpha * transpose(M));
    Tensor W = Tensor::identity(u.net.n) - cfg.alpha * matmul_tn(M, M);
    const double log_theta = std::log(cfg.threshold());
    if (tied) {
        if (K >= 2) u.params.add("W", W);
        u.params.add("theta", Tensor::scalar(log_theta));
    } else {
        for (std::size_t k = 2; k <= K; ++k) u.params.add(u.net.filter(k), W);
        for (std::size_t k = 1; k <= K; ++k) u.params.add(u.net.threshold(k), Tensor::scalar(log_theta));
    }
    return u;
}

std::vector<Var> unfolded_layers(const UnfoldedNet& net, const BoundParams& p, Var g) {
    if (g.shape().size() != 2 || g.shape()[0] != net.m) {
        throw DimensionError("unfolded net input must be [" + std::to_string(net.m) + " x batch]");
    }
    const Var bias = ad::matmul(p["W0"], g);
    std::vector<Var> out;
    Var f = ad::soft_threshold(bias, ad::exp(p[net.threshold(1)]));
    out.push_back(f);
    for (std::size_t k = 2; k <= net.layers; ++k) {
        f = ad::soft_threshold(ad::add(ad::matmul(p[net.filter(k)], f), bias), ad::exp(p[net.threshold(k)]));
        out.push_back(f);
    }
    return out;
}

Var unfolded_forward(const UnfoldedNet& net, const BoundParams& params, Var g) {
    return unfolded_layers(net, params, g).back();
}

Tensor unfolded_apply(const UnfoldedNet& net, const ParamSet& params, const Tensor& g) {
    Tape tape;
    const BoundParams p(tape, params);
    const Tensor out = unfolded_forward(net, p, tape.constant(as_columns(g, net.m))).value();
    return g.rank() == 1 ? out.reshaped({net.n}) : out;
}

double unfolded_mse(const UnfoldedNet& net, const ParamSet& params, const Dataset& data) {
    const Tensor out = unfolded_apply(net, params, data.inputs);
    if (out.shape() != data.targets.shape()) throw DimensionError("targets do not match the net output");
    return squared_norm(out - data.targets) / static_cast<double>(out.size());
}

SparseBenchmark make_sparse_deconvolution(std::size_t dim, std::size_t sparsity, std::size_t n_train,
                                          std::size_t n_test, std::uint64_t seed, double blur_sigma, double noise_sd) {
    if (dim == 0 || sparsity > dim) throw ParameterError("sparsity must be <= dim and dim > 0");
    if (!(blur_sigma > 0.0)) throw ParameterError("blur_sigma must be > 0");
    if (!(noise_sd >= 0.0)) throw ParameterError("noise_sd must be >= 0");
    std::vector<double> row(dim);
    double total = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
        const double d = static_cast<double>(std::min(j, dim - j));
        row[j] = std::exp(-0.5 * d * d / (blur_sigma * blur_sigma));
        total += row[j];
    }
    Tensor M({dim, dim});
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) M(i, j) = row[(j + dim - i) % dim] / total;
    SparseBenchmark b{LinearOp::from_matrix(M), {}, {}};

    const CounterRng root(seed);
    const auto make = [&](std::size_t count, std::uint64_t stream) {
        CounterRng rng = root.split(stream);
        Dataset d{Tensor({dim, count}), Tensor({dim, count})};
        std::vector<std::size_t> idx(dim);
        for (std::size_t s = 0; s < count; ++s) {
            for (std::size_t j = 0; j < dim; ++j) idx[j] = j;
            for (std::size_t k = 0; k < sparsity; ++k) {
                const std::size_t j = k + static_cast<std::size_t>(rng.below(dim - k));
                std::swap(idx[k], idx[j]);
                const double amp = 0.5 + rng.uniform();
                d.targets(idx[k], s) = rng.uniform() < 0.5 ? -amp : amp;
            }
        }
        d.inputs = matmul(M, d.targets);
        for (std::size_t i = 0; i < d.inputs.size(); ++i) d.inputs[i] += noise_sd * rng.gaussian();
        return d;
    };
    b.train = make(n_train, 0);
    b.test = make(n_test, 1);
    return b;
}

ListaResult lista_train(const Unfolded& model, const Dataset& train, const Dataset& test, const TrainConfig& cfg) {
    if (train.size() == 0) throw ParameterError("training data is empty");
    if (train.inputs.rows() != model.net.m || train.targets.rows() != model.net.n) {
        throw DimensionError("training pairs do not match the unfolded net");
    }
    const UnfoldedNet& net = model.net;
    const Objective obj = [&](Tape& tape, const std::vector<BoundParams>& p, std::span<const std::size_t> batch) {
        const bool full = batch.size() == train.size();
        const Dataset sub = full ? Dataset{} : train.subset(batch);
        const Dataset& d = full ? train : sub;
        const Var err = ad::sub(unfolded_forward(net, p[0], tape.constant(d.inputs)), tape.constant(d.targets));
        return LossEval{ad::scale_shift(ad::sum_squares(err), 1.0 / static_cast<double>(d.targets.size())), {}};
    };
    ListaResult res;
    res.metrics.untrained_test_mse = unfolded_mse(net, model.params, test);
    const std::size_t batch = cfg.batch_size == 0 || cfg.batch_size >= train.size() ? train.size() : cfg.batch_size;
    const std::size_t epoch = (train.size() + batch - 1) / batch;
    const Monitor monitor = [&](std::size_t step, const std::vector<ParamSet>& ps) {
        if (step % epoch == 0 || step == cfg.steps) res.metrics.epoch_test_mse.push_back(unfolded_mse(net, ps[0], test));
    };
    TrainResult r = optimize({model.params}, train.size(), obj, cfg, monitor);
    res.params = std::move(r.params[0]);
    res.metrics.train_history = std::move(r.history);
    res.metrics.trained_test_mse = unfolded_mse(net, res.params, test);
    return res;
}

}  // namespace mbnn::unfolded
