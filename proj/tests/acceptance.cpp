// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails. Optional arguments select criteria by number.

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "mbnn/bayes_linear.hpp"
#include "mbnn/forward_models.hpp"
#include "mbnn/harness.hpp"
#include "mbnn/io.hpp"
#include "mbnn/pinn.hpp"
#include "mbnn/structured_nets.hpp"
#include "mbnn/transforms.hpp"
#include "mbnn/unfolded.hpp"
#include "oracles.hpp"

using namespace mbnn;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    double budget_s;
    std::function<Outcome()> run;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

/// Tracks the worst value of a quantity that must stay below a bound.
struct Worst {
    explicit Worst(double b) : bound(b) {}

    double bound;
    double value = 0.0;
    std::string where;

    void see(double v, const std::string& at) {
        if (!(v <= value)) {
            value = v;
            where = at;
        }
    }
    bool ok() const { return value < bound; }
    std::string text(const std::string& what) const {
        return what + " max " + fmt(value) + (where.empty() ? "" : " at " + where) + " (bound " + fmt(bound) + ")";
    }
};

// ---------------------------------------------------------------------------
// 1. Unfolded ISTA equals the reference loop.

std::vector<double> reference_ista(const Tensor& H, const Tensor& g, double alpha, double theta, std::size_t iters) {
    const std::size_t m = H.rows(), n = H.cols();
    std::vector<double> f(n, 0.0), r(m), next(n);
    for (std::size_t k = 0; k < iters; ++k) {
        for (std::size_t i = 0; i < m; ++i) {
            double s = g[i];
            for (std::size_t j = 0; j < n; ++j) s -= H(i, j) * f[j];
            r[i] = s;
        }
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < m; ++i) s += H(i, j) * r[i];
            const double v = f[j] + alpha * s;
            next[j] = std::abs(v) > theta ? v - std::copysign(theta, v) : 0.0;
        }
        f = next;
    }
    return f;
}

Outcome unfolding_exactness() {
    Worst w{1e-10};
    for (std::uint64_t s = 0; s < 20; ++s) {
        CounterRng rng(1000 + s);
        const std::size_t m = 8 + (s * 17) % 57, n = 8 + (s * 29) % 57;
        const Tensor Hm = oracle::random_tensor({m, n}, rng);
        const Tensor g = oracle::random_tensor({m}, rng);
        const LinearOp H = LinearOp::from_matrix(Hm);
        const auto cfg = unfolded::IstaConfig::create(H, 0.01 + 0.03 * static_cast<double>(s % 5));
        for (std::size_t K = 1; K <= 8; ++K) {
            const std::vector<double> ref = reference_ista(Hm, g, cfg.alpha, cfg.threshold(), K);
            double scale = 0.0;
            for (double v : ref) scale = std::max(scale, std::abs(v));
            for (bool tied : {true, false}) {
                const auto u = unfolded::unfold(H, K, cfg, tied);
                const Tensor out = unfolded::unfolded_apply(u.net, u.params, g);
                double d = 0.0;
                for (std::size_t i = 0; i < n; ++i) d = std::max(d, std::abs(out[i] - ref[i]));
                w.see(d / std::max(scale, 1e-300),
                      "problem " + std::to_string(s) + " K=" + std::to_string(K) + (tied ? " tied" : " untied"));
            }
        }
    }
    return {w.ok(), w.text("relative deviation over 20 problems x K=1..8 x tied/untied")};
}

// ---------------------------------------------------------------------------
// 2. Analytic nets agree with the MAP estimate.

Outcome analytic_nets() {
    Worst net_vs_map{1e-9}, map_vs_oracle{1e-9};
    const bayes::InverseForm forms[] = {bayes::InverseForm::A, bayes::InverseForm::BHt, bayes::InverseForm::HtC};
    for (std::uint64_t s = 0; s < 50; ++s) {
        CounterRng rng(2000 + s);
        const std::size_t m = 2 + rng.below(23), n = 2 + rng.below(23);
        const Tensor Hm = oracle::random_tensor({m, n}, rng);
        const double lambda = rng.uniform(0.05, 2.0);
        const Tensor g = oracle::random_tensor({m}, rng);
        const LinearOp H = LinearOp::from_matrix(Hm);
        const Tensor f = bayes::map_estimate(H, g, lambda);

        const Tensor Ht = oracle::naive_transpose(Hm);
        Tensor A = oracle::naive_matmul(Ht, Hm);
        for (std::size_t i = 0; i < n; ++i) A(i, i) += lambda;
        const Tensor want = oracle::gauss_solve(A, oracle::naive_matmul(Ht, g.reshaped({m, 1}))).reshaped({n});
        map_vs_oracle.see(max_abs_diff(f, want), "problem " + std::to_string(s));

        for (auto form : forms) {
            const Net net = build_analytic_net(H, lambda, form);
            net_vs_map.see(max_abs_diff(evaluate(net.spec, net.params, g), f),
                           "problem " + std::to_string(s) + " form " + bayes::to_string(form));
        }
    }
    return {net_vs_map.ok() && map_vs_oracle.ok(),
            net_vs_map.text("|net - map|") + "; " + map_vs_oracle.text("|map - dense oracle|")};
}

// ---------------------------------------------------------------------------
// 3. Gradients against central differences.

/// Reverse-mode gradients of build over every trainable entry of the sets,
/// against central differences of the same build on fresh tapes.
double grad_error(const std::vector<ParamSet>& sets, const std::function<Var(const std::vector<BoundParams>&)>& build) {
    const auto eval = [&](const std::vector<ParamSet>& s) {
        Tape tape;
        std::vector<BoundParams> b;
        for (const auto& p : s) b.emplace_back(tape, p);
        return build(b).value().item();
    };
    std::vector<Tensor> rev, num;
    {
        Tape tape;
        std::vector<BoundParams> b;
        for (const auto& p : sets) b.emplace_back(tape, p);
        const Gradients g = tape.backward(build(b));
        for (std::size_t k = 0; k < sets.size(); ++k) {
            const ParamGrads pg = b[k].gradients(g);
            for (const auto& e : sets[k].entries())
                if (e.trainable) rev.push_back(pg.at(e.name));
        }
    }
    for (std::size_t k = 0; k < sets.size(); ++k) {
        for (const auto& e : sets[k].entries()) {
            if (!e.trainable) continue;
            Tensor d(e.value.shape());
            for (std::size_t i = 0; i < d.size(); ++i) {
                std::vector<ParamSet> plus = sets, minus = sets;
                Tensor w = e.value;
                w[i] = e.value[i] + 1e-6;
                plus[k].set(e.name, w);
                w[i] = e.value[i] - 1e-6;
                minus[k].set(e.name, w);
                d[i] = (eval(plus) - eval(minus)) / 2e-6;
            }
            num.push_back(std::move(d));
        }
    }
    return oracle::grad_rel_error(rev, num);
}

double net_grad_error(const Net& net, const Tensor& x, const Tensor& t) {
    return grad_error({net.params}, [&](const std::vector<BoundParams>& b) {
        Tape& tape = b[0].tape();
        return ad::sum_squares(ad::sub(net_forward(net.spec, b[0], tape.constant(x)), tape.constant(t)));
    });
}

Net single(std::size_t in, const std::function<void(Net&)>& add) {
    Net net;
    net.spec.input_size = in;
    add(net);
    return net;
}

Outcome gradient_suite() {
    Worst w{1e-5};
    std::set<std::string> kinds;
    std::size_t checks = 0;
    auto see = [&](double e, const std::string& what, std::uint64_t seed) {
        w.see(e, what + " seed " + std::to_string(seed));
        kinds.insert(what);
        ++checks;
    };
    for (std::uint64_t s = 0; s < 100; ++s) {
        CounterRng r = CounterRng(3000).split(s);
        auto rt = [&](Shape shape, double lo = -1.0, double hi = 1.0) { return oracle::random_tensor(shape, r, lo, hi); };

        // Layer kinds.
        see(net_grad_error(single(3, [&](Net& n) { n.spec.layers.push_back(affine_layer(n.params, "a", rt({4, 3}), rt({4}))); }),
                           rt({3, 2}), rt({4, 2})),
            "affine", s);
        for (Activation act : {Activation::identity, Activation::tanh, Activation::sin}) {
            const Net net = single(3, [&](Net& n) {
                n.spec.layers.push_back(affine_layer(n.params, "a", rt({4, 3}), rt({4})));
                n.spec.layers.push_back(pointwise_layer(4, act));
            });
            see(net_grad_error(net, rt({3, 2}), rt({4, 2})), std::string("pointwise ") + to_string(act), s);
        }
        see(net_grad_error(single(20, [&](Net& n) { n.spec.layers.push_back(conv_layer(n.params, "k", rt({3, 3}), 4, 5)); }),
                           rt({20, 2}), rt({20, 2})),
            "conv", s);
        for (bool log_space : {true, false}) {
            const Net net = single(6, [&](Net& n) {
                n.spec.layers.push_back(affine_layer(n.params, "a", rt({6, 6})));
                n.spec.layers.push_back(soft_threshold_layer(n.params, "st", 6, r.uniform(0.05, 0.3), log_space));
            });
            see(net_grad_error(net, rt({6, 3}), rt({6, 3})), log_space ? "soft threshold (log)" : "soft threshold", s);
        }
        see(net_grad_error(single(5, [&](Net& n) {
                               n.spec.layers.push_back(affine_layer(n.params, "a", rt({5, 5}), rt({5})));
                               n.spec.layers.push_back(mask_layer(n.params, "m", rt({5}, 0.0, 2.0), 5));
                           }),
                           rt({5, 2}), rt({5, 2})),
            "diag mask", s);
        see(net_grad_error(single(4, [&](Net& n) {
                               n.spec.layers.push_back(affine_layer(n.params, "a", rt({4, 4})));
                               n.spec.layers.push_back(pointwise_layer(4, Activation::tanh));
                               n.spec.layers.push_back(residual_layer(4, 0, r.uniform(-1.0, 1.0), r.uniform(-1.0, 1.0)));
                           }),
                           rt({4, 2}), rt({4, 2})),
            "residual add", s);
        see(net_grad_error(build_transform_net(TransformKind::fft, 4, 4, 1, rt({4, 4}, 0.0, 2.0)), rt({16, 2}), rt({16, 2})),
            "transform fft", s);
        see(net_grad_error(build_transform_net(TransformKind::haar, 4, 8, 2, rt({4, 8}, 0.0, 2.0)), rt({32, 2}), rt({32, 2})),
            "transform haar", s);
        {
            const Net mlp = make_mlp({1, 5, 1}, s % 2 ? Activation::tanh : Activation::sin, s);
            const Tensor x = rt({1, 4});
            see(grad_error({mlp.params},
                           [&](const std::vector<BoundParams>& b) {
                               Tape& tape = b[0].tape();
                               const Dual d = forward_tangent(mlp.spec, b[0], tape.constant(x), tape.constant(Tensor({1, 4}, 1.0)));
                               return ad::add(ad::sum_squares(d.tangent), ad::sum_squares(d.value));
                           }),
                "tangent pass", s);
        }
        {
            const Tensor Hm = rt({5, 4});
            const LinearOp H = LinearOp::from_matrix(Hm);
            const auto cfg = unfolded::IstaConfig::create(H, 0.05);
            const Tensor g = rt({5, 3}), t = rt({4, 3});
            for (bool tied : {true, false}) {
                const auto u = unfolded::unfold(H, 3, cfg, tied);
                see(grad_error({u.params},
                               [&](const std::vector<BoundParams>& b) {
                                   Tape& tape = b[0].tape();
                                   return ad::sum_squares(
                                       ad::sub(unfolded::unfolded_forward(u.net, b[0], tape.constant(g)), tape.constant(t)));
                               }),
                    tied ? "unfolded tied" : "unfolded untied", s);
            }
        }

        // Physics-informed losses.
        {
            const LinearOp H = LinearOp::from_matrix(rt({3, 2}));
            const Net en = single(3, [&](Net& n) { n.spec.layers.push_back(affine_layer(n.params, "A", rt({2, 3}), rt({2}))); });
            const Tensor batch = rt({3, 4}), fbar = rt({2});
            const double se = r.uniform(0.5, 1.5), sf = r.uniform(0.5, 1.5);
            auto gb = [&](const std::vector<BoundParams>& b) { return b[0].tape().constant(batch); };
            see(grad_error({en.params}, [&](const auto& b) { return pinn::explicit_terms(en.spec, b[0], H, gb(b)).total; }),
                "explicit operator loss", s);
            see(grad_error({en.params},
                           [&](const auto& b) { return pinn::two_part_terms(en.spec, b[0], H, gb(b), se, sf, fbar).total; }),
                "two-part loss", s);
            see(grad_error({en.params}, [&](const auto& b) { return pinn::trace_terms(en.spec, b[0], H, gb(b), fbar).total; }),
                "trace loss", s);
        }
        {
            ParamSet pu, pf;
            const pinn::Field u = pinn::default_field(1, 1, 500 + s, pu, "u", 5, 2);
            const pinn::Field f = pinn::default_field(2, 1, 600 + s, pf, "f", 5, 2);
            const pinn::OdeData d{rt({4}), rt({4})};
            const Tensor colloc = rt({5});
            const pinn::Rhs rhs = [](Var t, Var v) { return ad::sub(ad::mul(t, v), ad::square(v)); };
            see(grad_error({pu}, [&](const auto& b) { return pinn::ode_terms(u, b[0], d, colloc, rhs).total; }),
                "ode loss", s);
            see(grad_error({pu, pinn::make_theta(r.uniform(-1.5, 0.5), r.uniform(-1.0, 1.0))},
                           [&](const auto& b) { return pinn::parametric_terms(u, b[0], b[1], d, colloc).total; }),
                "parametric loss with theta", s);
            see(grad_error({pu, pf}, [&](const auto& b) { return pinn::nonparametric_terms(u, b[0], f, b[1], d, colloc).total; }),
                "nonparametric loss", s);
        }
        for (bool plus : {false, true}) {
            ParamSet px;
            const pinn::Field ux = pinn::default_field(2, 1, 700 + s, px, "u", 5, 2);
            pinn::PdeSets sets;
            sets.colloc = pinn::sample_box({0, 0}, {1, 1}, 6, 40 + s);
            sets.data = {pinn::sample_box({0, 0}, {1, 1}, 3, 50 + s), rt({3})};
            sets.ic = {pinn::grid2(0, 1, 3, 0, 0, 1), rt({3})};
            sets.bc = {pinn::grid2(0, 0, 1, 0, 1, 3), rt({3})};
            sets.ic_weight = r.uniform(0.5, 2.0);
            sets.bc_weight = r.uniform(0.5, 2.0);
            sets.bc_plus = plus;
            see(grad_error({px}, [&](const auto& b) { return pinn::pde_terms(ux, b[0], sets).total; }),
                plus ? "advection loss (plus boundary)" : "advection loss", s);
        }
    }
    return {w.ok(), std::to_string(checks) + " checks over " + std::to_string(kinds.size()) + " kinds, " +
                        w.text("relative error")};
}

// ---------------------------------------------------------------------------
// 4. Transform identities.

Outcome transform_identities() {
    Worst ident{1e-12}, parseval{1e-10};
    CounterRng rng(4000);
    const std::pair<std::size_t, std::size_t> fft_sizes[] = {{1, 64}, {4, 4}, {8, 8}, {8, 16}, {16, 16}, {32, 32}};
    for (auto [rows, cols] : fft_sizes) {
        const std::string at = std::to_string(rows) + "x" + std::to_string(cols);
        const Net net = build_transform_net(TransformKind::fft, rows, cols, 1, Tensor::filled({rows, cols}, 1.0));
        const Tensor x = oracle::random_tensor({rows * cols, 4}, rng);
        ident.see(max_abs_diff(evaluate(net.spec, net.params, x), x), "fft " + at);
        const Tensor img = oracle::random_tensor({rows, cols}, rng);
        parseval.see(std::abs(squared_norm(fft(to_complex_pair(img), FftDirection::forward)) - squared_norm(img)), "fft " + at);
    }
    const std::pair<std::size_t, std::size_t> haar_sizes[] = {{8, 8}, {16, 32}, {32, 32}, {4, 64}};
    for (auto [rows, cols] : haar_sizes) {
        for (std::size_t levels = 1; (rows % (std::size_t{1} << levels)) == 0 && (cols % (std::size_t{1} << levels)) == 0;
             ++levels) {
            const std::string at = std::to_string(rows) + "x" + std::to_string(cols) + " levels " + std::to_string(levels);
            const Net net = build_transform_net(TransformKind::haar, rows, cols, levels, Tensor::filled({rows, cols}, 1.0));
            const Tensor x = oracle::random_tensor({rows * cols, 4}, rng);
            ident.see(max_abs_diff(evaluate(net.spec, net.params, x), x), "haar " + at);
            const Tensor img = oracle::random_tensor({rows, cols}, rng);
            parseval.see(std::abs(squared_norm(haar_forward(img, levels)) - squared_norm(img)), "haar " + at);
        }
    }
    return {ident.ok() && parseval.ok(), ident.text("|net(x) - x|") + "; " + parseval.text("| ||Tx||^2 - ||x||^2 |")};
}

// ---------------------------------------------------------------------------
// 5. ISTA monotonicity and optimality.

Outcome ista_correctness() {
    Worst rise{1e-300}, kkt{1e-6};
    std::size_t unconverged = 0;
    for (std::uint64_t s = 0; s < 50; ++s) {
        CounterRng rng(5000 + s);
        const std::size_t m = 6 + s % 9, n = 10 + s % 13;
        const Tensor Hm = oracle::random_tensor({m, n}, rng);
        const Tensor g = oracle::random_tensor({m}, rng);
        const double lambda = 0.05 + 0.02 * static_cast<double>(s % 5);
        const LinearOp H = LinearOp::from_matrix(Hm);
        const std::string at = "problem " + std::to_string(s);

        const auto path = unfolded::ista_solve(H, g, unfolded::IstaConfig::create(H, lambda, {}, 300, 0.0));
        for (std::size_t k = 1; k < path.objective.size(); ++k)
            rise.see(std::max(0.0, path.objective[k] - path.objective[k - 1] - 1e-12), at + " step " + std::to_string(k));

        const auto sol = unfolded::ista_solve(H, g, unfolded::IstaConfig::create(H, lambda, {}, 2'000'000, 1e-15));
        if (!sol.converged) ++unconverged;
        for (std::size_t j = 0; j < n; ++j) {
            double c = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                double ri = g[i];
                for (std::size_t k = 0; k < n; ++k) ri -= Hm(i, k) * sol.f[k];
                c += Hm(i, j) * ri;
            }
            const double v = sol.f[j] == 0.0 ? std::max(0.0, std::abs(c) - lambda / 2)
                                             : std::abs(c - std::copysign(lambda / 2, sol.f[j]));
            kkt.see(v, at + " coordinate " + std::to_string(j));
        }
    }
    return {rise.value == 0.0 && kkt.ok() && unconverged == 0,
            "objective increase max " + fmt(rise.value) + " (tolerance 1e-12 per step); " + kkt.text("KKT violation") +
                "; unconverged " + std::to_string(unconverged)};
}

// ---------------------------------------------------------------------------
// 6. Learned unfolded networks improve on ISTA.

Outcome lista_benefit() {
    bool ok = true;
    std::ostringstream d;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto b = unfolded::make_sparse_deconvolution(64, 5, 500, 100, seed);
        const auto cfg = unfolded::IstaConfig::create(b.H, 0.05);
        TrainConfig tc;
        tc.learning_rate = 1e-3;
        tc.steps = 600;
        tc.batch_size = 100;
        tc.seed = seed;
        const auto tied = unfolded::lista_train(unfolded::unfold(b.H, 6, cfg, true), b.train, b.test, tc);
        const auto untied = unfolded::lista_train(unfolded::unfold(b.H, 6, cfg, false), b.train, b.test, tc);
        const double u0 = tied.metrics.untrained_test_mse, t = tied.metrics.trained_test_mse,
                     u = untied.metrics.trained_test_mse;
        const bool pass = u < t && t <= u0;
        ok = ok && pass;
        d << (seed ? "; " : "") << "seed " << seed << ": untied " << fmt(u) << " tied " << fmt(t) << " untrained " << fmt(u0)
          << (pass ? "" : " VIOLATED");
    }
    return {ok, d.str()};
}

// ---------------------------------------------------------------------------
// 7. Parametric ODE recovery.

Outcome pinn_recovery() {
    bool ok = true;
    std::ostringstream d;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        pinn::OdeData data{pinn::linspace(0.0, 3.0, 50), Tensor({50})};
        for (std::size_t i = 0; i < 50; ++i) data.u[i] = 0.5 + 0.5 * std::exp(-data.t[i]);
        const pinn::OdeParametricProblem problem{data, pinn::linspace(0.0, 3.0, 50)};
        pinn::PinnModel model;
        model.u = pinn::default_field(1, 1, seed, model.u_params);
        model.theta = pinn::make_theta(0.0, 0.0);
        TrainConfig tc;
        tc.learning_rate = 1e-3;
        tc.steps = 20000;
        tc.seed = seed;
        const auto r = pinn::train_pinn(problem, model, tc);
        const double a = r.model.theta.get("a").item(), b = r.model.theta.get("b").item();
        const bool pass = std::abs(a + 1.0) <= 0.1 && std::abs(b - 0.5) <= 0.05;
        ok = ok && pass;
        d << (seed ? "; " : "") << "seed " << seed << ": a " << fmt(a) << " b " << fmt(b) << (pass ? "" : " OUTSIDE 10%");
    }
    return {ok, d.str()};
}

// ---------------------------------------------------------------------------
// 8. Advection residual of the exact solution.

Outcome pde_residual() {
    const pinn::Field u = pinn::Field::analytic(
        2, 1,
        [](const Tensor& p) {
            Tensor v({1, p.cols()});
            for (std::size_t j = 0; j < p.cols(); ++j) v[j] = std::exp(p(1, j)) * std::sin(p(0, j) - p(1, j));
            return v;
        },
        [](const Tensor& p, std::size_t c) {
            Tensor d({1, p.cols()});
            for (std::size_t j = 0; j < p.cols(); ++j) {
                const double x = p(0, j), t = p(1, j);
                d[j] = c == 0 ? std::exp(t) * std::cos(x - t) : std::exp(t) * (std::sin(x - t) - std::cos(x - t));
            }
            return d;
        });
    const Tensor pts = pinn::interior_grid2(0.0, 2.0 * std::numbers::pi, 32, 0.0, 1.0, 32);
    const Tensor r = pinn::advection_residual(u, {}, pts);
    Worst w{1e-6};
    for (std::size_t j = 0; j < r.size(); ++j) w.see(std::abs(r[j]), "point " + std::to_string(j));
    return {w.ok() && pts.cols() == 900, std::to_string(pts.cols()) + " interior points, " + w.text("|residual|")};
}

// ---------------------------------------------------------------------------
// 9. Radiometric map.

using big = boost::multiprecision::cpp_bin_float_50;

big phi_oracle(double f, const forward::IRParams& p) {
    const big kd = big(p.k) * big(p.d);
    const big num = big(p.e) * pow(big(f), big(p.n)) + (1 - big(p.e)) * pow(big(p.Tu), big(p.n)) + (exp(-kd) - 1) * big(p.Ta);
    return pow(num / exp(kd), 1 / big(p.n));
}

Outcome ir_model() {
    CounterRng rng(9000);
    std::size_t identity_misses = 0;
    for (int i = 0; i < 1000; ++i) {
        forward::IRParams p;
        p.e = 1.0;
        p.Tu = rng.uniform(250.0, 350.0);
        p.Ta = rng.uniform(250.0, 320.0);
        p.n = rng.uniform(1.0, 5.0);
        if (i % 2) {
            p.k = 0.0;
            p.d = rng.uniform(0.0, 50.0);
        } else {
            p.k = rng.uniform(0.0, 0.05);
            p.d = 0.0;
        }
        const double f = rng.uniform(1.0, 1000.0);
        if (forward::ir_phi(f, p) != f) ++identity_misses;
    }
    Worst oracle_err{1e-10};
    for (int i = 0; i < 1000; ++i) {
        const forward::IRParams q{rng.uniform(0.05, 1.0), rng.uniform(200.0, 400.0), rng.uniform(0.0, 0.05),
                                  rng.uniform(0.0, 50.0),  rng.uniform(250.0, 320.0), rng.uniform(1.0, 5.0)};
        const double f = rng.uniform(200.0, 500.0);
        const double want = static_cast<double>(phi_oracle(f, q));
        oracle_err.see(std::abs(forward::ir_phi(f, q) - want) / want, "case " + std::to_string(i));
    }
    Worst compose{1e-12};
    for (int s = 0; s < 10; ++s) {
        const forward::IRParams p{rng.uniform(0.3, 1.0), 295.0, rng.uniform(0.0, 0.03), rng.uniform(0.0, 10.0), 288.0, 4.0};
        const auto psf = forward::gaussian_psf(3 + 2 * static_cast<std::size_t>(s % 3), rng.uniform(0.5, 2.0));
        const Tensor f = oracle::random_tensor({9 + static_cast<std::size_t>(s), 11}, rng, 250.0, 400.0);
        Tensor phi(f.shape());
        for (std::size_t i = 0; i < f.size(); ++i) phi[i] = static_cast<double>(phi_oracle(f[i], p));
        const Tensor want = oracle::direct_conv(phi, psf.kernel);
        compose.see(max_abs_diff(forward::ir_forward(f, p, psf, 0.0, 0), want) / max_abs(want), "image " + std::to_string(s));
    }
    return {identity_misses == 0 && oracle_err.ok() && compose.ok(),
            "identity misses " + std::to_string(identity_misses) + "/1000; " + oracle_err.text("relative error vs 50-digit oracle") +
                "; " + compose.text("relative error of forward vs oracle composition")};
}

// ---------------------------------------------------------------------------
// 10. Beamforming localization.

forward::ArrayGeometry camera() {
    forward::ArrayGeometry g;
    g.mics = forward::spiral_array(32, 0.3);
    g.grid = forward::SourceGrid{15, 15, 0.05, 0.05, 0.0, 0.0};
    g.standoff = 1.0;
    g.omega = 2.0 * std::numbers::pi * 3000.0;
    g.sample_rate = 144000.0;
    return g;
}

using Cell = std::pair<std::size_t, std::size_t>;  // (row, col)

std::vector<Cell> local_maxima(const Tensor& b, double floor) {
    std::vector<Cell> out;
    const long H = static_cast<long>(b.rows()), W = static_cast<long>(b.cols());
    for (long i = 0; i < H; ++i)
        for (long j = 0; j < W; ++j) {
            const double v = b(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
            if (v < floor) continue;
            bool peak = true;
            for (long di = -1; di <= 1; ++di)
                for (long dj = -1; dj <= 1; ++dj) {
                    const long a = i + di, c = j + dj;
                    if ((di || dj) && a >= 0 && a < H && c >= 0 && c < W &&
                        b(static_cast<std::size_t>(a), static_cast<std::size_t>(c)) >= v)
                        peak = false;
                }
            if (peak) out.emplace_back(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        }
    return out;
}

Tensor beamform(const forward::ArrayGeometry& g, const std::vector<Cell>& cells) {
    Tensor src({g.grid.ny, g.grid.nx});
    for (auto [r, c] : cells) src(r, c) = 1.0;
    return forward::delay_and_sum(forward::acoustic_synthesize(src, g, g.default_duration(), 0, 0.0), g);
}

std::string cells_text(const std::vector<Cell>& cells) {
    std::string s;
    for (auto [r, c] : cells) s += "(" + std::to_string(r) + "," + std::to_string(c) + ")";
    return s;
}

Outcome beamforming() {
    const auto g = camera();
    std::size_t single_ok = 0, single_total = 0, pair_ok = 0, pair_total = 0;
    std::string misses;
    for (std::size_t r = 3; r <= 11; r += 4)
        for (std::size_t c = 3; c <= 11; c += 4) {
            ++single_total;
            const Tensor b = beamform(g, {{r, c}});
            std::size_t best = 0;
            for (std::size_t i = 1; i < b.size(); ++i)
                if (b[i] > b[best]) best = i;
            if (Cell{best / b.cols(), best % b.cols()} == Cell{r, c}) {
                ++single_ok;
            } else {
                misses += " single" + cells_text({{r, c}});
            }
        }
    const std::vector<std::vector<Cell>> pairs = {
        {{3, 3}, {11, 10}}, {{4, 10}, {10, 4}}, {{2, 7}, {12, 7}}, {{7, 2}, {7, 12}}};
    for (const auto& pair : pairs) {
        ++pair_total;
        const Tensor b = beamform(g, pair);
        auto peaks = local_maxima(b, 0.5 * max_abs(b));
        std::vector<Cell> want = pair;
        std::sort(want.begin(), want.end());
        if (peaks == want) {
            ++pair_ok;
        } else {
            misses += " pair" + cells_text(pair) + "->" + cells_text(peaks);
        }
    }
    double min_corr = 1.0;
    const Tensor a = forward::beamformer_psf(g, 7, 7);
    for (auto [dx, dy] : {std::pair<int, int>{1, 0}, {0, 1}, {1, 1}, {-1, 0}, {0, -1}, {-1, -1}, {1, -1}, {-1, 1}}) {
        const Tensor b = forward::beamformer_psf(g, static_cast<std::size_t>(7 + dx), static_cast<std::size_t>(7 + dy));
        double ab = 0.0, aa = 0.0, bb = 0.0;
        for (int i = 2; i < 13; ++i)
            for (int j = 2; j < 13; ++j) {
                const double va = a(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
                const double vb = b(static_cast<std::size_t>(i + dy), static_cast<std::size_t>(j + dx));
                ab += va * vb;
                aa += va * va;
                bb += vb * vb;
            }
        min_corr = std::min(min_corr, ab / std::sqrt(aa * bb));
    }
    const bool ok = single_ok == single_total && pair_ok == pair_total && min_corr > 0.95;
    return {ok, "single " + std::to_string(single_ok) + "/" + std::to_string(single_total) + ", pairs " +
                    std::to_string(pair_ok) + "/" + std::to_string(pair_total) + ", min neighbour PSF correlation " +
                    fmt(min_corr) + " (bound 0.95)" + misses};
}

// ---------------------------------------------------------------------------
// 11. Determinism of every experiment.

Outcome determinism() {
    namespace fs = std::filesystem;
    const fs::path root = fs::temp_directory_path() / ("mbnn_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    std::string differ;
    std::size_t files = 0;
    for (const auto& name : harness::experiment_names()) {
        std::string manifests[2];
        for (int run = 0; run < 2; ++run) {
            harness::Overrides o;
            o.out = root / (name + "_" + std::to_string(run));
            const auto result = harness::run_experiment(harness::default_config(name, o));
            manifests[run] = io::read_text(result.manifest);
            if (run == 0) files += result.files.size();
        }
        if (manifests[0] != manifests[1]) differ += " " + name;
    }
    fs::remove_all(root);
    return {differ.empty(), std::to_string(harness::experiment_names().size()) + " experiments, " + std::to_string(files) +
                                " files per pass" + (differ.empty() ? ", all digests identical" : ", differing:" + differ)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria = {
        {1, "unfolding exactness", 10, unfolding_exactness},
        {2, "analytic nets match MAP estimate", 10, analytic_nets},
        {3, "gradient suite", 60, gradient_suite},
        {4, "transform identities and Parseval", 5, transform_identities},
        {5, "ISTA monotonicity and KKT", 30, ista_correctness},
        {6, "LISTA untied < tied <= untrained", 300, lista_benefit},
        {7, "PINN parametric recovery", 300, pinn_recovery},
        {8, "advection residual of exact solution", 5, pde_residual},
        {9, "radiometric identity, oracle and composition", 5, ir_model},
        {10, "beamforming localization and PSF shift invariance", 60, beamforming},
        {11, "experiment determinism", 600, determinism},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));

    int failures = 0;
    for (const auto& c : criteria) {
        if (!selected.empty() && !selected.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < c.budget_s;
        const bool pass = o.pass && in_time;
        if (!pass) ++failures;
        std::printf("%s [%d] %s: %s; %.2f s (limit %.0f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                    o.detail.c_str(), secs, c.budget_s, in_time ? "" : ", EXCEEDED");
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
