#include <algorithm>
#include <cmath>

#include "harness_internal.hpp"
#include "mbnn/errors.hpp"
#include "mbnn/pinn.hpp"
#include "mbnn/rng.hpp"
#include "mbnn/structured_nets.hpp"
#include "mbnn/unfolded.hpp"

namespace mbnn::harness::detail {

namespace {

using config::Range;
using config::Section;

std::string loss_history_csv(const std::vector<std::string>& names, const std::vector<const std::vector<double>*>& cols) {
    std::vector<std::string> header{"step"};
    header.insert(header.end(), names.begin(), names.end());
    io::CsvTable t(header);
    const std::size_t n = cols.front()->size();
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::string> row{std::to_string(i)};
        for (const auto* c : cols) row.push_back(io::format_double((*c)[i]));
        t.row(row);
    }
    return t.text();
}

// ---------------------------------------------------------------------------

/// Tied and untied unfolded ISTA trained on the sparse deconvolution benchmark,
/// compared with K-step and converged ISTA on the test split.
class ListaVsIsta : public Experiment {
public:
    explicit ListaVsIsta(const ExperimentConfig& cfg) : seed_(cfg.seed) {
        const Section root = cfg.doc->root();
        const Section b = root.section("benchmark");
        dim_ = b.count("dim", 64, 2, 4096);
        sparsity_ = b.count("sparsity", 5, 1, dim_);
        n_train_ = b.count("n_train", 500, 1);
        n_test_ = b.count("n_test", 100, 1);
        blur_sigma_ = b.real("blur_sigma", 1.0, Range::positive());
        noise_sd_ = b.real("noise_sd", 0.01, Range::non_negative());
        const Section l = root.section("lista");
        layers_ = l.count("layers", 6, 1, 1000);
        lambda_ = l.real("lambda", 0.05, Range::non_negative());
        ista_iters_ = root.section("ista").count("iterations", 1000, 1, 1'000'000);
        TrainConfig d;
        d.learning_rate = 1e-3;
        d.steps = 600;
        d.batch_size = 100;
        train_ = read_train(root.section("train"), d, cfg.seed);
    }

    void run(Output& out) const override {
        const auto bench = unfolded::make_sparse_deconvolution(dim_, sparsity_, n_train_, n_test_, seed_, blur_sigma_,
                                                               noise_sd_);
        const auto ista = unfolded::IstaConfig::create(bench.H, lambda_, {}, ista_iters_);
        const auto tied = unfolded::unfold(bench.H, layers_, ista, true);
        const auto untied = unfolded::unfold(bench.H, layers_, ista, false);
        const auto rt = unfolded::lista_train(tied, bench.train, bench.test, train_);
        const auto ru = unfolded::lista_train(untied, bench.train, bench.test, train_);

        Tensor converged({dim_, n_test_});
        for (std::size_t j = 0; j < n_test_; ++j) {
            const Tensor f = unfolded::ista_solve(bench.H, column_of(bench.test.inputs, j), ista).f;
            for (std::size_t i = 0; i < dim_; ++i) converged(i, j) = f[i];
        }

        Metrics m;
        m.add("layers", static_cast<double>(layers_)).add("lambda", lambda_).add("step", ista.alpha);
        m.add("ista_k_test_mse", rt.metrics.untrained_test_mse);
        m.add("ista_converged_test_mse", mean_squared_error(converged, bench.test.targets));
        m.add("lista_tied_test_mse", rt.metrics.trained_test_mse);
        m.add("lista_untied_test_mse", ru.metrics.trained_test_mse);
        out.text("metrics.csv", m.csv());
        out.text("history.csv", loss_history_csv({"tied", "untied"}, {&rt.metrics.train_history, &ru.metrics.train_history}));
        {
            io::CsvTable t({"epoch", "tied", "untied"});
            for (std::size_t e = 0; e < rt.metrics.epoch_test_mse.size(); ++e) {
                t.row(std::vector<double>{static_cast<double>(e), rt.metrics.epoch_test_mse[e], ru.metrics.epoch_test_mse[e]});
            }
            out.text("epoch_test.csv", t.text());
        }
        {
            const Tensor g = column_of(bench.test.inputs, 0);
            const Tensor truth = column_of(bench.test.targets, 0);
            const Tensor ik = unfolded::unfolded_apply(tied.net, tied.params, g);
            const Tensor it = unfolded::unfolded_apply(tied.net, rt.params, g);
            const Tensor iu = unfolded::unfolded_apply(untied.net, ru.params, g);
            io::CsvTable t({"index", "truth", "g", "ista_k", "ista_converged", "lista_tied", "lista_untied"});
            for (std::size_t i = 0; i < dim_; ++i) {
                t.row(std::vector<double>{static_cast<double>(i), truth[i], g[i], ik[i], converged(i, 0), it[i], iu[i]});
            }
            out.text("example.csv", t.text());
        }
        State s;
        s.unfolded = {{"tied", tied.net}, {"untied", untied.net}};
        s.params = {{"tied", rt.params}, {"untied", ru.params}};
        out.state("lista.state", s);
    }

private:
    std::uint64_t seed_;
    std::size_t dim_ = 0, sparsity_ = 0, n_train_ = 0, n_test_ = 0, layers_ = 0, ista_iters_ = 0;
    double blur_sigma_ = 0.0, noise_sd_ = 0.0, lambda_ = 0.0;
    TrainConfig train_;
};

// ---------------------------------------------------------------------------

/// Piecewise-constant images: sums of `shapes` random rectangles with heights in
/// [0.2, 1], plus Gaussian noise. Columns are flattened row-major images.
struct ImageSet {
    Tensor clean, noisy;
};

ImageSet make_images(CounterRng rng, std::size_t count, std::size_t rows, std::size_t cols, std::size_t shapes,
                     double noise_sd) {
    const std::size_t n = rows * cols;
    ImageSet s{Tensor({n, count}), Tensor({n, count})};
    for (std::size_t j = 0; j < count; ++j) {
        for (std::size_t k = 0; k < shapes; ++k) {
            const std::size_t r0 = rng.below(rows), c0 = rng.below(cols);
            const std::size_t r1 = r0 + 1 + rng.below(rows - r0), c1 = c0 + 1 + rng.below(cols - c0);
            const double h = rng.uniform(0.2, 1.0);
            for (std::size_t r = r0; r < r1; ++r)
                for (std::size_t c = c0; c < c1; ++c) s.clean(r * cols + c, j) += h;
        }
        for (std::size_t i = 0; i < n; ++i) s.noisy(i, j) = s.clean(i, j) + noise_sd * rng.gaussian();
    }
    return s;
}

/// Transform -> learned diagonal mask -> adjoint transform, trained to map noisy to clean images.
class TransformDenoise : public Experiment {
public:
    explicit TransformDenoise(const ExperimentConfig& cfg) : seed_(cfg.seed), img_(read_image_options(cfg.doc->root())) {
        const Section root = cfg.doc->root();
        const Section im = root.section("image");
        rows_ = im.count("rows", 32, 1, 1024);
        cols_ = im.count("cols", 32, 1, 1024);
        shapes_ = im.count("shapes", 4, 0, 1000);
        noise_sd_ = im.real("noise_sd", 0.1, Range::non_negative());
        const Section tr = root.section("transform");
        kind_ = tr.choice("kind", "haar", {"haar", "fft"}) == "haar" ? TransformKind::haar : TransformKind::fft;
        if (kind_ == TransformKind::haar) {
            levels_ = tr.count("levels", 2, 1, 16);
            const std::size_t block = std::size_t{1} << levels_;
            if (rows_ % block || cols_ % block) {
                throw ConfigError("config field 'transform.levels' = " + std::to_string(levels_) +
                                  " needs image extents divisible by " + std::to_string(block));
            }
        } else {
            auto pow2 = [](std::size_t v) { return (v & (v - 1)) == 0; };
            if (!pow2(rows_) || !pow2(cols_)) {
                throw ConfigError("config fields 'image.rows' and 'image.cols' must be powers of two for the FFT");
            }
        }
        const Section data = root.section("data");
        n_train_ = data.count("n_train", 64, 1);
        n_test_ = data.count("n_test", 16, 1);
        TrainConfig d;
        d.learning_rate = 1e-2;
        d.steps = 300;
        d.batch_size = 16;
        train_ = read_train(root.section("train"), d, cfg.seed);
    }

    void run(Output& out) const override {
        const CounterRng rng(seed_);
        const ImageSet tr = make_images(rng.split(0), n_train_, rows_, cols_, shapes_, noise_sd_);
        const ImageSet te = make_images(rng.split(1), n_test_, rows_, cols_, shapes_, noise_sd_);
        const Dataset train_set{tr.noisy, tr.clean}, test_set{te.noisy, te.clean};
        const Net net = build_transform_net(kind_, rows_, cols_, levels_, Tensor::filled({rows_ * cols_}, 1.0));
        const NetTrainResult r = train(net.spec, net.params, train_set, train_);

        Metrics m;
        m.add("noisy_test_mse", mean_squared_error(te.noisy, te.clean));
        m.add("untrained_test_mse", mse(net.spec, net.params, test_set));
        m.add("trained_test_mse", mse(net.spec, r.params, test_set));
        m.add("best_step", static_cast<double>(r.best_step));
        out.text("metrics.csv", m.csv());
        out.text("history.csv", loss_history_csv({"loss"}, {&r.history}));
        out.matrix("mask.csv", r.params.get("DO.mask").reshaped({rows_, cols_}));

        const Tensor clean = column_of(te.clean, 0).reshaped({rows_, cols_});
        const Tensor noisy = column_of(te.noisy, 0).reshaped({rows_, cols_});
        const Tensor denoised = evaluate(net.spec, r.params, column_of(te.noisy, 0)).reshaped({rows_, cols_});
        double lo = INFINITY, hi = -INFINITY;
        for (const Tensor* t : {&clean, &noisy, &denoised}) {
            for (double v : t->data()) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
        if (!(hi > lo)) hi = lo + 1.0;
        out.image("clean.pgm", io::quantize(clean, lo, hi, img_.maxval));
        out.image("noisy.pgm", io::quantize(noisy, lo, hi, img_.maxval));
        out.image("denoised.pgm", io::quantize(denoised, lo, hi, img_.maxval));
        out.matrix("denoised.csv", denoised);
        State s;
        s.nets = {{"denoiser", net.spec}};
        s.params = {{"denoiser", r.params}};
        out.state("net.state", s);
    }

private:
    std::uint64_t seed_;
    ImageOptions img_;
    std::size_t rows_ = 0, cols_ = 0, shapes_ = 0, levels_ = 1, n_train_ = 0, n_test_ = 0;
    double noise_sd_ = 0.0;
    TransformKind kind_ = TransformKind::haar;
    TrainConfig train_;
};

// ---------------------------------------------------------------------------

struct NetShape {
    std::size_t hidden = 16, depth = 2;
};

NetShape read_net(const Section& s) {
    return {s.count("hidden", 16, 1, 4096), s.count("depth", 2, 1, 64)};
}

/// du/dt = a u + b with u(0) = u0.
struct LinearOde {
    double a = -1.0, b = 0.5, u0 = 1.0;

    double exact(double t) const {
        if (a == 0.0) return u0 + b * t;
        return -b / a + (u0 + b / a) * std::exp(a * t);
    }
};

State pinn_state(const pinn::PinnModel& model) {
    State s;
    s.nets.emplace_back("u", model.u.spec());
    s.params.emplace_back("u", model.u_params);
    if (!model.theta.empty()) s.params.emplace_back("theta", model.theta);
    if (model.f_hat) {
        s.nets.emplace_back("f", model.f_hat->spec());
        s.params.emplace_back("f", model.f_params);
    }
    return s;
}

/// Linear ODE fitted from samples with a known, parametric or learned right-hand side.
class PinnOde : public Experiment {
public:
    explicit PinnOde(const ExperimentConfig& cfg) : seed_(cfg.seed) {
        const Section root = cfg.doc->root();
        const Section ode = root.section("ode");
        mode_ = ode.choice("mode", "parametric", {"known", "parametric", "nonparametric"});
        ode_.a = ode.real("a", -1.0);
        ode_.b = ode.real("b", 0.5);
        ode_.u0 = ode.real("u0", 1.0);
        t_max_ = ode.real("t_max", 3.0, Range::positive());
        const Section data = root.section("data");
        n_data_ = data.count("count", 50, 1);
        data_noise_ = data.real("noise_sd", 0.0, Range::non_negative());
        n_colloc_ = root.section("colloc").count("count", 50, 1);
        net_ = read_net(root.section("net"));
        if (mode_ == "parametric") {
            const Section th = root.section("theta");
            a0_ = th.real("a0", 0.0);
            b0_ = th.real("b0", 0.0);
        }
        if (mode_ == "nonparametric") rhs_net_ = read_net(root.section("rhs_net"));
        TrainConfig d;
        d.learning_rate = 1e-3;
        d.steps = 20000;
        train_ = read_train(root.section("train"), d, cfg.seed);
    }

    void run(Output& out) const override {
        const CounterRng rng(seed_);
        pinn::OdeData data{pinn::linspace(0.0, t_max_, n_data_), Tensor({n_data_})};
        CounterRng noise = rng.split(1);
        for (std::size_t i = 0; i < n_data_; ++i) data.u[i] = ode_.exact(data.t[i]) + data_noise_ * noise.gaussian();
        const Tensor colloc = pinn::linspace(0.0, t_max_, n_colloc_);

        pinn::PinnModel model;
        model.u = pinn::default_field(1, 1, seed_, model.u_params, "u", net_.hidden, net_.depth);
        pinn::PinnProblem problem;
        if (mode_ == "known") {
            const double a = ode_.a, b = ode_.b;
            problem = pinn::OdeKnownProblem{[a, b](Var, Var u) { return ad::scale_shift(u, a, b); }, data, colloc};
        } else if (mode_ == "parametric") {
            model.theta = pinn::make_theta(a0_, b0_);
            problem = pinn::OdeParametricProblem{data, colloc};
        } else {
            model.f_hat = pinn::default_field(2, 1, rng.split(2).seed(), model.f_params, "f", rhs_net_.hidden,
                                              rhs_net_.depth);
            problem = pinn::OdeNonparametricProblem{data, colloc};
        }
        const pinn::PinnTrainResult r = pinn::train_pinn(problem, model, train_);
        const pinn::PinnModel& fit = r.model;

        const std::size_t n_eval = 101;
        const Tensor t = pinn::linspace(0.0, t_max_, n_eval);
        const Tensor pred = fit.u.evaluate(fit.u_params, t.reshaped({1, n_eval}));
        Tensor exact({n_eval});
        for (std::size_t i = 0; i < n_eval; ++i) exact[i] = ode_.exact(t[i]);
        std::vector<std::string> header{"t", "exact", "predicted"};
        std::optional<Tensor> rhs_learned;
        if (fit.f_hat) {
            Tensor pts({2, n_eval});
            for (std::size_t i = 0; i < n_eval; ++i) {
                pts(0, i) = exact[i];
                pts(1, i) = t[i];
            }
            rhs_learned = fit.f_hat->evaluate(fit.f_params, pts);
            header.insert(header.end(), {"rhs_exact", "rhs_learned"});
        }
        io::CsvTable sol(header);
        for (std::size_t i = 0; i < n_eval; ++i) {
            std::vector<double> row{t[i], exact[i], pred[i]};
            if (rhs_learned) row.insert(row.end(), {ode_.a * exact[i] + ode_.b, (*rhs_learned)[i]});
            sol.row(row);
        }
        io::CsvTable dt({"t", "u"});
        for (std::size_t i = 0; i < n_data_; ++i) dt.row(std::vector<double>{data.t[i], data.u[i]});

        Metrics m;
        if (mode_ == "parametric") {
            const double a = fit.theta.get("a")[0], b = fit.theta.get("b")[0];
            m.add("a_hat", a).add("b_hat", b).add("a_true", ode_.a).add("b_true", ode_.b);
        }
        m.add("rmse_solution", root_mean_squared_error(pred, exact));
        m.add("final_total", r.history.back().total);
        m.add("best_total", r.history[r.best_step].total);
        m.add("best_step", static_cast<double>(r.best_step));
        out.text("metrics.csv", m.csv());
        out.text("history.csv", pinn::history_csv(r.history));
        out.text("solution.csv", sol.text());
        out.text("data.csv", dt.text());
        out.state("pinn.state", pinn_state(fit));
    }

private:
    std::uint64_t seed_;
    std::string mode_;
    LinearOde ode_;
    double t_max_ = 0.0, data_noise_ = 0.0, a0_ = 0.0, b0_ = 0.0;
    std::size_t n_data_ = 0, n_colloc_ = 0;
    NetShape net_, rhs_net_;
    TrainConfig train_;
};

// ---------------------------------------------------------------------------

/// u_t + u_x = u on [0, x_max] x [0, t_max] with exact solution exp(t) sin(x - t).
class PinnPde : public Experiment {
public:
    explicit PinnPde(const ExperimentConfig& cfg) : seed_(cfg.seed), img_(read_image_options(cfg.doc->root())) {
        const Section root = cfg.doc->root();
        const Section dom = root.section("domain");
        x_max_ = dom.real("x_max", 2.0, Range::positive());
        t_max_ = dom.real("t_max", 1.0, Range::positive());
        const Section co = root.section("colloc");
        nx_ = co.count("nx", 16, 3, 4096);
        nt_ = co.count("nt", 16, 3, 4096);
        const Section cond = root.section("conditions");
        n_ic_ = cond.count("ic", 32, 0);
        n_bc_ = cond.count("bc", 32, 0);
        ic_weight_ = cond.real("ic_weight", 1.0, Range::non_negative());
        bc_weight_ = cond.real("bc_weight", 1.0, Range::non_negative());
        const Section data = root.section("data");
        n_data_ = data.count("count", 0, 0);
        data_noise_ = data.real("noise_sd", 0.0, Range::non_negative());
        net_ = read_net(root.section("net"));
        TrainConfig d;
        d.learning_rate = 1e-3;
        d.steps = 3000;
        train_ = read_train(root.section("train"), d, cfg.seed);
    }

    static double exact(double x, double t) { return std::exp(t) * std::sin(x - t); }

    static Tensor exact_on(const Tensor& pts) {
        Tensor v({pts.cols()});
        for (std::size_t i = 0; i < pts.cols(); ++i) v[i] = exact(pts(0, i), pts(1, i));
        return v;
    }

    void run(Output& out) const override {
        const CounterRng rng(seed_);
        pinn::PdeSets sets;
        sets.colloc = pinn::interior_grid2(0.0, x_max_, nx_, 0.0, t_max_, nt_);
        sets.ic_weight = ic_weight_;
        sets.bc_weight = bc_weight_;
        if (n_ic_ > 0) {
            Tensor p({2, n_ic_});
            const Tensor x = pinn::linspace(0.0, x_max_, n_ic_);
            for (std::size_t i = 0; i < n_ic_; ++i) p(0, i) = x[i];
            sets.ic = {p, exact_on(p)};
        }
        if (n_bc_ > 0) {
            Tensor p({2, n_bc_});
            const Tensor t = pinn::linspace(0.0, t_max_, n_bc_);
            for (std::size_t i = 0; i < n_bc_; ++i) p(1, i) = t[i];
            sets.bc = {p, exact_on(p)};
        }
        if (n_data_ > 0) {
            const Tensor p = pinn::sample_box({0.0, 0.0}, {x_max_, t_max_}, n_data_, rng.split(1).seed());
            Tensor v = exact_on(p);
            CounterRng noise = rng.split(2);
            for (auto& e : v.data()) e += data_noise_ * noise.gaussian();
            sets.data = {p, v};
        }
        pinn::PinnModel model;
        model.u = pinn::default_field(2, 1, seed_, model.u_params, "u", net_.hidden, net_.depth);
        const pinn::PinnProblem problem = pinn::PdeAdvectionProblem{sets};
        const pinn::PinnTrainResult r = pinn::train_pinn(problem, model, train_);
        const pinn::PinnModel& fit = r.model;

        const std::size_t gx = 21, gt = 21;
        const Tensor grid = pinn::grid2(0.0, x_max_, gx, 0.0, t_max_, gt);
        const Tensor pred = fit.u.evaluate(fit.u_params, grid);
        const Tensor ex = exact_on(grid);
        const Tensor res = pinn::advection_residual(fit.u, fit.u_params, grid);
        io::CsvTable sol({"x", "t", "exact", "predicted", "residual"});
        for (std::size_t i = 0; i < grid.cols(); ++i) {
            sol.row(std::vector<double>{grid(0, i), grid(1, i), ex[i], pred[i], res[i]});
        }
        const Tensor pred_img = pred.reshaped({gt, gx}), exact_img = ex.reshaped({gt, gx});
        double lo = INFINITY, hi = -INFINITY;
        for (const Tensor* t : {&pred_img, &exact_img}) {
            for (double v : t->data()) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
        if (!(hi > lo)) hi = lo + 1.0;
        const Tensor colloc_res = pinn::advection_residual(fit.u, fit.u_params, sets.colloc);
        double max_res = 0.0;
        for (double v : colloc_res.data()) max_res = std::max(max_res, std::abs(v));

        Metrics m;
        m.add("rmse_solution", root_mean_squared_error(pred, ex));
        m.add("max_abs_residual_colloc", max_res);
        m.add("final_total", r.history.back().total);
        m.add("best_total", r.history[r.best_step].total);
        m.add("best_step", static_cast<double>(r.best_step));
        out.text("metrics.csv", m.csv());
        out.text("history.csv", pinn::history_csv(r.history));
        out.text("solution.csv", sol.text());
        out.image("predicted.pgm", io::quantize(pred_img, lo, hi, img_.maxval));
        out.image("exact.pgm", io::quantize(exact_img, lo, hi, img_.maxval));
        out.state("pinn.state", pinn_state(fit));
    }

private:
    std::uint64_t seed_;
    ImageOptions img_;
    double x_max_ = 0.0, t_max_ = 0.0, ic_weight_ = 1.0, bc_weight_ = 1.0, data_noise_ = 0.0;
    std::size_t nx_ = 0, nt_ = 0, n_ic_ = 0, n_bc_ = 0, n_data_ = 0;
    NetShape net_;
    TrainConfig train_;
};

}  // namespace

std::unique_ptr<Experiment> make_lista_vs_ista(const ExperimentConfig& cfg) { return std::make_unique<ListaVsIsta>(cfg); }
std::unique_ptr<Experiment> make_transform_denoise(const ExperimentConfig& cfg) {
    return std::make_unique<TransformDenoise>(cfg);
}
std::unique_ptr<Experiment> make_pinn_ode(const ExperimentConfig& cfg) { return std::make_unique<PinnOde>(cfg); }
std::unique_ptr<Experiment> make_pinn_pde(const ExperimentConfig& cfg) { return std::make_unique<PinnPde>(cfg); }

}  // namespace mbnn::harness::detail
