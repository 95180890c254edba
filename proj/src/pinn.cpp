#include "mbnn/pinn.hpp"

#include <charconv>
#include <cmath>

#include "mbnn/errors.hpp"
#include "mbnn/linalg.hpp"
#include "mbnn/rng.hpp"

namespace mbnn::pinn {

namespace {

/// [n] or [1 x n] as a row [1 x n].
Tensor as_row(const Tensor& t) { return t.reshaped({1, t.size()}); }

Tensor as_points(const Tensor& pts, std::size_t in, const char* what) {
    if (pts.rank() == 2 && pts.rows() == in) return pts;
    if (pts.rank() == 1 && in == 1) return as_row(pts);
    if (pts.rank() == 1 && pts.size() == in) return pts.reshaped({in, 1});
    throw DimensionError(std::string(what) + " must have " + std::to_string(in) + " rows, got " +
                         shape_string(pts.shape()));
}

double value_of(Var v) { return v.valid() ? v.value().item() : 0.0; }

Var sum_valid(std::initializer_list<Var> vs) {
    Var total;
    for (Var v : vs) {
        if (!v.valid()) continue;
        total = total.valid() ? ad::add(total, v) : v;
    }
    return total;
}

void check_explicit(const NetSpec& net, const LinearOp& H, const Shape& g) {
    if (g.size() != 2 || g[0] != H.output_size()) {
        throw DimensionError("data must be [" + std::to_string(H.output_size()) + " x batch], got " + shape_string(g));
    }
    if (net.input_size != H.output_size()) {
        throw DimensionError("net input size " + std::to_string(net.input_size) + " does not match data size " +
                             std::to_string(H.output_size()));
    }
    if (net.output_size() != H.input_size()) {
        throw DimensionError("net output size " + std::to_string(net.output_size()) +
                             " does not match operator input size " + std::to_string(H.input_size()));
    }
}

Tensor batch_of(const Tensor& g, std::size_t m) {
    if (g.rank() == 2 && g.rows() == m) return g;
    if (g.size() == m) return g.reshaped({m, 1});
    throw DimensionError("data must be [" + std::to_string(m) + "] or [" + std::to_string(m) + " x batch], got " +
                         shape_string(g.shape()));
}

/// f - fbar with fbar broadcast over columns.
Var minus_mean(Var f, const Tensor& f_bar) {
    const std::size_t n = f.shape()[0];
    if (f_bar.size() != n) {
        throw DimensionError("prior mean has " + std::to_string(f_bar.size()) + " entries, net output has " +
                             std::to_string(n));
    }
    return ad::add_col_bias(f, f.tape->constant(-1.0 * f_bar.reshaped({n})));
}

struct ExplicitParts {
    Var f, residual;
};

ExplicitParts explicit_parts(const NetSpec& net, const BoundParams& params, const LinearOp& H, Var g) {
    check_explicit(net, H, g.shape());
    const Var f = net_forward(net, params, g);
    return {f, ad::sub(g, H.apply(f))};
}

void check_data(const OdeData& data) {
    if (data.size() == 0) throw ParameterError("observation set is empty");
    if (data.u.size() != data.t.size()) {
        throw DimensionError("observation times (" + std::to_string(data.t.size()) + ") and values (" +
                             std::to_string(data.u.size()) + ") differ in count");
    }
}

void check_scalar_field(const Field& u) {
    if (u.input_size() != 1 || u.output_size() != 1) {
        throw DimensionError("ODE field must map 1 input to 1 output, got " + std::to_string(u.input_size()) + " -> " +
                             std::to_string(u.output_size()));
    }
}

Var classic_term(const Field& u, const BoundParams& params, const OdeData& data) {
    check_data(data);
    Tape& tape = params.tape();
    const Var pred = u.value(params, tape.constant(as_row(data.t)));
    return ad::sum_squares(ad::sub(pred, tape.constant(as_row(data.u))));
}

TermVars ode_with_rhs(const Field& u, const BoundParams& params, const OdeData& data, const Tensor& colloc,
                      const Rhs& rhs) {
    check_scalar_field(u);
    TermVars t;
    t.data = classic_term(u, params, data);
    if (colloc.size() > 0) {
        t.physics = ad::sum_squares(ode_residual(u, params, params.tape().constant(as_row(colloc)), rhs));
    }
    t.total = sum_valid({t.data, t.physics});
    return t;
}

Var point_term(const Field& u, const BoundParams& params, const PointData& d, const char* what) {
    if (d.size() == 0) return {};
    const Tensor pts = as_points(d.points, 2, what);
    if (pts.cols() != d.size()) {
        throw DimensionError(std::string(what) + " has " + std::to_string(pts.cols()) + " points but " +
                             std::to_string(d.size()) + " values");
    }
    Tape& tape = params.tape();
    const Var pred = u.value(params, tape.constant(pts));
    return ad::sum_squares(ad::sub(pred, tape.constant(as_row(d.values))));
}

template <class Build>
PinnLossStats untaped(const std::vector<const ParamSet*>& sets, Build build) {
    Tape tape;
    std::vector<BoundParams> bound;
    for (const ParamSet* s : sets) bound.emplace_back(tape, *s);
    return term_values(build(bound));
}

void append(std::string& out, double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, r.ptr);
}

}  // namespace

// ---------------------------------------------------------------------------

Field Field::network(NetSpec spec) {
    spec.validate();
    Field f;
    f.in_ = spec.input_size;
    f.out_ = spec.output_size();
    f.spec_ = std::move(spec);
    return f;
}

Field Field::analytic(std::size_t input_size, std::size_t output_size, ValueFn value, PartialFn partial) {
    if (input_size == 0 || output_size == 0) throw DimensionError("analytic field needs nonzero sizes");
    if (!value) throw ContractError("analytic field needs a value function");
    Field f;
    f.in_ = input_size;
    f.out_ = output_size;
    f.value_ = std::move(value);
    f.partial_ = std::move(partial);
    return f;
}

const NetSpec& Field::spec() const {
    if (!spec_) throw ContractError("field is an analytic evaluator, not a network");
    return *spec_;
}

Var Field::value(const BoundParams& params, Var points) const {
    if (points.shape().size() != 2 || points.shape()[0] != in_) {
        throw DimensionError("field points must be [" + std::to_string(in_) + " x N], got " +
                             shape_string(points.shape()));
    }
    if (spec_) return net_forward(*spec_, params, points);
    return points.tape->constant(value_(points.value()));
}

Dual Field::directional(const BoundParams& params, Var points, const std::vector<double>& direction) const {
    if (direction.size() != in_) {
        throw DimensionError("direction has " + std::to_string(direction.size()) + " entries, field has " +
                             std::to_string(in_) + " inputs");
    }
    const Var v = value(params, points);
    Tape& tape = *points.tape;
    const std::size_t n = points.shape()[1];
    if (spec_) {
        Tensor dx({in_, n});
        for (std::size_t i = 0; i < in_; ++i)
            for (std::size_t j = 0; j < n; ++j) dx(i, j) = direction[i];
        return forward_tangent(*spec_, params, points, tape.constant(std::move(dx)));
    }
    if (!partial_) throw ContractError("analytic field has no derivative function");
    Tensor d({out_, n});
    for (std::size_t c = 0; c < in_; ++c) {
        if (direction[c] == 0.0) continue;
        const Tensor pc = partial_(points.value(), c);
        if (pc.size() != d.size()) throw DimensionError("analytic derivative has the wrong size");
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += direction[c] * pc[i];
    }
    return {v, tape.constant(std::move(d))};
}

Tensor Field::evaluate(const ParamSet& params, const Tensor& points) const {
    const Tensor pts = as_points(points, in_, "field points");
    const Tensor out = spec_ ? mbnn::evaluate(*spec_, params, pts) : value_(pts);
    return points.rank() == 1 && out.size() == out_ ? out.reshaped({out_}) : out;
}

PinnLossStats term_values(const TermVars& t) {
    PinnLossStats s;
    s.data = value_of(t.data);
    s.physics = value_of(t.physics);
    s.ic = value_of(t.ic);
    s.bc = value_of(t.bc);
    s.total = value_of(t.total);
    return s;
}

// ---------------------------------------------------------------------------

TermVars explicit_terms(const NetSpec& net, const BoundParams& params, const LinearOp& H, Var g) {
    const ExplicitParts e = explicit_parts(net, params, H, g);
    TermVars t;
    t.data = ad::sum_squares(e.residual);
    t.total = t.data;
    return t;
}

double loss_explicit(const NetSpec& net, const ParamSet& params, const LinearOp& H, const Tensor& g) {
    return untaped({&params}, [&](const std::vector<BoundParams>& b) {
               return explicit_terms(net, b[0], H, b[0].tape().constant(batch_of(g, H.output_size())));
           })
        .total;
}

TermVars two_part_terms(const NetSpec& net, const BoundParams& params, const LinearOp& H, Var batch, double sigma_eps,
                        double sigma_f, const Tensor& f_bar) {
    if (!(sigma_eps > 0.0) || !(sigma_f > 0.0)) throw ParameterError("sigma_eps and sigma_f must be > 0");
    const ExplicitParts e = explicit_parts(net, params, H, batch);
    TermVars t;
    t.data = ad::scale_shift(ad::sum_squares(e.residual), 1.0 / (sigma_eps * sigma_eps));
    t.physics = ad::scale_shift(ad::sum_squares(minus_mean(e.f, f_bar)), 1.0 / (sigma_f * sigma_f));
    t.total = ad::add(t.data, t.physics);
    return t;
}

double loss_two_part(const NetSpec& net, const ParamSet& params, const LinearOp& H, const Tensor& batch,
                     double sigma_eps, double sigma_f, const Tensor& f_bar) {
    return untaped({&params}, [&](const std::vector<BoundParams>& b) {
               return two_part_terms(net, b[0], H, b[0].tape().constant(batch_of(batch, H.output_size())),
                                     sigma_eps, sigma_f, f_bar);
           })
        .total;
}

TermVars trace_terms(const NetSpec& net, const BoundParams& params, const LinearOp& H, Var batch,
                     const Tensor& f_bar) {
    const ExplicitParts e = explicit_parts(net, params, H, batch);
    TermVars t;
    // Tr sum v v^T = sum ||v||^2
    t.data = ad::sum_squares(e.residual);
    t.physics = ad::sum_squares(minus_mean(e.f, f_bar));
    t.total = ad::add(t.data, t.physics);
    return t;
}

PinnLossStats loss_trace(const NetSpec& net, const ParamSet& params, const LinearOp& H, const Tensor& batch,
                         const Tensor& f_bar) {
    Tape tape;
    const BoundParams p(tape, params);
    const Var g = tape.constant(batch_of(batch, H.output_size()));
    const ExplicitParts e = explicit_parts(net, p, H, g);
    const Var df = minus_mean(e.f, f_bar);
    PinnLossStats s;
    s.data = squared_norm(e.residual.value());
    s.physics = squared_norm(df.value());
    s.total = s.data + s.physics;
    s.sigma_eps = matmul(e.residual.value(), transpose(e.residual.value()));
    s.sigma_f = matmul(df.value(), transpose(df.value()));
    return s;
}

// ---------------------------------------------------------------------------

Var ode_residual(const Field& u, const BoundParams& params, Var t, const Rhs& rhs) {
    check_scalar_field(u);
    const Dual d = u.directional(params, t, {1.0});
    return ad::sub(d.tangent, rhs(t, d.value));
}

Tensor ode_residual(const Field& u, const ParamSet& params, const Tensor& t, const Rhs& rhs) {
    Tape tape;
    const BoundParams p(tape, params);
    const Var r = ode_residual(u, p, tape.constant(as_row(t)), rhs);
    return r.value().reshaped({t.size()});
}

double loss_classic(const Field& u, const ParamSet& params, const OdeData& data) {
    check_scalar_field(u);
    Tape tape;
    const BoundParams p(tape, params);
    return classic_term(u, p, data).value().item();
}

TermVars ode_terms(const Field& u, const BoundParams& params, const OdeData& data, const Tensor& colloc,
                   const Rhs& rhs) {
    return ode_with_rhs(u, params, data, colloc, rhs);
}

PinnLossStats loss_ode(const Field& u, const ParamSet& params, const OdeData& data, const Tensor& colloc,
                       const Rhs& rhs) {
    return untaped({&params},
                   [&](const std::vector<BoundParams>& b) { return ode_terms(u, b[0], data, colloc, rhs); });
}

ParamSet make_theta(double a, double b) {
    ParamSet theta;
    theta.add("a", Tensor::scalar(a));
    theta.add("b", Tensor::scalar(b));
    return theta;
}

Rhs parametric_rhs(const BoundParams& theta) {
    const Var a = theta["a"], b = theta["b"];
    return [a, b](Var, Var u) { return ad::add_scalar(ad::mul_scalar(u, a), b); };
}

TermVars parametric_terms(const Field& u, const BoundParams& params, const BoundParams& theta, const OdeData& data,
                          const Tensor& colloc) {
    return ode_with_rhs(u, params, data, colloc, parametric_rhs(theta));
}

PinnLossStats loss_parametric(const Field& u, const ParamSet& params, const ParamSet& theta, const OdeData& data,
                              const Tensor& colloc) {
    return untaped({&params, &theta}, [&](const std::vector<BoundParams>& b) {
        return parametric_terms(u, b[0], b[1], data, colloc);
    });
}

TermVars nonparametric_terms(const Field& u, const BoundParams& u_params, const Field& f_hat,
                             const BoundParams& f_params, const OdeData& data, const Tensor& colloc) {
    if (f_hat.input_size() != 2 || f_hat.output_size() != 1) {
        throw DimensionError("right-hand-side field must map (u, t) to one output, got " +
                             std::to_string(f_hat.input_size()) + " -> " + std::to_string(f_hat.output_size()));
    }
    const Rhs rhs = [&](Var t, Var uv) { return f_hat.value(f_params, ad::concat_rows(uv, t)); };
    return ode_with_rhs(u, u_params, data, colloc, rhs);
}

PinnLossStats loss_nonparametric(const Field& u, const ParamSet& u_params, const Field& f_hat,
                                 const ParamSet& f_params, const OdeData& data, const Tensor& colloc) {
    return untaped({&u_params, &f_params}, [&](const std::vector<BoundParams>& b) {
        return nonparametric_terms(u, b[0], f_hat, b[1], data, colloc);
    });
}

// ---------------------------------------------------------------------------

Var advection_residual(const Field& u, const BoundParams& params, Var points) {
    if (u.input_size() != 2 || u.output_size() != 1) {
        throw DimensionError("advection field must map (x, t) to one output");
    }
    // the derivative along (1, 1) is u_x + u_t
    const Dual d = u.directional(params, points, {1.0, 1.0});
    return ad::sub(d.tangent, d.value);
}

Tensor advection_residual(const Field& u, const ParamSet& params, const Tensor& points) {
    Tape tape;
    const BoundParams p(tape, params);
    const Tensor pts = as_points(points, 2, "collocation points");
    const Var r = advection_residual(u, p, tape.constant(pts));
    return r.value().reshaped({pts.cols()});
}

TermVars pde_terms(const Field& u, const BoundParams& params, const PdeSets& sets) {
    if (sets.colloc.size() == 0) throw ParameterError("collocation grid is empty");
    if (!(sets.ic_weight >= 0.0) || !(sets.bc_weight >= 0.0)) throw ParameterError("term weights must be >= 0");
    Tape& tape = params.tape();
    TermVars t;
    t.data = point_term(u, params, sets.data, "data grid");
    t.physics = ad::sum_squares(advection_residual(u, params, tape.constant(as_points(sets.colloc, 2, "collocation grid"))));
    const Var ic = point_term(u, params, sets.ic, "initial-condition samples");
    if (ic.valid()) t.ic = ad::scale_shift(ic, sets.ic_weight);
    if (sets.bc.size() > 0) {
        if (sets.bc_plus) {
            const Tensor pts = as_points(sets.bc.points, 2, "boundary samples");
            const Var pred = u.value(params, tape.constant(pts));
            t.bc = ad::sum_squares(ad::add(pred, tape.constant(as_row(sets.bc.values))));
        } else {
            t.bc = point_term(u, params, sets.bc, "boundary samples");
        }
        t.bc = ad::scale_shift(t.bc, sets.bc_weight);
    }
    t.total = sum_valid({t.data, t.physics, t.ic, t.bc});
    return t;
}

PinnLossStats loss_pde(const Field& u, const ParamSet& params, const PdeSets& sets) {
    return untaped({&params}, [&](const std::vector<BoundParams>& b) { return pde_terms(u, b[0], sets); });
}

// ---------------------------------------------------------------------------

Tensor linspace(double lo, double hi, std::size_t n) {
    Tensor t({n});
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return t;
}

Tensor grid2(double x0, double x1, std::size_t nx, double t0, double t1, std::size_t nt) {
    const Tensor xs = linspace(x0, x1, nx), ts = linspace(t0, t1, nt);
    Tensor g({2, nx * nt});
    for (std::size_t j = 0; j < nt; ++j)
        for (std::size_t i = 0; i < nx; ++i) {
            g(0, j * nx + i) = xs[i];
            g(1, j * nx + i) = ts[j];
        }
    return g;
}

Tensor interior_grid2(double x0, double x1, std::size_t nx, double t0, double t1, std::size_t nt) {
    if (nx < 3 || nt < 3) throw ParameterError("an interior grid needs at least 3 points per axis");
    const Tensor full = grid2(x0, x1, nx, t0, t1, nt);
    Tensor g({2, (nx - 2) * (nt - 2)});
    std::size_t k = 0;
    for (std::size_t j = 1; j + 1 < nt; ++j)
        for (std::size_t i = 1; i + 1 < nx; ++i, ++k) {
            g(0, k) = full(0, j * nx + i);
            g(1, k) = full(1, j * nx + i);
        }
    return g;
}

Tensor sample_box(const std::vector<double>& lo, const std::vector<double>& hi, std::size_t count,
                  std::uint64_t seed) {
    if (lo.size() != hi.size() || lo.empty()) throw DimensionError("box bounds must have equal nonzero lengths");
    for (std::size_t i = 0; i < lo.size(); ++i)
        if (!(hi[i] > lo[i])) throw ParameterError("box extent " + std::to_string(i) + " must be positive");
    CounterRng rng(seed);
    Tensor p({lo.size(), count});
    for (std::size_t j = 0; j < count; ++j)
        for (std::size_t i = 0; i < lo.size(); ++i) p(i, j) = rng.uniform(lo[i], hi[i]);
    return p;
}

// ---------------------------------------------------------------------------

void validate(const PinnProblem& problem) {
    const auto need = [](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError(msg);
    };
    std::visit(
        [&](const auto& p) {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, ExplicitOperatorProblem>) {
                need(p.batch.size() > 0, "explicit problem: batch must hold at least 1 sample");
                need(p.batch.size() % p.H.output_size() == 0, "explicit problem: batch rows must equal the data size");
                if (p.loss == ExplicitOperatorProblem::Loss::two_part) {
                    need(p.sigma_eps > 0.0, "explicit problem: sigma_eps must be > 0");
                    need(p.sigma_f > 0.0, "explicit problem: sigma_f must be > 0");
                }
                if (p.loss != ExplicitOperatorProblem::Loss::explicit_only) {
                    need(p.f_bar.size() == p.H.input_size(), "explicit problem: f_bar must have the unknown size");
                }
            } else if constexpr (std::is_same_v<P, PdeAdvectionProblem>) {
                need(p.sets.colloc.size() > 0, "pde problem: colloc must hold at least 1 point");
                need(p.sets.colloc.rank() == 2 && p.sets.colloc.rows() == 2, "pde problem: colloc must be [2 x N]");
                need(p.sets.ic_weight >= 0.0, "pde problem: ic_weight must be >= 0");
                need(p.sets.bc_weight >= 0.0, "pde problem: bc_weight must be >= 0");
            } else {
                need(p.data.size() >= 1, "ode problem: data must hold at least 1 observation");
                need(p.data.u.size() == p.data.t.size(), "ode problem: data t and u must have equal counts");
                if constexpr (std::is_same_v<P, OdeKnownProblem>) need(static_cast<bool>(p.rhs), "ode problem: rhs missing");
            }
        },
        problem);
}

Field default_field(std::size_t inputs, std::size_t outputs, std::uint64_t seed, ParamSet& params,
                    const std::string& prefix, std::size_t hidden, std::size_t depth) {
    std::vector<std::size_t> sizes{inputs};
    for (std::size_t i = 0; i < depth; ++i) sizes.push_back(hidden);
    sizes.push_back(outputs);
    Net net = make_mlp(sizes, Activation::tanh, seed, prefix);
    for (const auto& e : net.params.entries()) params.add(e.name, e.value, e.trainable);
    return Field::network(std::move(net.spec));
}

TermVars problem_terms(const PinnProblem& problem, const PinnModel& model, const std::vector<BoundParams>& b) {
    if (b.size() != 3) throw ContractError("expected bound (u, theta, f_hat) parameter sets");
    return std::visit(
        [&](const auto& p) -> TermVars {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, ExplicitOperatorProblem>) {
                const Var g = b[0].tape().constant(batch_of(p.batch, p.H.output_size()));
                switch (p.loss) {
                    case ExplicitOperatorProblem::Loss::explicit_only:
                        return explicit_terms(model.u.spec(), b[0], p.H, g);
                    case ExplicitOperatorProblem::Loss::two_part:
                        return two_part_terms(model.u.spec(), b[0], p.H, g, p.sigma_eps, p.sigma_f, p.f_bar);
                    case ExplicitOperatorProblem::Loss::trace:
                        return trace_terms(model.u.spec(), b[0], p.H, g, p.f_bar);
                }
                throw ContractError("unknown explicit loss");
            } else if constexpr (std::is_same_v<P, OdeKnownProblem>) {
                return ode_terms(model.u, b[0], p.data, p.colloc, p.rhs);
            } else if constexpr (std::is_same_v<P, OdeParametricProblem>) {
                return parametric_terms(model.u, b[0], b[1], p.data, p.colloc);
            } else if constexpr (std::is_same_v<P, OdeNonparametricProblem>) {
                if (!model.f_hat) throw ContractError("non-parametric problem needs a right-hand-side field");
                return nonparametric_terms(model.u, b[0], *model.f_hat, b[2], p.data, p.colloc);
            } else {
                return pde_terms(model.u, b[0], p.sets);
            }
        },
        problem);
}

PinnLossStats evaluate_problem(const PinnProblem& problem, const PinnModel& model) {
    validate(problem);
    return untaped({&model.u_params, &model.theta, &model.f_params},
                   [&](const std::vector<BoundParams>& b) { return problem_terms(problem, model, b); });
}

PinnTrainResult train_pinn(const PinnProblem& problem, const PinnModel& model, const TrainConfig& cfg) {
    validate(problem);
    const Objective obj = [&](Tape&, const std::vector<BoundParams>& b, std::span<const std::size_t>) {
        const TermVars t = problem_terms(problem, model, b);
        const PinnLossStats s = term_values(t);
        return LossEval{t.total, {s.data, s.physics, s.ic, s.bc}};
    };
    TrainResult r = optimize({model.u_params, model.theta, model.f_params}, 1, obj, cfg);
    PinnTrainResult out;
    out.model = model;
    out.model.u_params = std::move(r.params[0]);
    out.model.theta = std::move(r.params[1]);
    out.model.f_params = std::move(r.params[2]);
    out.best_step = r.best_step;
    for (std::size_t i = 0; i < r.history.size(); ++i) {
        PinnLossStats s;
        s.data = r.terms[i][0];
        s.physics = r.terms[i][1];
        s.ic = r.terms[i][2];
        s.bc = r.terms[i][3];
        s.total = r.history[i];
        out.history.push_back(std::move(s));
    }
    return out;
}

std::string history_csv(const std::vector<PinnLossStats>& history) {
    std::string out = "step,data,physics,ic,bc,total\n";
    for (std::size_t i = 0; i < history.size(); ++i) {
        out += std::to_string(i);
        for (double v : {history[i].data, history[i].physics, history[i].ic, history[i].bc, history[i].total}) {
            out += ',';
            append(out, v);
        }
        out += '\n';
    }
    return out;
}

}  // namespace mbnn::pinn
