#pragma once

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mbnn/linear_op.hpp"
#include "mbnn/netspec.hpp"
#include "mbnn/params.hpp"
#include "mbnn/train.hpp"

namespace mbnn::pinn {

/// A field on points [input_size x N] with values [output_size x N]: either a
/// network or an injected analytic evaluator. Analytic fields enter the tape as
/// constants, so no gradient flows through them.
class Field {
public:
    using ValueFn = std::function<Tensor(const Tensor& points)>;
    using PartialFn = std::function<Tensor(const Tensor& points, std::size_t coord)>;

    static Field network(NetSpec spec);
    static Field analytic(std::size_t input_size, std::size_t output_size, ValueFn value, PartialFn partial = {});

    std::size_t input_size() const noexcept { return in_; }
    std::size_t output_size() const noexcept { return out_; }
    bool is_network() const noexcept { return spec_.has_value(); }
    /// Throws ContractError for analytic fields.
    const NetSpec& spec() const;

    /// Taped value at points (params are ignored by analytic fields).
    Var value(const BoundParams& params, Var points) const;
    /// Value and derivative along `direction` (one weight per input coordinate).
    Dual directional(const BoundParams& params, Var points, const std::vector<double>& direction) const;
    /// Untaped value; points [input_size] or [input_size x N].
    Tensor evaluate(const ParamSet& params, const Tensor& points) const;

private:
    std::size_t in_ = 0, out_ = 0;
    std::optional<NetSpec> spec_;
    ValueFn value_;
    PartialFn partial_;
};

/// Loss breakdown. `physics` is the model-knowledge term: the ODE/PDE residual,
/// or the prior term of the explicit-operator losses. Inactive terms are 0.
struct PinnLossStats {
    double data = 0.0, physics = 0.0, ic = 0.0, bc = 0.0, total = 0.0;
    std::optional<Tensor> sigma_eps, sigma_f;  ///< trace loss only
};

/// The same terms on a tape; invalid Vars are inactive terms.
struct TermVars {
    Var data, physics, ic, bc, total;
};
PinnLossStats term_values(const TermVars& terms);

// ---------------------------------------------------------------------------
// Explicit forward operator: the net maps data g to an estimate f.

/// ||g - H net(g)||^2 summed over the columns of g ([m] or [m x B]).
double loss_explicit(const NetSpec& net, const ParamSet& params, const LinearOp& H, const Tensor& g);
TermVars explicit_terms(const NetSpec& net, const BoundParams& params, const LinearOp& H, Var g);

/// (1/se^2) sum ||g_i - H f_i||^2 + (1/sf^2) sum ||f_i - fbar||^2 with f_i = net(g_i).
double loss_two_part(const NetSpec& net, const ParamSet& params, const LinearOp& H, const Tensor& batch,
                     double sigma_eps, double sigma_f, const Tensor& f_bar);
TermVars two_part_terms(const NetSpec& net, const BoundParams& params, const LinearOp& H, Var batch, double sigma_eps,
                        double sigma_f, const Tensor& f_bar);

/// Tr Se + Tr Sf with Se = sum (g_i - H f_i)(g_i - H f_i)^T and Sf = sum (f_i - fbar)(f_i - fbar)^T.
/// The stats carry both matrices.
PinnLossStats loss_trace(const NetSpec& net, const ParamSet& params, const LinearOp& H, const Tensor& batch,
                         const Tensor& f_bar);
TermVars trace_terms(const NetSpec& net, const BoundParams& params, const LinearOp& H, Var batch, const Tensor& f_bar);

// ---------------------------------------------------------------------------
// ODE du/dt = f(t, u) with a scalar field u(t).

/// Taped right-hand side on rows [1 x N] of times and values.
using Rhs = std::function<Var(Var t, Var u)>;

/// Observations u_j at times t_j, each [N].
struct OdeData {
    Tensor t, u;
    std::size_t size() const { return t.size(); }
};

/// du/dt - f(t, u) per collocation point; t is [N]; result [N].
Tensor ode_residual(const Field& u, const ParamSet& params, const Tensor& t, const Rhs& rhs);
Var ode_residual(const Field& u, const BoundParams& params, Var t, const Rhs& rhs);

/// sum_j (u_j - u(t_j))^2.
double loss_classic(const Field& u, const ParamSet& params, const OdeData& data);
/// loss_classic + sum over colloc of residual^2 (colloc may be empty).
PinnLossStats loss_ode(const Field& u, const ParamSet& params, const OdeData& data, const Tensor& colloc,
                       const Rhs& rhs);
TermVars ode_terms(const Field& u, const BoundParams& params, const OdeData& data, const Tensor& colloc,
                   const Rhs& rhs);

/// Unknown-parameter model f(t, u) = a u + b; theta holds scalars "a" and "b".
ParamSet make_theta(double a, double b);
Rhs parametric_rhs(const BoundParams& theta);
PinnLossStats loss_parametric(const Field& u, const ParamSet& params, const ParamSet& theta, const OdeData& data,
                              const Tensor& colloc);
TermVars parametric_terms(const Field& u, const BoundParams& params, const BoundParams& theta, const OdeData& data,
                          const Tensor& colloc);

/// Right-hand side learned by a second field f_hat taking rows (u, t).
PinnLossStats loss_nonparametric(const Field& u, const ParamSet& u_params, const Field& f_hat,
                                 const ParamSet& f_params, const OdeData& data, const Tensor& colloc);
TermVars nonparametric_terms(const Field& u, const BoundParams& u_params, const Field& f_hat,
                             const BoundParams& f_params, const OdeData& data, const Tensor& colloc);

// ---------------------------------------------------------------------------
// Advection u_t + u_x = u on (x, t) with initial and boundary conditions.

/// Points [2 x N] with rows (x, t) and target values [N].
struct PointData {
    Tensor points, values;
    std::size_t size() const { return values.size(); }
};

struct PdeSets {
    PointData data;   ///< interior observations (optional)
    Tensor colloc;    ///< [2 x N] residual points (required)
    PointData ic;     ///< points with t = 0 (optional)
    PointData bc;     ///< points with x = 0 (optional)
    double ic_weight = 1.0, bc_weight = 1.0;
    /// Use (u + u_hat)^2 for the boundary term instead of (u - u_hat)^2.
    bool bc_plus = false;
};

/// u_t + u_x - u per point; points [2 x N]; result [N].
Tensor advection_residual(const Field& u, const ParamSet& params, const Tensor& points);
Var advection_residual(const Field& u, const BoundParams& params, Var points);

PinnLossStats loss_pde(const Field& u, const ParamSet& params, const PdeSets& sets);
TermVars pde_terms(const Field& u, const BoundParams& params, const PdeSets& sets);

// ---------------------------------------------------------------------------
// Collocation helpers.

/// n evenly spaced points on [lo, hi] (both ends included; n = 1 gives lo).
Tensor linspace(double lo, double hi, std::size_t n);
/// Tensor grid [2 x nx*nt], x fastest.
Tensor grid2(double x0, double x1, std::size_t nx, double t0, double t1, std::size_t nt);
/// Points of grid2 that are not on the boundary of the box.
Tensor interior_grid2(double x0, double x1, std::size_t nx, double t0, double t1, std::size_t nt);
/// `count` points uniform in the box [lo_i, hi_i], one row per coordinate.
Tensor sample_box(const std::vector<double>& lo, const std::vector<double>& hi, std::size_t count,
                  std::uint64_t seed);

// ---------------------------------------------------------------------------
// Problems and training.

struct ExplicitOperatorProblem {
    enum class Loss { explicit_only, two_part, trace };
    LinearOp H;
    Tensor batch;  ///< [m x B]
    Loss loss = Loss::two_part;
    double sigma_eps = 1.0, sigma_f = 1.0;
    Tensor f_bar;
};
struct OdeKnownProblem {
    Rhs rhs;
    OdeData data;
    Tensor colloc;
};
struct OdeParametricProblem {
    OdeData data;
    Tensor colloc;
};
struct OdeNonparametricProblem {
    OdeData data;
    Tensor colloc;
};
struct PdeAdvectionProblem {
    PdeSets sets;
};

using PinnProblem = std::variant<ExplicitOperatorProblem, OdeKnownProblem, OdeParametricProblem,
                                 OdeNonparametricProblem, PdeAdvectionProblem>;

/// Checks collocation counts, sizes and positive sigmas; throws ConfigError.
void validate(const PinnProblem& problem);

/// Trainable state: the main field, theta for the parametric ODE and the
/// right-hand-side field for the non-parametric ODE.
struct PinnModel {
    Field u;
    ParamSet u_params;
    ParamSet theta;
    std::optional<Field> f_hat;
    ParamSet f_params;
};

/// Default tanh net: 2 hidden layers of 16 units.
Field default_field(std::size_t inputs, std::size_t outputs, std::uint64_t seed, ParamSet& params,
                    const std::string& prefix = "u", std::size_t hidden = 16, std::size_t depth = 2);

TermVars problem_terms(const PinnProblem& problem, const PinnModel& model, const std::vector<BoundParams>& bound);
PinnLossStats evaluate_problem(const PinnProblem& problem, const PinnModel& model);

struct PinnTrainResult {
    PinnModel model;                     ///< best-so-far state
    std::vector<PinnLossStats> history;  ///< after 0..steps updates
    std::size_t best_step = 0;
};

/// Trains every trainable parameter of the model. Deterministic for a given config.
PinnTrainResult train_pinn(const PinnProblem& problem, const PinnModel& model, const TrainConfig& cfg);

/// "step,data,physics,ic,bc,total" rows.
std::string history_csv(const std::vector<PinnLossStats>& history);

}  // namespace mbnn::pinn
