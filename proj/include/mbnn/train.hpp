#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mbnn/params.hpp"
#include "mbnn/tape.hpp"

namespace mbnn {

enum class Optimizer { sgd, adam };

struct TrainConfig {
    Optimizer optimizer = Optimizer::adam;
    double learning_rate = 1e-3;
    std::size_t steps = 0;
    std::size_t batch_size = 0;  ///< 0 or >= sample count: full batch
    std::uint64_t seed = 0;
    double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

/// Loss recorded on a tape plus optional named sub-terms (reporting only).
struct LossEval {
    Var loss;
    std::vector<double> terms;
};

/// Builds the loss for the samples in `batch` (all samples when training full batch).
using Objective = std::function<LossEval(Tape&, const std::vector<BoundParams>&, std::span<const std::size_t> batch)>;

struct TrainResult {
    std::vector<ParamSet> params;             ///< best-so-far parameters
    std::vector<double> history;              ///< full-data loss after 0..steps updates
    std::vector<std::vector<double>> terms;   ///< full-data sub-terms per history entry
    std::size_t best_step = 0;
    double best_loss = 0.0;
};

/// Called with the step index and the current parameters before each update
/// (and once after the last one).
using Monitor = std::function<void(std::size_t step, const std::vector<ParamSet>& params)>;

/// First-order training over several parameter sets. Deterministic for a given
/// seed. history has steps + 1 entries; a non-finite loss or gradient throws
/// DivergenceError carrying the step index.
TrainResult optimize(std::vector<ParamSet> params, std::size_t samples, const Objective& objective,
                     const TrainConfig& cfg, const Monitor& monitor = {});

/// Loss and per-set gradients at the given parameters over all samples.
struct LossGrad {
    double loss = 0.0;
    std::vector<ParamGrads> grads;
};
LossGrad loss_and_gradients(const std::vector<ParamSet>& params, std::size_t samples, const Objective& objective);

/// Running best of a loss history.
std::vector<double> best_so_far(const std::vector<double>& history);

}  // namespace mbnn
