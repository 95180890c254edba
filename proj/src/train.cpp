#include "mbnn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mbnn/errors.hpp"
#include "mbnn/rng.hpp"

namespace mbnn {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("learning_rate = " + std::to_string(learning_rate) + " must be > 0");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must be in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must be in [0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
}

namespace {

struct Pass {
    double loss = 0.0;
    std::vector<double> terms;
    std::vector<ParamGrads> grads;
};

Pass run_pass(const std::vector<ParamSet>& params, std::span<const std::size_t> batch, const Objective& objective,
              bool want_grads) {
    Tape tape;
    std::vector<BoundParams> bound;
    bound.reserve(params.size());
    for (const auto& p : params) bound.emplace_back(tape, p);
    LossEval ev = objective(tape, bound, batch);
    Pass out;
    out.loss = ev.loss.value().item();
    out.terms = std::move(ev.terms);
    if (want_grads && std::isfinite(out.loss)) {
        const Gradients g = tape.backward(ev.loss);
        for (const auto& b : bound) out.grads.push_back(b.gradients(g));
    }
    return out;
}

bool finite(const std::vector<ParamGrads>& grads) {
    for (const auto& set : grads)
        for (const auto& [name, t] : set)
            for (double v : t.data())
                if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace

LossGrad loss_and_gradients(const std::vector<ParamSet>& params, std::size_t samples, const Objective& objective) {
    std::vector<std::size_t> all(samples);
    std::iota(all.begin(), all.end(), 0);
    Pass p = run_pass(params, all, objective, true);
    return {p.loss, std::move(p.grads)};
}

TrainResult optimize(std::vector<ParamSet> params, std::size_t samples, const Objective& objective,
                     const TrainConfig& cfg, const Monitor& monitor) {
    cfg.validate();
    if (samples == 0) throw ParameterError("training needs at least one sample");
    std::vector<std::size_t> all(samples);
    std::iota(all.begin(), all.end(), 0);
    const bool minibatch = cfg.batch_size > 0 && cfg.batch_size < samples;
    CounterRng rng(cfg.seed);
    std::vector<std::size_t> perm = all;

    // optimizer state, parallel to params
    std::vector<std::vector<Tensor>> m(params.size()), v(params.size());
    for (std::size_t s = 0; s < params.size(); ++s)
        for (const auto& e : params[s].entries()) {
            m[s].push_back(Tensor(e.value.shape()));
            v[s].push_back(Tensor(e.value.shape()));
        }

    TrainResult res;
    res.params = params;
    res.best_loss = INFINITY;
    for (std::size_t step = 0;; ++step) {
        Pass full = run_pass(params, all, objective, !minibatch && step < cfg.steps);
        if (!std::isfinite(full.loss)) {
            throw DivergenceError(step, "loss became non-finite at step " + std::to_string(step));
        }
        res.history.push_back(full.loss);
        res.terms.push_back(full.terms);
        if (monitor) monitor(step, params);
        if (full.loss < res.best_loss) {
            res.best_loss = full.loss;
            res.best_step = step;
            res.params = params;
        }
        if (step == cfg.steps) break;

        std::vector<ParamGrads> grads;
        if (minibatch) {
            // partial Fisher-Yates draw without replacement
            for (std::size_t i = 0; i < cfg.batch_size; ++i) {
                const std::size_t j = i + static_cast<std::size_t>(rng.below(samples - i));
                std::swap(perm[i], perm[j]);
            }
            std::vector<std::size_t> batch(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(cfg.batch_size));
            std::sort(batch.begin(), batch.end());
            Pass p = run_pass(params, batch, objective, true);
            if (!std::isfinite(p.loss)) {
                throw DivergenceError(step, "minibatch loss became non-finite at step " + std::to_string(step));
            }
            grads = std::move(p.grads);
        } else {
            grads = std::move(full.grads);
        }
        if (!finite(grads)) throw DivergenceError(step, "gradient became non-finite at step " + std::to_string(step));

        const double t = static_cast<double>(step + 1);
        const double c1 = 1.0 - std::pow(cfg.beta1, t), c2 = 1.0 - std::pow(cfg.beta2, t);
        for (std::size_t s = 0; s < params.size(); ++s) {
            const auto& entries = params[s].entries();
            for (std::size_t k = 0; k < entries.size(); ++k) {
                if (!entries[k].trainable) continue;
                const auto it = grads[s].find(entries[k].name);
                if (it == grads[s].end()) continue;
                const Tensor& g = it->second;
                Tensor w = entries[k].value;
                if (cfg.optimizer == Optimizer::sgd) {
                    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= cfg.learning_rate * g[i];
                } else {
                    Tensor& mk = m[s][k];
                    Tensor& vk = v[s][k];
                    for (std::size_t i = 0; i < w.size(); ++i) {
                        mk[i] = cfg.beta1 * mk[i] + (1.0 - cfg.beta1) * g[i];
                        vk[i] = cfg.beta2 * vk[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                        w[i] -= cfg.learning_rate * (mk[i] / c1) / (std::sqrt(vk[i] / c2) + cfg.epsilon);
                    }
                }
                params[s].set(entries[k].name, std::move(w));
            }
        }
    }
    return res;
}

std::vector<double> best_so_far(const std::vector<double>& history) {
    std::vector<double> out(history.size());
    double best = INFINITY;
    for (std::size_t i = 0; i < history.size(); ++i) out[i] = best = std::min(best, history[i]);
    return out;
}

}  // namespace mbnn
