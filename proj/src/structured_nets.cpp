#include "mbnn/structured_nets.hpp"

#include "mbnn/errors.hpp"
#include "mbnn/transforms.hpp"

namespace mbnn {

using bayes::InverseForm;

namespace {

Layer linear_stage(ParamSet& params, const std::string& name, const LinearOp& op) {
    if (op.kind() == LinearOp::Kind::matrix) return affine_layer(params, name, op.to_matrix());
    return conv_layer(params, name, op.effective_kernel(), op.image_rows(), op.image_cols());
}

/// Append `net` to `out`, renaming parameters with `prefix` and shifting residual taps.
void append(Net& out, const Net& net, const std::string& prefix) {
    const std::size_t offset = out.spec.layers.size();
    for (Layer l : net.spec.layers) {
        for (std::string* name : {&l.weight, &l.bias, &l.threshold})
            if (!name->empty()) *name = prefix + *name;
        if (l.kind == LayerKind::residual_add) l.tap += offset;
        out.spec.layers.push_back(std::move(l));
    }
    for (const auto& e : net.params.entries()) out.params.add(prefix + e.name, e.value, e.trainable);
}

}  // namespace

Net build_analytic_net(const LinearOp& H, double lambda, InverseForm form) {
    const bayes::InverseFactorization f = bayes::inverse_factorizations(H, lambda);
    Net net;
    net.spec.input_size = H.output_size();
    switch (form) {
        case InverseForm::A: net.spec.layers.push_back(linear_stage(net.params, "A", f.A())); break;
        case InverseForm::BHt:
            net.spec.layers.push_back(linear_stage(net.params, "Ht", f.Ht()));
            net.spec.layers.push_back(linear_stage(net.params, "B", f.B()));
            break;
        case InverseForm::HtC:
            net.spec.layers.push_back(linear_stage(net.params, "C", f.C()));
            net.spec.layers.push_back(linear_stage(net.params, "Ht", f.Ht()));
            break;
    }
    net.spec.validate(net.params);
    return net;
}

Net build_residual_net(const Net& core) {
    core.spec.validate();
    if (core.spec.output_size() != core.spec.input_size) {
        throw StructureError("residual core maps " + std::to_string(core.spec.input_size) + " features to " +
                             std::to_string(core.spec.output_size()) + "; sizes must match");
    }
    Net net = core;
    const std::size_t n = core.spec.input_size;
    net.spec.secondary = core.spec.layers.size();
    net.spec.layers.push_back(residual_layer(n, 0, 1.0, -1.0));
    net.spec.validate(net.params);
    return net;
}

Net build_transform_net(TransformKind kind, std::size_t rows, std::size_t cols, std::size_t levels, Tensor mask_init) {
    const std::size_t n = rows * cols;
    if (n == 0) throw DimensionError("transform net extents must be positive");
    if (kind == TransformKind::fft) {
        if (!is_power_of_two(rows) || !is_power_of_two(cols)) {
            throw SizeError("FFT net extents " + std::to_string(rows) + "x" + std::to_string(cols) +
                            " must be powers of two");
        }
    } else {
        check_haar_size(rows, cols, levels);
    }
    if (mask_init.size() != n) {
        throw DimensionError("mask has " + std::to_string(mask_init.size()) + " entries, coefficient grid has " +
                             std::to_string(n));
    }
    Net net;
    net.spec.input_size = n;
    net.spec.layers.push_back(transform_layer(kind, TransformDir::forward, rows, cols, levels));
    const std::size_t coeffs = net.spec.layers.back().out;
    net.spec.layers.push_back(mask_layer(net.params, "DO", mask_init.reshaped({n}), coeffs));
    net.spec.layers.push_back(transform_layer(kind, TransformDir::adjoint, rows, cols, levels));
    net.spec.validate(net.params);
    return net;
}

Net chain(const std::vector<Net>& stages, const std::string& prefix) {
    if (stages.empty()) throw StructureError("a chain needs at least one stage");
    Net out;
    out.spec.input_size = stages.front().spec.input_size;
    for (std::size_t i = 0; i < stages.size(); ++i) {
        stages[i].spec.validate();
        if (i > 0 && stages[i].spec.input_size != out.spec.output_size()) {
            throw StructureError("stage " + std::to_string(i) + " expects " +
                                 std::to_string(stages[i].spec.input_size) + " inputs but the previous stage yields " +
                                 std::to_string(out.spec.output_size()));
        }
        append(out, stages[i], prefix + std::to_string(i) + "/");
    }
    out.spec.validate(out.params);
    return out;
}

Net build_encoder_decoder(const std::vector<Net>& encoders, const std::vector<Net>& decoders) {
    if (encoders.empty() && decoders.empty()) throw StructureError("encoder-decoder needs at least one stage");
    Net out;
    out.spec.input_size = encoders.empty() ? decoders.back().spec.input_size : encoders.front().spec.input_size;
    std::size_t stage = 0;
    auto add = [&](const Net& net, const std::string& label, const std::string& prefix) {
        net.spec.validate();
        if (stage > 0 && net.spec.input_size != out.spec.output_size()) {
            throw StructureError("stage " + std::to_string(stage) + " (" + label + ") expects " +
                                 std::to_string(net.spec.input_size) + " inputs but receives " +
                                 std::to_string(out.spec.output_size()));
        }
        append(out, net, prefix);
        ++stage;
    };
    for (std::size_t i = 0; i < encoders.size(); ++i)
        add(encoders[i], "encoder " + std::to_string(i), "enc" + std::to_string(i) + "/");
    for (std::size_t j = decoders.size(); j-- > 0;)
        add(decoders[j], "decoder " + std::to_string(j), "dec" + std::to_string(j) + "/");
    out.spec.validate(out.params);
    return out;
}

Dataset Dataset::subset(std::span<const std::size_t> idx) const {
    auto pick = [&](const Tensor& t) {
        Tensor o({t.rows(), idx.size()});
        for (std::size_t r = 0; r < t.rows(); ++r)
            for (std::size_t j = 0; j < idx.size(); ++j) o(r, j) = t(r, idx[j]);
        return o;
    };
    return {pick(inputs), pick(targets)};
}

double mse(const NetSpec& spec, const ParamSet& params, const Dataset& data) {
    const Tensor out = evaluate(spec, params, data.inputs);
    if (out.shape() != data.targets.shape()) throw DimensionError("targets do not match the net output shape");
    return squared_norm(out - data.targets) / static_cast<double>(out.size());
}

Objective mse_objective(const NetSpec& spec, const Dataset& data) {
    if (data.size() == 0) throw ParameterError("training data is empty");
    if (data.inputs.rows() != spec.input_size || data.targets.rows() != spec.output_size() ||
        data.targets.cols() != data.size()) {
        throw DimensionError("dataset shapes [" + shape_string(data.inputs.shape()) + "] -> [" +
                             shape_string(data.targets.shape()) + "] do not match the net");
    }
    return [&spec, &data](Tape& tape, const std::vector<BoundParams>& p, std::span<const std::size_t> batch) {
        const bool full = batch.size() == data.size();
        const Dataset sub = full ? Dataset{} : data.subset(batch);
        const Dataset& d = full ? data : sub;
        const Var out = net_forward(spec, p[0], tape.constant(d.inputs));
        const Var err = ad::sub(out, tape.constant(d.targets));
        const double scale = 1.0 / static_cast<double>(d.targets.size());
        return LossEval{ad::scale_shift(ad::sum_squares(err), scale), {}};
    };
}

NetTrainResult train(const NetSpec& spec, const ParamSet& params, const Dataset& data, const TrainConfig& cfg) {
    spec.validate(params);
    const Objective obj = mse_objective(spec, data);
    TrainResult r = optimize({params}, data.size(), obj, cfg);
    return {std::move(r.params[0]), std::move(r.history), r.best_step};
}

}  // namespace mbnn
