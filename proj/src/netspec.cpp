#include "mbnn/netspec.hpp"

#include <cmath>
#include <map>

#include "mbnn/errors.hpp"
#include "mbnn/rng.hpp"
#include "mbnn/transforms.hpp"

namespace mbnn {

const char* to_string(LayerKind k) noexcept {
    switch (k) {
        case LayerKind::affine: return "affine";
        case LayerKind::conv: return "conv";
        case LayerKind::pointwise: return "pointwise";
        case LayerKind::diag_mask: return "diag_mask";
        case LayerKind::transform: return "transform";
        case LayerKind::residual_add: return "residual_add";
    }
    return "?";
}

const char* to_string(Activation a) noexcept {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::tanh: return "tanh";
        case Activation::sin: return "sin";
        case Activation::soft_threshold: return "soft_threshold";
    }
    return "?";
}

namespace {

[[noreturn]] void fail(std::size_t i, const Layer& l, const std::string& what) {
    throw StructureError("layer " + std::to_string(i) + " (" + to_string(l.kind) + "): " + what);
}

bool is_linear_kind(const Layer& l) {
    return l.kind == LayerKind::affine || l.kind == LayerKind::conv || l.kind == LayerKind::diag_mask ||
           l.kind == LayerKind::transform;
}

Var threshold_var(const Layer& l, const BoundParams& p) {
    if (l.threshold.empty()) return p.tape().constant(Tensor::scalar(l.threshold_value));
    const Var t = p[l.threshold];
    return l.log_threshold ? ad::exp(t) : t;
}

/// Linear part of a layer applied to v (affine without bias, conv, mask, transform).
Var apply_linear(const Layer& l, const BoundParams& p, Var v) {
    switch (l.kind) {
        case LayerKind::affine: return ad::matmul(p[l.weight], v);
        case LayerKind::conv: return ad::conv2d(v, p[l.weight], l.rows, l.cols);
        case LayerKind::diag_mask: return ad::diag_mask(v, p[l.weight]);
        case LayerKind::transform:
            if (l.transform == TransformKind::fft) {
                return l.dir == TransformDir::forward ? ad::fft_fwd(v, l.rows, l.cols) : ad::fft_adj(v, l.rows, l.cols);
            }
            return l.dir == TransformDir::forward ? ad::haar_fwd(v, l.rows, l.cols, l.levels)
                                                  : ad::haar_inv(v, l.rows, l.cols, l.levels);
        default: break;
    }
    throw ContractError("apply_linear on a nonlinear layer");
}

Var combine(const Layer& l, Var tap, Var self) {
    const Var a = l.tap_coef == 1.0 ? tap : ad::scale_shift(tap, l.tap_coef);
    const Var b = l.self_coef == 1.0 ? self : ad::scale_shift(self, l.self_coef);
    return ad::add(a, b);
}

Tensor as_batch(const Tensor& x, std::size_t features, const char* what) {
    if (x.rank() == 1 && x.size() == features) return x.reshaped({features, 1});
    if (x.rank() == 2 && x.rows() == features) return x;
    throw DimensionError(std::string(what) + ": expected [" + std::to_string(features) + "] or [" +
                         std::to_string(features) + " x batch], got " + shape_string(x.shape()));
}

}  // namespace

std::size_t NetSpec::value_size(std::size_t i) const {
    if (i == 0) return input_size;
    if (i > layers.size()) throw IndexError("value index " + std::to_string(i) + " out of range");
    return layers[i - 1].out;
}

std::size_t NetSpec::output_size() const { return value_size(layers.size()); }

void NetSpec::validate() const {
    if (input_size == 0) throw StructureError("net input size must be positive");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const Layer& l = layers[i];
        const std::size_t prev = value_size(i);
        if (l.in != prev) {
            fail(i, l, "expects " + std::to_string(l.in) + " inputs but receives " + std::to_string(prev));
        }
        if (l.out == 0) fail(i, l, "output size must be positive");
        switch (l.kind) {
            case LayerKind::affine:
                if (l.weight.empty()) fail(i, l, "missing weight binding");
                break;
            case LayerKind::conv:
                if (l.weight.empty()) fail(i, l, "missing kernel binding");
                if (l.rows * l.cols != l.in || l.out != l.in) fail(i, l, "image geometry does not match sizes");
                break;
            case LayerKind::pointwise:
                if (l.out != l.in) fail(i, l, "pointwise layers preserve size");
                break;
            case LayerKind::diag_mask:
                if (l.weight.empty()) fail(i, l, "missing mask binding");
                if (l.out != l.in) fail(i, l, "masks preserve size");
                break;
            case LayerKind::transform: {
                const std::size_t n = l.rows * l.cols;
                if (n == 0) fail(i, l, "image geometry must be positive");
                if (l.transform == TransformKind::fft) {
                    if (!is_power_of_two(l.rows) || !is_power_of_two(l.cols)) {
                        throw SizeError("layer " + std::to_string(i) + " (transform): FFT extents " +
                                        std::to_string(l.rows) + "x" + std::to_string(l.cols) +
                                        " are not powers of two");
                    }
                    const bool fwd = l.dir == TransformDir::forward;
                    if (l.in != (fwd ? n : 2 * n) || l.out != (fwd ? 2 * n : n)) {
                        fail(i, l, "FFT sizes must be n -> 2n (forward) or 2n -> n (adjoint)");
                    }
                } else {
                    check_haar_size(l.rows, l.cols, l.levels);
                    if (l.in != n || l.out != n) fail(i, l, "Haar sizes must equal rows*cols");
                }
                break;
            }
            case LayerKind::residual_add:
                if (l.tap > i) fail(i, l, "tap " + std::to_string(l.tap) + " is not an earlier value");
                if (value_size(l.tap) != l.in || l.out != l.in) {
                    fail(i, l, "tap value has " + std::to_string(value_size(l.tap)) + " features, layer has " +
                                   std::to_string(l.in));
                }
                break;
        }
    }
    if (secondary && *secondary > layers.size()) throw StructureError("secondary output index out of range");
}

void NetSpec::validate(const ParamSet& params) const {
    validate();
    std::map<std::string, std::size_t, std::less<>> uses;
    auto need = [&](std::size_t i, const Layer& l, const std::string& name, auto&& check) {
        if (!params.contains(name)) fail(i, l, "parameter '" + name + "' is not in the parameter set");
        ++uses[name];
        check(params.get(name));
    };
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const Layer& l = layers[i];
        switch (l.kind) {
            case LayerKind::affine:
                need(i, l, l.weight, [&](const Tensor& w) {
                    if (w.rank() != 2 || w.rows() != l.out || w.cols() != l.in) {
                        fail(i, l, "weight '" + l.weight + "' must be [" + std::to_string(l.out) + " x " +
                                       std::to_string(l.in) + "], is " + shape_string(w.shape()));
                    }
                });
                if (!l.bias.empty()) {
                    need(i, l, l.bias, [&](const Tensor& b) {
                        if (b.size() != l.out) fail(i, l, "bias '" + l.bias + "' must have " + std::to_string(l.out) + " entries");
                    });
                }
                break;
            case LayerKind::conv:
                need(i, l, l.weight, [&](const Tensor& k) {
                    if (k.rank() != 2 || k.rows() > l.rows || k.cols() > l.cols) {
                        fail(i, l, "kernel '" + l.weight + "' must be rank 2 and fit the image");
                    }
                });
                break;
            case LayerKind::diag_mask:
                need(i, l, l.weight, [&](const Tensor& m) {
                    if (m.size() == 0 || l.in % m.size() != 0) {
                        fail(i, l, "mask '" + l.weight + "' size " + std::to_string(m.size()) + " does not divide " +
                                       std::to_string(l.in));
                    }
                });
                break;
            case LayerKind::pointwise:
                if (l.act == Activation::soft_threshold && !l.threshold.empty()) {
                    need(i, l, l.threshold, [&](const Tensor& t) {
                        if (t.size() != 1) fail(i, l, "threshold '" + l.threshold + "' must be a scalar");
                    });
                }
                break;
            default: break;
        }
    }
    for (const auto& e : params.entries()) {
        if (!e.trainable) continue;
        const auto it = uses.find(e.name);
        const std::size_t n = it == uses.end() ? 0 : it->second;
        if (n != 1) {
            throw StructureError("trainable parameter '" + e.name + "' is bound " + std::to_string(n) +
                                 " times; it must be bound exactly once");
        }
    }
}

NetOutputs forward_all(const NetSpec& spec, const BoundParams& p, Var x) {
    if (x.shape().size() != 2 || x.shape()[0] != spec.input_size) {
        throw DimensionError("net input must be [" + std::to_string(spec.input_size) + " x batch], got " +
                             shape_string(x.shape()));
    }
    std::vector<Var> vals{x};
    vals.reserve(spec.layers.size() + 1);
    for (const Layer& l : spec.layers) {
        const Var prev = vals.back();
        Var out;
        switch (l.kind) {
            case LayerKind::affine:
                out = apply_linear(l, p, prev);
                if (!l.bias.empty()) out = ad::add_col_bias(out, p[l.bias]);
                break;
            case LayerKind::pointwise:
                switch (l.act) {
                    case Activation::identity: out = prev; break;
                    case Activation::tanh: out = ad::tanh(prev); break;
                    case Activation::sin: out = ad::sin(prev); break;
                    case Activation::soft_threshold:
                        out = l.threshold.empty() ? ad::soft_threshold(prev, l.threshold_value)
                                                  : ad::soft_threshold(prev, threshold_var(l, p));
                        break;
                }
                break;
            case LayerKind::residual_add: out = combine(l, vals[l.tap], prev); break;
            default: out = apply_linear(l, p, prev); break;
        }
        vals.push_back(out);
    }
    NetOutputs o{vals.back(), std::nullopt};
    if (spec.secondary) o.secondary = vals.at(*spec.secondary);
    return o;
}

Var net_forward(const NetSpec& spec, const BoundParams& params, Var x) { return forward_all(spec, params, x).primary; }

Dual forward_tangent(const NetSpec& spec, const BoundParams& p, Var x, Var dx) {
    if (x.shape() != dx.shape()) throw DimensionError("tangent must match the input shape");
    std::vector<Var> vals{x}, tans{dx};
    for (const Layer& l : spec.layers) {
        const Var prev = vals.back(), tprev = tans.back();
        Var out, tout;
        if (is_linear_kind(l)) {
            out = apply_linear(l, p, prev);
            if (l.kind == LayerKind::affine && !l.bias.empty()) out = ad::add_col_bias(out, p[l.bias]);
            tout = apply_linear(l, p, tprev);
        } else if (l.kind == LayerKind::residual_add) {
            out = combine(l, vals[l.tap], prev);
            tout = combine(l, tans[l.tap], tprev);
        } else {
            switch (l.act) {
                case Activation::identity:
                    out = prev;
                    tout = tprev;
                    break;
                case Activation::tanh:
                    out = ad::tanh(prev);
                    // d tanh = (1 - a^2) dz
                    tout = ad::sub(tprev, ad::mul(ad::square(out), tprev));
                    break;
                case Activation::sin:
                    out = ad::sin(prev);
                    tout = ad::mul(ad::cos(prev), tprev);
                    break;
                case Activation::soft_threshold: {
                    const Var th = threshold_var(l, p);
                    out = ad::soft_threshold(prev, th);
                    tout = ad::st_deriv_mul(prev, th, tprev);
                    break;
                }
            }
        }
        vals.push_back(out);
        tans.push_back(tout);
    }
    return {vals.back(), tans.back()};
}

Tensor evaluate(const NetSpec& spec, const ParamSet& params, const Tensor& x) {
    Tape tape;
    const BoundParams p(tape, params);
    const Var out = net_forward(spec, p, tape.constant(as_batch(x, spec.input_size, "evaluate")));
    return x.rank() == 1 ? out.value().reshaped({out.value().size()}) : out.value();
}

Tensor evaluate_secondary(const NetSpec& spec, const ParamSet& params, const Tensor& x) {
    if (!spec.secondary) throw ContractError("net has no secondary output");
    Tape tape;
    const BoundParams p(tape, params);
    const Var out = *forward_all(spec, p, tape.constant(as_batch(x, spec.input_size, "evaluate"))).secondary;
    return x.rank() == 1 ? out.value().reshaped({out.value().size()}) : out.value();
}

Tensor input_grad(const NetSpec& spec, const ParamSet& params, const Tensor& x, std::size_t coord) {
    if (spec.output_size() != 1) {
        throw ContractError("input_grad needs a scalar-output net, output has " + std::to_string(spec.output_size()) +
                            " features");
    }
    if (coord >= spec.input_size) {
        throw IndexError("input coordinate " + std::to_string(coord) + " out of range for " +
                         std::to_string(spec.input_size) + " inputs");
    }
    Tape tape;
    const BoundParams p(tape, params);
    const Var xv = tape.variable(as_batch(x, spec.input_size, "input_grad"));
    // columns are independent, so the gradient of the batch sum is per-sample
    const Gradients g = tape.backward(ad::sum(net_forward(spec, p, xv)));
    const Tensor gx = g[xv];
    const std::size_t batch = gx.cols();
    Tensor out({batch});
    for (std::size_t b = 0; b < batch; ++b) out[b] = gx(coord, b);
    return out;
}

Layer affine_layer(ParamSet& params, const std::string& name, Tensor weight, std::optional<Tensor> bias) {
    if (weight.rank() != 2) throw DimensionError("affine weight must be rank 2");
    Layer l;
    l.kind = LayerKind::affine;
    l.in = weight.cols();
    l.out = weight.rows();
    l.weight = name + ".W";
    params.add(l.weight, std::move(weight));
    if (bias) {
        l.bias = name + ".b";
        params.add(l.bias, bias->reshaped({l.out}));
    }
    return l;
}

Layer conv_layer(ParamSet& params, const std::string& name, Tensor kernel, std::size_t rows, std::size_t cols) {
    Layer l;
    l.kind = LayerKind::conv;
    l.in = l.out = rows * cols;
    l.rows = rows;
    l.cols = cols;
    l.weight = name + ".K";
    params.add(l.weight, kernel.rank() == 1 ? kernel.reshaped({1, kernel.size()}) : std::move(kernel));
    return l;
}

Layer pointwise_layer(std::size_t size, Activation act) {
    if (act == Activation::soft_threshold) throw ParameterError("use soft_threshold_layer for thresholds");
    Layer l;
    l.kind = LayerKind::pointwise;
    l.in = l.out = size;
    l.act = act;
    return l;
}

Layer soft_threshold_layer(ParamSet& params, const std::string& name, std::size_t size, double theta,
                           bool log_space) {
    if (!(theta >= 0.0)) throw ParameterError("threshold must be >= 0");
    Layer l;
    l.kind = LayerKind::pointwise;
    l.in = l.out = size;
    l.act = Activation::soft_threshold;
    l.threshold = name + ".theta";
    l.log_threshold = log_space;
    params.add(l.threshold, Tensor::scalar(log_space ? std::log(theta) : theta));
    return l;
}

Layer mask_layer(ParamSet& params, const std::string& name, Tensor gains, std::size_t size) {
    Layer l;
    l.kind = LayerKind::diag_mask;
    l.in = l.out = size;
    l.weight = name + ".mask";
    params.add(l.weight, std::move(gains));
    return l;
}

Layer transform_layer(TransformKind kind, TransformDir dir, std::size_t rows, std::size_t cols, std::size_t levels) {
    Layer l;
    l.kind = LayerKind::transform;
    l.transform = kind;
    l.dir = dir;
    l.rows = rows;
    l.cols = cols;
    l.levels = levels;
    const std::size_t n = rows * cols;
    if (kind == TransformKind::fft) {
        l.in = dir == TransformDir::forward ? n : 2 * n;
        l.out = dir == TransformDir::forward ? 2 * n : n;
    } else {
        l.in = l.out = n;
    }
    return l;
}

Layer residual_layer(std::size_t size, std::size_t tap, double tap_coef, double self_coef) {
    Layer l;
    l.kind = LayerKind::residual_add;
    l.in = l.out = size;
    l.tap = tap;
    l.tap_coef = tap_coef;
    l.self_coef = self_coef;
    return l;
}

Net make_mlp(const std::vector<std::size_t>& sizes, Activation act, std::uint64_t seed, const std::string& prefix) {
    if (sizes.size() < 2) throw ParameterError("an MLP needs at least input and output sizes");
    Net net;
    net.spec.input_size = sizes.front();
    const CounterRng root(seed);
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
        const std::size_t in = sizes[i], out = sizes[i + 1];
        CounterRng rng = root.split(i);
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        Tensor w({out, in});
        for (auto& v : w.data()) v = rng.uniform(-limit, limit);
        net.spec.layers.push_back(
            affine_layer(net.params, prefix + "." + std::to_string(i), std::move(w), Tensor({out})));
        if (i + 2 < sizes.size()) net.spec.layers.push_back(pointwise_layer(out, act));
    }
    net.spec.validate(net.params);
    return net;
}

}  // namespace mbnn
