#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mbnn/params.hpp"
#include "mbnn/tape.hpp"
#include "mbnn/tensor.hpp"

namespace mbnn {

enum class LayerKind { affine, conv, pointwise, diag_mask, transform, residual_add };
enum class Activation { identity, tanh, sin, soft_threshold };
enum class TransformKind { fft, haar };
enum class TransformDir { forward, adjoint };

const char* to_string(LayerKind k) noexcept;
const char* to_string(Activation a) noexcept;

/// One stage of a NetSpec. Values flow as [features x batch]; value 0 is the
/// net input and value i + 1 is the output of layer i.
struct Layer {
    LayerKind kind = LayerKind::affine;
    std::size_t in = 0, out = 0;  // feature counts

    // affine: weight [out x in], optional bias [out]
    // conv: weight is the kernel [kh x kw] acting on rows x cols images
    // diag_mask: weight is the gain vector, row r scaled by gain[r mod size]
    std::string weight, bias;

    // conv and transform image geometry
    std::size_t rows = 0, cols = 0;

    // pointwise
    Activation act = Activation::identity;
    std::string threshold;        // soft_threshold parameter (scalar); empty uses threshold_value
    bool log_threshold = false;   // parameter holds log(theta)
    double threshold_value = 0.0;

    // transform
    TransformKind transform = TransformKind::fft;
    TransformDir dir = TransformDir::forward;
    std::size_t levels = 1;

    // residual_add: out = tap_coef * value[tap] + self_coef * previous
    std::size_t tap = 0;
    double tap_coef = 1.0, self_coef = 1.0;
};

/// Ordered layer graph with parameter bindings by name.
struct NetSpec {
    std::size_t input_size = 0;
    std::vector<Layer> layers;
    /// Value index also exposed as a secondary output (e.g. a residual estimate).
    std::optional<std::size_t> secondary;

    std::size_t output_size() const;
    /// Feature count of value i (0 = input).
    std::size_t value_size(std::size_t i) const;

    /// Structural checks: adjacent sizes, transform geometry, residual taps.
    /// Throws StructureError naming the layer.
    void validate() const;
    /// Structure plus parameter bindings: every referenced name exists with
    /// the right shape, and every trainable entry is bound exactly once.
    void validate(const ParamSet& params) const;
};

/// A spec with its parameters.
struct Net {
    NetSpec spec;
    ParamSet params;
};

struct NetOutputs {
    Var primary;
    std::optional<Var> secondary;
};

/// Taped forward pass; x is [input_size x batch].
NetOutputs forward_all(const NetSpec& spec, const BoundParams& params, Var x);
Var net_forward(const NetSpec& spec, const BoundParams& params, Var x);

/// Forward value and directional derivative d(net)/dx . dx, both taped so
/// parameter gradients flow through the derivative.
struct Dual {
    Var value, tangent;
};
Dual forward_tangent(const NetSpec& spec, const BoundParams& params, Var x, Var dx);

/// Untaped evaluation. x may be [input_size] (result [output_size]) or
/// [input_size x batch].
Tensor evaluate(const NetSpec& spec, const ParamSet& params, const Tensor& x);
Tensor evaluate_secondary(const NetSpec& spec, const ParamSet& params, const Tensor& x);

/// d(output)/d(x[coord]) per column by reverse mode. The net must have one
/// output; x is [input_size] or [input_size x batch]; result is [batch].
Tensor input_grad(const NetSpec& spec, const ParamSet& params, const Tensor& x, std::size_t coord);

// ---------------------------------------------------------------------------
// Layer helpers used by the builders. Parameters are added to `params` under
// the given names.

Layer affine_layer(ParamSet& params, const std::string& name, Tensor weight, std::optional<Tensor> bias = {});
Layer conv_layer(ParamSet& params, const std::string& name, Tensor kernel, std::size_t rows, std::size_t cols);
Layer pointwise_layer(std::size_t size, Activation act);
Layer soft_threshold_layer(ParamSet& params, const std::string& name, std::size_t size, double theta,
                           bool log_space);
Layer mask_layer(ParamSet& params, const std::string& name, Tensor gains, std::size_t size);
Layer transform_layer(TransformKind kind, TransformDir dir, std::size_t rows, std::size_t cols, std::size_t levels = 1);
Layer residual_layer(std::size_t size, std::size_t tap, double tap_coef, double self_coef);

/// Fully connected net sizes[0] -> ... -> sizes.back() with `act` between
/// affine layers (none after the last). Glorot-uniform weights, zero biases.
Net make_mlp(const std::vector<std::size_t>& sizes, Activation act, std::uint64_t seed,
             const std::string& prefix = "mlp");

}  // namespace mbnn
