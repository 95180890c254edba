#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "mbnn/tensor.hpp"

namespace mbnn {

class Tape;

using NodeId = std::uint32_t;

/// Handle to a value recorded on a Tape.
struct Var {
    Tape* tape = nullptr;
    NodeId id = 0;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    bool valid() const noexcept { return tape != nullptr; }
};

enum class OpKind : std::uint8_t {
    leaf,
    add,
    sub,
    mul,
    scale_shift,
    add_col_bias,
    matmul,
    tanh,
    sin,
    cos,
    exp,
    square,
    sum,
    sum_squares,
    soft_threshold,
    st_deriv_mul,
    mul_scalar,
    add_scalar,
    conv2d,
    fft_fwd,
    fft_adj,
    haar_fwd,
    haar_inv,
    diag_mask,
    concat_rows,
    slice_rows,
};

const char* op_name(OpKind op) noexcept;

/// Gradients produced by Tape::backward, indexed by node.
class Gradients {
public:
    Gradients() = default;
    explicit Gradients(std::vector<Tensor> g) : grads_(std::move(g)) {}

    /// Gradient of the loss with respect to `v`; zeros if the loss does not depend on it.
    Tensor operator[](Var v) const;

private:
    friend class Tape;
    std::vector<Tensor> grads_;
};

/// Append-only record of primitive tensor operations.
///
/// Inputs of every node are earlier nodes, so the node list is a topological
/// order and backward is a single reverse sweep. Values are stored at record
/// time; replay() recomputes them from the leaves and reports any mismatch.
class Tape {
public:
    struct Node {
        OpKind op = OpKind::leaf;
        std::array<NodeId, 3> in{};
        std::uint8_t arity = 0;
        bool needs_grad = false;
        std::array<std::size_t, 4> aux{};  // geometry: rows, cols, levels, ...
        std::array<double, 2> coef{};      // scale_shift alpha, beta
        Tensor value;
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Leaf that participates in differentiation (a parameter or an input).
    Var variable(Tensor value);
    /// Leaf excluded from differentiation.
    Var constant(Tensor value);

    Var record(OpKind op, std::initializer_list<Var> inputs, std::array<std::size_t, 4> aux = {},
               std::array<double, 2> coef = {});

    const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
    const Node& node(NodeId id) const { return nodes_.at(id); }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Exact reverse-mode gradients of a one-element node. Throws ContractError otherwise.
    Gradients backward(Var loss) const;

    /// Recompute every non-leaf value from its inputs; true when all match bit for bit.
    bool replay_matches() const;

    void mark_output(Var v) { outputs_.push_back(v.id); }
    const std::vector<NodeId>& outputs() const noexcept { return outputs_; }

private:
    Tensor compute(const Node& n) const;

    std::vector<Node> nodes_;
    std::vector<NodeId> outputs_;
};

// Differentiable primitives. All operate on rank-2 [features x batch] tensors
// unless stated; "scalar" means a one-element tensor.
namespace ad {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// alpha * a + beta
Var scale_shift(Var a, double alpha, double beta = 0.0);
Var neg(Var a);
/// a [m x n] plus a bias column [m] / [m x 1] broadcast over columns.
Var add_col_bias(Var a, Var bias);
Var matmul(Var a, Var b);
Var tanh(Var a);
Var sin(Var a);
Var cos(Var a);
Var exp(Var a);
Var square(Var a);
Var sum(Var a);
Var sum_squares(Var a);
/// sign(x) max(|x| - theta, 0) with a scalar threshold; derivative 0 in the dead zone and at the kink.
Var soft_threshold(Var x, Var theta);
Var soft_threshold(Var x, double theta);
/// 1{|z| > theta} * dz: tangent of soft_threshold.
Var st_deriv_mul(Var z, Var theta, Var dz);
/// s * a with scalar s.
Var mul_scalar(Var a, Var s);
/// a + s with scalar s.
Var add_scalar(Var a, Var s);
/// Per-column circular convolution; columns hold row-major images of rows x cols.
Var conv2d(Var x, Var kernel, std::size_t rows, std::size_t cols);
/// Per-column unitary 2-D FFT of real images -> [2n x batch] (real rows, then imaginary rows).
Var fft_fwd(Var x, std::size_t rows, std::size_t cols);
/// Per-column real part of the unitary inverse FFT of [2n x batch] coefficients.
Var fft_adj(Var c, std::size_t rows, std::size_t cols);
Var haar_fwd(Var x, std::size_t rows, std::size_t cols, std::size_t levels);
Var haar_inv(Var c, std::size_t rows, std::size_t cols, std::size_t levels);
/// Row-wise gain: row r is multiplied by mask[r mod n], n = mask size.
Var diag_mask(Var x, Var mask);
Var concat_rows(Var a, Var b);
Var slice_rows(Var a, std::size_t start, std::size_t count);

}  // namespace ad

inline Var operator+(Var a, Var b) { return ad::add(a, b); }
inline Var operator-(Var a, Var b) { return ad::sub(a, b); }
inline Var operator*(Var a, Var b) { return ad::mul(a, b); }

}  // namespace mbnn
