#include "mbnn/linear_op.hpp"

#include <cmath>

#include "mbnn/conv.hpp"
#include "mbnn/errors.hpp"
#include "mbnn/linalg.hpp"
#include "mbnn/rng.hpp"

namespace mbnn {

LinearOp LinearOp::from_matrix(Tensor matrix) {
    if (matrix.rank() != 2) throw DimensionError("operator matrix must be rank 2, got " + shape_string(matrix.shape()));
    LinearOp op;
    op.kind_ = Kind::matrix;
    op.in_shape_ = {matrix.cols()};
    op.out_shape_ = {matrix.rows()};
    op.payload_ = std::move(matrix);
    return op;
}

LinearOp LinearOp::from_kernel(Tensor kernel, std::size_t rows, std::size_t cols) {
    if (kernel.rank() == 1) kernel = kernel.reshaped({1, kernel.size()});
    if (kernel.rank() != 2) throw DimensionError("convolution kernel must be rank 2");
    ConvGeometry{rows, cols, kernel.rows(), kernel.cols()}.validate();
    LinearOp op;
    op.kind_ = Kind::convolution;
    op.rows_ = rows;
    op.cols_ = cols;
    op.in_shape_ = {rows, cols};
    op.out_shape_ = {rows, cols};
    op.payload_ = std::move(kernel);
    return op;
}

LinearOp LinearOp::adjoint() const {
    LinearOp op = *this;
    op.adjoint_ = !adjoint_;
    if (kind_ == Kind::matrix) {
        op.in_shape_ = out_shape_;
        op.out_shape_ = in_shape_;
    }
    return op;
}

Tensor adjoint_kernel(const Tensor& kernel, std::size_t rows, std::size_t cols) {
    const std::size_t kh = kernel.rows(), kw = kernel.cols();
    if (kh % 2 == 1 && kw % 2 == 1) {
        Tensor f(kernel.shape());
        for (std::size_t a = 0; a < kh; ++a)
            for (std::size_t b = 0; b < kw; ++b) f(kh - 1 - a, kw - 1 - b) = kernel(a, b);
        return f;
    }
    // Even extents: flip on the torus into a full-size kernel.
    Tensor f({rows, cols});
    const std::size_t ch = kh / 2, cw = kw / 2, fh = rows / 2, fw = cols / 2;
    for (std::size_t a = 0; a < kh; ++a)
        for (std::size_t b = 0; b < kw; ++b) {
            // tap offset (a - ch, b - cw) becomes (ch - a, cw - b)
            const std::size_t i = (fh + ch + rows - a) % rows;
            const std::size_t j = (fw + cw + cols - b) % cols;
            f(i, j) += kernel(a, b);
        }
    return f;
}

Tensor LinearOp::effective_kernel() const {
    if (kind_ != Kind::convolution) throw ContractError("effective_kernel on a matrix operator");
    return adjoint_ ? adjoint_kernel(payload_, rows_, cols_) : payload_;
}

Tensor LinearOp::apply(const Tensor& x) const {
    if (x.size() != input_size()) {
        throw DimensionError("operator expects " + std::to_string(input_size()) + " inputs, got shape " +
                             shape_string(x.shape()));
    }
    if (kind_ == Kind::matrix) {
        const Tensor col = x.reshaped({x.size(), 1});
        Tensor y = adjoint_ ? matmul_tn(payload_, col) : matmul(payload_, col);
        return y.reshaped(out_shape_);
    }
    const Tensor img = x.reshaped({rows_, cols_});
    return adjoint_ ? correlate2d_circular(img, payload_) : conv2d_circular(img, payload_);
}

Tensor LinearOp::apply_adjoint(const Tensor& y) const { return adjoint().apply(y); }

Tensor LinearOp::apply_normal(const Tensor& x) const { return apply_adjoint(apply(x)).reshaped(x.shape()); }

Tensor LinearOp::apply_batch(const Tensor& x) const {
    if (x.rank() != 2 || x.rows() != input_size()) {
        throw DimensionError("apply_batch expects [" + std::to_string(input_size()) + " x batch], got " +
                             shape_string(x.shape()));
    }
    if (kind_ == Kind::matrix) return adjoint_ ? matmul_tn(payload_, x) : matmul(payload_, x);
    const std::size_t batch = x.cols();
    Tensor out({output_size(), batch});
    Tensor col({rows_, cols_});
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < col.size(); ++i) col[i] = x[i * batch + b];
        const Tensor y = apply(col);
        for (std::size_t i = 0; i < y.size(); ++i) out[i * batch + b] = y[i];
    }
    return out;
}

Var LinearOp::apply(Var x) const {
    Tape& tape = *x.tape;
    if (kind_ == Kind::matrix) {
        const Tensor m = adjoint_ ? transpose(payload_) : payload_;
        return ad::matmul(tape.constant(m), x);
    }
    return ad::conv2d(x, tape.constant(effective_kernel()), rows_, cols_);
}

Tensor LinearOp::to_matrix() const {
    if (kind_ == Kind::matrix) return adjoint_ ? transpose(payload_) : payload_;
    const std::size_t n = input_size();
    Tensor m({output_size(), n});
    Tensor e(in_shape_);
    for (std::size_t j = 0; j < n; ++j) {
        e[j] = 1.0;
        const Tensor col = apply(e);
        for (std::size_t i = 0; i < col.size(); ++i) m(i, j) = col[i];
        e[j] = 0.0;
    }
    return m;
}

double power_iteration(const LinearOp& op, std::size_t iters, double tol) {
    CounterRng rng(0x9d2c5680u);
    Tensor v(op.input_shape());
    for (auto& x : v.data()) x = rng.uniform(-1.0, 1.0);
    double nv = norm2(v);
    v = (1.0 / nv) * v;
    double lambda = 0.0;
    for (std::size_t k = 0; k < iters; ++k) {
        Tensor w = op.apply_normal(v);
        const double rayleigh = dot(v, w);
        const double nw = norm2(w);
        if (nw == 0.0) return 0.0;
        v = (1.0 / nw) * w;
        if (k > 0 && std::abs(rayleigh - lambda) <= tol * std::abs(rayleigh)) {
            lambda = rayleigh;
            break;
        }
        lambda = rayleigh;
    }
    return lambda;
}

}  // namespace mbnn
