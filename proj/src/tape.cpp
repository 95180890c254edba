#include "mbnn/tape.hpp"

#include <cmath>
#include <cstring>

#include "mbnn/conv.hpp"
#include "mbnn/errors.hpp"
#include "mbnn/linalg.hpp"
#include "mbnn/transforms.hpp"

namespace mbnn {

const Tensor& Var::value() const {
    if (!tape) throw ContractError("value() on an unbound Var");
    return tape->value(*this);
}

const char* op_name(OpKind op) noexcept {
    switch (op) {
        case OpKind::leaf: return "leaf";
        case OpKind::add: return "add";
        case OpKind::sub: return "sub";
        case OpKind::mul: return "mul";
        case OpKind::scale_shift: return "scale_shift";
        case OpKind::add_col_bias: return "add_col_bias";
        case OpKind::matmul: return "matmul";
        case OpKind::tanh: return "tanh";
        case OpKind::sin: return "sin";
        case OpKind::cos: return "cos";
        case OpKind::exp: return "exp";
        case OpKind::square: return "square";
        case OpKind::sum: return "sum";
        case OpKind::sum_squares: return "sum_squares";
        case OpKind::soft_threshold: return "soft_threshold";
        case OpKind::st_deriv_mul: return "st_deriv_mul";
        case OpKind::mul_scalar: return "mul_scalar";
        case OpKind::add_scalar: return "add_scalar";
        case OpKind::conv2d: return "conv2d";
        case OpKind::fft_fwd: return "fft_fwd";
        case OpKind::fft_adj: return "fft_adj";
        case OpKind::haar_fwd: return "haar_fwd";
        case OpKind::haar_inv: return "haar_inv";
        case OpKind::diag_mask: return "diag_mask";
        case OpKind::concat_rows: return "concat_rows";
        case OpKind::slice_rows: return "slice_rows";
    }
    return "?";
}

Tensor Gradients::operator[](Var v) const {
    if (v.id < grads_.size() && !grads_[v.id].empty()) return grads_[v.id];
    return Tensor::zeros(v.value().shape());
}

namespace {

void require(bool cond, OpKind op, const std::string& what) {
    if (!cond) throw DimensionError(std::string(op_name(op)) + ": " + what);
}

/// Rows/cols of a rank-1 or rank-2 value.
std::pair<std::size_t, std::size_t> dims(const Tensor& t) {
    if (t.rank() == 1) return {t.extent(0), 1};
    if (t.rank() == 2) return {t.extent(0), t.extent(1)};
    return {t.size(), 1};
}

Tensor as_2d(const Tensor& t) {
    const auto [r, c] = dims(t);
    return t.rank() == 2 ? t : t.reshaped({r, c});
}

template <class F>
Tensor map_unary(const Tensor& a, F f) {
    Tensor out(a.shape());
    const auto src = a.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
    return out;
}

// Apply a per-column transform col_in[n_in] -> col_out[n_out] to every column.
template <class F>
Tensor map_columns(const Tensor& x, std::size_t n_in, std::size_t n_out, F f) {
    const auto [rows, batch] = dims(x);
    if (rows != n_in) {
        throw DimensionError("column transform expects " + std::to_string(n_in) + " rows, got " + std::to_string(rows));
    }
    Tensor out({n_out, batch});
    std::vector<double> cin(n_in), cout(n_out);
    const auto src = x.data();
    auto dst = out.data();
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < n_in; ++i) cin[i] = src[i * batch + b];
        f(std::span<const double>(cin), std::span<double>(cout));
        for (std::size_t i = 0; i < n_out; ++i) dst[i * batch + b] = cout[i];
    }
    return out;
}

void fft_real_to_pair(std::span<const double> in, std::span<double> out, std::size_t r, std::size_t c) {
    const std::size_t n = r * c;
    auto buf = to_complex(in);
    fft2_inplace(buf, r, c, FftDirection::forward);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = buf[i].real();
        out[n + i] = buf[i].imag();
    }
}

void fft_pair_to_real(std::span<const double> in, std::span<double> out, std::size_t r, std::size_t c) {
    const std::size_t n = r * c;
    std::vector<Complex> buf(n);
    for (std::size_t i = 0; i < n; ++i) buf[i] = Complex(in[i], in[n + i]);
    fft2_inplace(buf, r, c, FftDirection::inverse);
    for (std::size_t i = 0; i < n; ++i) out[i] = buf[i].real();
}

void accumulate(Tensor& slot, const Tensor& g) {
    if (slot.empty()) {
        slot = g;
        return;
    }
    auto d = slot.data();
    const auto s = g.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

double sum_of(const Tensor& t) {
    double s = 0.0;
    for (double v : t.data()) s += v;
    return s;
}

}  // namespace

Var Tape::variable(Tensor value) {
    Node n;
    n.op = OpKind::leaf;
    n.needs_grad = true;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<NodeId>(nodes_.size() - 1)};
}

Var Tape::constant(Tensor value) {
    Node n;
    n.op = OpKind::leaf;
    n.needs_grad = false;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<NodeId>(nodes_.size() - 1)};
}

Var Tape::record(OpKind op, std::initializer_list<Var> inputs, std::array<std::size_t, 4> aux,
                 std::array<double, 2> coef) {
    Node n;
    n.op = op;
    n.aux = aux;
    n.coef = coef;
    n.arity = static_cast<std::uint8_t>(inputs.size());
    std::size_t k = 0;
    for (const Var& v : inputs) {
        if (v.tape != this) throw ContractError(std::string(op_name(op)) + ": input recorded on another tape");
        n.in[k++] = v.id;
        n.needs_grad = n.needs_grad || nodes_[v.id].needs_grad;
    }
    n.value = compute(n);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<NodeId>(nodes_.size() - 1)};
}

Tensor Tape::compute(const Node& n) const {
    const auto in = [&](std::size_t k) -> const Tensor& { return nodes_[n.in[k]].value; };
    switch (n.op) {
        case OpKind::leaf:
            return n.value;
        case OpKind::add:
            require(in(0).same_shape(in(1)), n.op, "shape mismatch");
            return in(0) + in(1);
        case OpKind::sub:
            require(in(0).same_shape(in(1)), n.op, "shape mismatch");
            return in(0) - in(1);
        case OpKind::mul:
            require(in(0).same_shape(in(1)), n.op, "shape mismatch");
            return hadamard(in(0), in(1));
        case OpKind::scale_shift: {
            const double a = n.coef[0], b = n.coef[1];
            return map_unary(in(0), [a, b](double v) { return a * v + b; });
        }
        case OpKind::add_col_bias: {
            const auto [r, c] = dims(in(0));
            require(in(1).size() == r, n.op, "bias length must equal row count");
            Tensor out = in(0);
            auto d = out.data();
            const auto bias = in(1).data();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) d[i * c + j] += bias[i];
            return out;
        }
        case OpKind::matmul:
            return matmul(in(0), in(1));
        case OpKind::tanh:
            return map_unary(in(0), [](double v) { return std::tanh(v); });
        case OpKind::sin:
            return map_unary(in(0), [](double v) { return std::sin(v); });
        case OpKind::cos:
            return map_unary(in(0), [](double v) { return std::cos(v); });
        case OpKind::exp:
            return map_unary(in(0), [](double v) { return std::exp(v); });
        case OpKind::square:
            return map_unary(in(0), [](double v) { return v * v; });
        case OpKind::sum:
            return Tensor::scalar(sum_of(in(0)));
        case OpKind::sum_squares:
            return Tensor::scalar(squared_norm(in(0)));
        case OpKind::soft_threshold: {
            require(in(1).size() == 1, n.op, "threshold must be a scalar");
            const double th = in(1)[0];
            if (!(th >= 0.0)) throw ParameterError("soft_threshold: threshold must be >= 0, got " + std::to_string(th));
            return map_unary(in(0), [th](double v) {
                const double m = std::abs(v) - th;
                return m > 0.0 ? std::copysign(m, v) : 0.0;
            });
        }
        case OpKind::st_deriv_mul: {
            require(in(1).size() == 1, n.op, "threshold must be a scalar");
            require(in(0).same_shape(in(2)), n.op, "shape mismatch");
            const double th = in(1)[0];
            Tensor out(in(0).shape());
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::abs(in(0)[i]) > th ? in(2)[i] : 0.0;
            return out;
        }
        case OpKind::mul_scalar: {
            require(in(1).size() == 1, n.op, "multiplier must be a scalar");
            return in(1)[0] * in(0);
        }
        case OpKind::add_scalar: {
            require(in(1).size() == 1, n.op, "offset must be a scalar");
            const double s = in(1)[0];
            return map_unary(in(0), [s](double v) { return v + s; });
        }
        case OpKind::conv2d: {
            const std::size_t r = n.aux[0], c = n.aux[1];
            const Tensor& k = in(1);
            const auto [kh, kw] = dims(k);
            const std::size_t krows = k.rank() == 2 ? kh : 1;
            const std::size_t kcols = k.rank() == 2 ? kw : kh;
            ConvGeometry g{r, c, krows, kcols};
            g.validate();
            return map_columns(in(0), r * c, r * c, [&](std::span<const double> ci, std::span<double> co) {
                conv2d_circular_raw(ci, k.data(), co, g);
            });
        }
        case OpKind::fft_fwd: {
            const std::size_t r = n.aux[0], c = n.aux[1];
            return map_columns(in(0), r * c, 2 * r * c, [&](std::span<const double> ci, std::span<double> co) {
                fft_real_to_pair(ci, co, r, c);
            });
        }
        case OpKind::fft_adj: {
            const std::size_t r = n.aux[0], c = n.aux[1];
            return map_columns(in(0), 2 * r * c, r * c, [&](std::span<const double> ci, std::span<double> co) {
                fft_pair_to_real(ci, co, r, c);
            });
        }
        case OpKind::haar_fwd: {
            const std::size_t r = n.aux[0], c = n.aux[1], l = n.aux[2];
            return map_columns(in(0), r * c, r * c, [&](std::span<const double> ci, std::span<double> co) {
                haar_forward(ci, co, r, c, l);
            });
        }
        case OpKind::haar_inv: {
            const std::size_t r = n.aux[0], c = n.aux[1], l = n.aux[2];
            return map_columns(in(0), r * c, r * c, [&](std::span<const double> ci, std::span<double> co) {
                haar_inverse(ci, co, r, c, l);
            });
        }
        case OpKind::diag_mask: {
            const auto [r, c] = dims(in(0));
            const std::size_t m = in(1).size();
            require(m > 0 && r % m == 0, n.op, "row count must be a multiple of the mask length");
            Tensor out = as_2d(in(0));
            auto d = out.data();
            const auto mask = in(1).data();
            for (std::size_t i = 0; i < r; ++i) {
                const double g = mask[i % m];
                for (std::size_t j = 0; j < c; ++j) d[i * c + j] *= g;
            }
            return out;
        }
        case OpKind::concat_rows: {
            const auto [ra, ca] = dims(in(0));
            const auto [rb, cb] = dims(in(1));
            require(ca == cb, n.op, "column counts differ");
            Tensor out({ra + rb, ca});
            std::copy(in(0).data().begin(), in(0).data().end(), out.data().begin());
            std::copy(in(1).data().begin(), in(1).data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(ra * ca));
            return out;
        }
        case OpKind::slice_rows: {
            const auto [r, c] = dims(in(0));
            const std::size_t start = n.aux[0], count = n.aux[1];
            if (count == 0 || start + count > r) throw IndexError("slice_rows: rows out of range");
            Tensor out({count, c});
            const auto src = in(0).data().subspan(start * c, count * c);
            std::copy(src.begin(), src.end(), out.data().begin());
            return out;
        }
    }
    throw ContractError("unknown op");
}

Gradients Tape::backward(Var loss) const {
    if (loss.tape != this) throw ContractError("backward: loss belongs to another tape");
    const Tensor& lv = nodes_.at(loss.id).value;
    if (lv.size() != 1) throw ContractError("backward: loss must be a scalar, got shape " + shape_string(lv.shape()));

    std::vector<Tensor> g(nodes_.size());
    g[loss.id] = Tensor(lv.shape(), 1.0);

    for (std::size_t idx = loss.id + 1; idx-- > 0;) {
        const Node& n = nodes_[idx];
        if (n.op == OpKind::leaf || !n.needs_grad || g[idx].empty()) continue;
        const Tensor& up = g[idx];
        const auto in = [&](std::size_t k) -> const Tensor& { return nodes_[n.in[k]].value; };
        const auto wants = [&](std::size_t k) { return nodes_[n.in[k]].needs_grad; };
        const auto push = [&](std::size_t k, const Tensor& t) {
            if (wants(k)) accumulate(g[n.in[k]], t.shape() == in(k).shape() ? t : t.reshaped(in(k).shape()));
        };

        switch (n.op) {
            case OpKind::leaf:
                break;
            case OpKind::add:
                push(0, up);
                push(1, up);
                break;
            case OpKind::sub:
                push(0, up);
                if (wants(1)) push(1, -1.0 * up);
                break;
            case OpKind::mul:
                if (wants(0)) push(0, hadamard(up, in(1)));
                if (wants(1)) push(1, hadamard(up, in(0)));
                break;
            case OpKind::scale_shift:
                push(0, n.coef[0] * up);
                break;
            case OpKind::add_col_bias: {
                push(0, up);
                if (wants(1)) {
                    const auto [r, c] = dims(up);
                    Tensor gb(in(1).shape());
                    for (std::size_t i = 0; i < r; ++i) {
                        double s = 0.0;
                        for (std::size_t j = 0; j < c; ++j) s += up[i * c + j];
                        gb[i] = s;
                    }
                    push(1, gb);
                }
                break;
            }
            case OpKind::matmul: {
                if (wants(0)) push(0, matmul_nt(up, in(1)));
                if (wants(1)) push(1, matmul_tn(in(0), up));
                break;
            }
            case OpKind::tanh: {
                Tensor d(up.shape());
                for (std::size_t i = 0; i < d.size(); ++i) d[i] = up[i] * (1.0 - n.value[i] * n.value[i]);
                push(0, d);
                break;
            }
            case OpKind::sin: {
                Tensor d(up.shape());
                for (std::size_t i = 0; i < d.size(); ++i) d[i] = up[i] * std::cos(in(0)[i]);
                push(0, d);
                break;
            }
            case OpKind::cos: {
                Tensor d(up.shape());
                for (std::size_t i = 0; i < d.size(); ++i) d[i] = -up[i] * std::sin(in(0)[i]);
                push(0, d);
                break;
            }
            case OpKind::exp:
                push(0, hadamard(up, n.value));
                break;
            case OpKind::square: {
                Tensor d(up.shape());
                for (std::size_t i = 0; i < d.size(); ++i) d[i] = 2.0 * in(0)[i] * up[i];
                push(0, d);
                break;
            }
            case OpKind::sum:
                push(0, Tensor(in(0).shape(), up[0]));
                break;
            case OpKind::sum_squares:
                push(0, (2.0 * up[0]) * in(0));
                break;
            case OpKind::soft_threshold: {
                const double th = in(1)[0];
                Tensor dx(up.shape());
                double dth = 0.0;
                for (std::size_t i = 0; i < dx.size(); ++i) {
                    const double x = in(0)[i];
                    if (std::abs(x) > th) {
                        dx[i] = up[i];
                        dth -= x > 0.0 ? up[i] : -up[i];
                    }
                }
                push(0, dx);
                if (wants(1)) push(1, Tensor(in(1).shape(), dth));
                break;
            }
            case OpKind::st_deriv_mul: {
                // piecewise constant in z and theta
                const double th = in(1)[0];
                Tensor d(up.shape());
                for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::abs(in(0)[i]) > th ? up[i] : 0.0;
                push(2, d);
                break;
            }
            case OpKind::mul_scalar:
                if (wants(0)) push(0, in(1)[0] * up);
                if (wants(1)) push(1, Tensor(in(1).shape(), dot(in(0), up)));
                break;
            case OpKind::add_scalar:
                push(0, up);
                if (wants(1)) push(1, Tensor(in(1).shape(), sum_of(up)));
                break;
            case OpKind::conv2d: {
                const std::size_t r = n.aux[0], c = n.aux[1];
                const Tensor& k = in(1);
                const auto [kh, kw] = dims(k);
                ConvGeometry geo{r, c, k.rank() == 2 ? kh : 1, k.rank() == 2 ? kw : kh};
                if (wants(0)) {
                    push(0, map_columns(up, r * c, r * c, [&](std::span<const double> ci, std::span<double> co) {
                        correlate2d_circular_raw(ci, k.data(), co, geo);
                    }));
                }
                if (wants(1)) {
                    const auto [rows, batch] = dims(in(0));
                    Tensor gk(k.shape());
                    std::vector<double> xi(rows), ui(rows);
                    for (std::size_t b = 0; b < batch; ++b) {
                        for (std::size_t i = 0; i < rows; ++i) {
                            xi[i] = in(0)[i * batch + b];
                            ui[i] = up[i * batch + b];
                        }
                        conv2d_kernel_grad_raw(xi, ui, gk.data(), geo);
                    }
                    push(1, gk);
                }
                break;
            }
            case OpKind::fft_fwd: {
                const std::size_t r = n.aux[0], c = n.aux[1];
                push(0, map_columns(up, 2 * r * c, r * c, [&](std::span<const double> ci, std::span<double> co) {
                    fft_pair_to_real(ci, co, r, c);
                }));
                break;
            }
            case OpKind::fft_adj: {
                const std::size_t r = n.aux[0], c = n.aux[1];
                push(0, map_columns(up, r * c, 2 * r * c, [&](std::span<const double> ci, std::span<double> co) {
                    fft_real_to_pair(ci, co, r, c);
                }));
                break;
            }
            case OpKind::haar_fwd: {
                const std::size_t r = n.aux[0], c = n.aux[1], l = n.aux[2];
                push(0, map_columns(up, r * c, r * c, [&](std::span<const double> ci, std::span<double> co) {
                    haar_inverse(ci, co, r, c, l);
                }));
                break;
            }
            case OpKind::haar_inv: {
                const std::size_t r = n.aux[0], c = n.aux[1], l = n.aux[2];
                push(0, map_columns(up, r * c, r * c, [&](std::span<const double> ci, std::span<double> co) {
                    haar_forward(ci, co, r, c, l);
                }));
                break;
            }
            case OpKind::diag_mask: {
                const auto [r, c] = dims(in(0));
                const std::size_t m = in(1).size();
                const auto mask = in(1).data();
                if (wants(0)) {
                    Tensor d(up.shape());
                    for (std::size_t i = 0; i < r; ++i)
                        for (std::size_t j = 0; j < c; ++j) d[i * c + j] = up[i * c + j] * mask[i % m];
                    push(0, d);
                }
                if (wants(1)) {
                    Tensor gm(in(1).shape());
                    for (std::size_t i = 0; i < r; ++i) {
                        double s = 0.0;
                        for (std::size_t j = 0; j < c; ++j) s += up[i * c + j] * in(0)[i * c + j];
                        gm[i % m] += s;
                    }
                    push(1, gm);
                }
                break;
            }
            case OpKind::concat_rows: {
                const std::size_t na = in(0).size();
                if (wants(0)) push(0, Tensor(in(0).shape(), std::vector<double>(up.data().begin(), up.data().begin() + static_cast<std::ptrdiff_t>(na))));
                if (wants(1)) push(1, Tensor(in(1).shape(), std::vector<double>(up.data().begin() + static_cast<std::ptrdiff_t>(na), up.data().end())));
                break;
            }
            case OpKind::slice_rows: {
                const auto [r, c] = dims(in(0));
                Tensor d(in(0).shape());
                std::copy(up.data().begin(), up.data().end(), d.data().begin() + static_cast<std::ptrdiff_t>(n.aux[0] * c));
                (void)r;
                push(0, d);
                break;
            }
        }
    }
    return Gradients(std::move(g));
}

bool Tape::replay_matches() const {
    for (const Node& n : nodes_) {
        if (n.op == OpKind::leaf) continue;
        const Tensor again = compute(n);
        if (again.shape() != n.value.shape()) return false;
        if (std::memcmp(again.data().data(), n.value.data().data(), again.size() * sizeof(double)) != 0) return false;
    }
    return true;
}

namespace ad {

Var add(Var a, Var b) { return a.tape->record(OpKind::add, {a, b}); }
Var sub(Var a, Var b) { return a.tape->record(OpKind::sub, {a, b}); }
Var mul(Var a, Var b) { return a.tape->record(OpKind::mul, {a, b}); }
Var scale_shift(Var a, double alpha, double beta) { return a.tape->record(OpKind::scale_shift, {a}, {}, {alpha, beta}); }
Var neg(Var a) { return scale_shift(a, -1.0, 0.0); }
Var add_col_bias(Var a, Var bias) { return a.tape->record(OpKind::add_col_bias, {a, bias}); }
Var matmul(Var a, Var b) { return a.tape->record(OpKind::matmul, {a, b}); }
Var tanh(Var a) { return a.tape->record(OpKind::tanh, {a}); }
Var sin(Var a) { return a.tape->record(OpKind::sin, {a}); }
Var cos(Var a) { return a.tape->record(OpKind::cos, {a}); }
Var exp(Var a) { return a.tape->record(OpKind::exp, {a}); }
Var square(Var a) { return a.tape->record(OpKind::square, {a}); }
Var sum(Var a) { return a.tape->record(OpKind::sum, {a}); }
Var sum_squares(Var a) { return a.tape->record(OpKind::sum_squares, {a}); }
Var soft_threshold(Var x, Var theta) { return x.tape->record(OpKind::soft_threshold, {x, theta}); }
Var soft_threshold(Var x, double theta) { return soft_threshold(x, x.tape->constant(Tensor::scalar(theta))); }
Var st_deriv_mul(Var z, Var theta, Var dz) { return z.tape->record(OpKind::st_deriv_mul, {z, theta, dz}); }
Var mul_scalar(Var a, Var s) { return a.tape->record(OpKind::mul_scalar, {a, s}); }
Var add_scalar(Var a, Var s) { return a.tape->record(OpKind::add_scalar, {a, s}); }
Var conv2d(Var x, Var kernel, std::size_t rows, std::size_t cols) {
    return x.tape->record(OpKind::conv2d, {x, kernel}, {rows, cols, 0, 0});
}
Var fft_fwd(Var x, std::size_t rows, std::size_t cols) { return x.tape->record(OpKind::fft_fwd, {x}, {rows, cols, 0, 0}); }
Var fft_adj(Var c, std::size_t rows, std::size_t cols) { return c.tape->record(OpKind::fft_adj, {c}, {rows, cols, 0, 0}); }
Var haar_fwd(Var x, std::size_t rows, std::size_t cols, std::size_t levels) {
    return x.tape->record(OpKind::haar_fwd, {x}, {rows, cols, levels, 0});
}
Var haar_inv(Var c, std::size_t rows, std::size_t cols, std::size_t levels) {
    return c.tape->record(OpKind::haar_inv, {c}, {rows, cols, levels, 0});
}
Var diag_mask(Var x, Var mask) { return x.tape->record(OpKind::diag_mask, {x, mask}); }
Var concat_rows(Var a, Var b) { return a.tape->record(OpKind::concat_rows, {a, b}); }
Var slice_rows(Var a, std::size_t start, std::size_t count) {
    return a.tape->record(OpKind::slice_rows, {a}, {start, count, 0, 0});
}

}  // namespace ad

}  // namespace mbnn
