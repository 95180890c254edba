#pragma once

// Independent reference computations for tests. Nothing here calls into the
// library's numeric paths; only Tensor is used as a container.

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "mbnn/rng.hpp"
#include "mbnn/tape.hpp"
#include "mbnn/tensor.hpp"

namespace oracle {

using mbnn::Tensor;

inline Tensor random_tensor(mbnn::Shape shape, mbnn::CounterRng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

inline Tensor naive_matmul(const Tensor& a, const Tensor& b) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor c({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
            c[i * n + j] = s;
        }
    return c;
}

/// y[i,j] = sum_{a,b} k[a,b] x[(i - a + kh/2) mod H, (j - b + kw/2) mod W]
inline Tensor direct_conv(const Tensor& x, const Tensor& k) {
    const long H = static_cast<long>(x.rows()), W = static_cast<long>(x.cols());
    const long kh = static_cast<long>(k.rows()), kw = static_cast<long>(k.cols());
    Tensor y(x.shape());
    for (long i = 0; i < H; ++i)
        for (long j = 0; j < W; ++j) {
            double s = 0.0;
            for (long a = 0; a < kh; ++a)
                for (long b = 0; b < kw; ++b) {
                    const long si = ((i - a + kh / 2) % H + H) % H;
                    const long sj = ((j - b + kw / 2) % W + W) % W;
                    s += k[static_cast<std::size_t>(a * kw + b)] * x[static_cast<std::size_t>(si * W + sj)];
                }
            y[static_cast<std::size_t>(i * W + j)] = s;
        }
    return y;
}

/// Unitary O(n^2) DFT.
inline std::vector<std::complex<double>> naive_dft(const std::vector<std::complex<double>>& x, bool inverse) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    const double sign = inverse ? 1.0 : -1.0;
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> s = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            const double ang = sign * 2.0 * std::numbers::pi * static_cast<double>(k * t % n) / static_cast<double>(n);
            s += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[k] = s / std::sqrt(static_cast<double>(n));
    }
    return out;
}

/// Gaussian elimination with partial pivoting: solves A x = b (b may have several columns).
inline Tensor gauss_solve(Tensor a, Tensor b) {
    const std::size_t n = a.rows();
    const std::size_t m = b.size() / n;
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(a[r * n + c]) > std::abs(a[piv * n + c])) piv = r;
        if (a[piv * n + c] == 0.0) throw std::runtime_error("singular");
        for (std::size_t j = 0; j < n; ++j) std::swap(a[c * n + j], a[piv * n + j]);
        for (std::size_t j = 0; j < m; ++j) std::swap(b[c * m + j], b[piv * m + j]);
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = a[r * n + c] / a[c * n + c];
            for (std::size_t j = c; j < n; ++j) a[r * n + j] -= f * a[c * n + j];
            for (std::size_t j = 0; j < m; ++j) b[r * m + j] -= f * b[c * m + j];
        }
    }
    Tensor x = b;
    for (std::size_t r = n; r-- > 0;)
        for (std::size_t j = 0; j < m; ++j) {
            double s = b[r * m + j];
            for (std::size_t c = r + 1; c < n; ++c) s -= a[r * n + c] * x[c * m + j];
            x[r * m + j] = s / a[r * n + r];
        }
    return x;
}

inline Tensor naive_transpose(const Tensor& a) {
    Tensor t({a.cols(), a.rows()});
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t[j * a.rows() + i] = a[i * a.cols() + j];
    return t;
}

/// Central differences of a scalar function of several tensors.
inline std::vector<Tensor> central_difference(const std::function<double(const std::vector<Tensor>&)>& f,
                                              std::vector<Tensor> x, double step = 1e-6) {
    std::vector<Tensor> grads;
    for (std::size_t a = 0; a < x.size(); ++a) {
        Tensor g(x[a].shape());
        for (std::size_t i = 0; i < x[a].size(); ++i) {
            const double orig = x[a][i];
            x[a][i] = orig + step;
            const double fp = f(x);
            x[a][i] = orig - step;
            const double fm = f(x);
            x[a][i] = orig;
            g[i] = (fp - fm) / (2.0 * step);
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

/// Norm-wise relative error between stacked gradient lists.
inline double grad_rel_error(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k)
        for (std::size_t i = 0; i < a[k].size(); ++i) {
            num += (a[k][i] - b[k][i]) * (a[k][i] - b[k][i]);
            den += b[k][i] * b[k][i];
        }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

/// Build a scalar on a fresh tape from leaf values; returns the reverse-mode
/// gradients and the central-difference gradients.
struct GradCheck {
    std::vector<Tensor> reverse, numeric;
    double rel_error() const { return grad_rel_error(reverse, numeric); }
};

inline GradCheck check_gradients(const std::function<mbnn::Var(mbnn::Tape&, const std::vector<mbnn::Var>&)>& build,
                                 const std::vector<Tensor>& inputs, double step = 1e-6) {
    GradCheck out;
    {
        mbnn::Tape tape;
        std::vector<mbnn::Var> leaves;
        for (const auto& t : inputs) leaves.push_back(tape.variable(t));
        const mbnn::Var loss = build(tape, leaves);
        const auto g = tape.backward(loss);
        for (const auto& v : leaves) out.reverse.push_back(g[v]);
    }
    out.numeric = central_difference(
        [&](const std::vector<Tensor>& xs) {
            mbnn::Tape tape;
            std::vector<mbnn::Var> leaves;
            for (const auto& t : xs) leaves.push_back(tape.constant(t));
            return build(tape, leaves).value().item();
        },
        inputs, step);
    return out;
}

}  // namespace oracle
