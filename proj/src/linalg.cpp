#include "mbnn/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "mbnn/errors.hpp"

namespace mbnn {

namespace {

struct MatDims {
    std::size_t rows, cols;
};

MatDims as_matrix(const Tensor& t, const char* what) {
    if (t.rank() == 1) return {t.extent(0), 1};
    if (t.rank() == 2) return {t.extent(0), t.extent(1)};
    throw DimensionError(std::string(what) + ": expected a matrix, got " + shape_string(t.shape()));
}

}  // namespace

void gemm_nn(const double* a, const double* b, double* out, std::size_t m, std::size_t k, std::size_t n) {
    std::fill(out, out + m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = out + i * n;
        const double* arow = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
}

// out[m x n] = a^T b with a [k x m], b [k x n].
void gemm_tn(const double* a, const double* b, double* out, std::size_t m, std::size_t k, std::size_t n) {
    std::fill(out, out + m * n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = a + p * m;
        const double* brow = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* orow = out + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
}

// out[m x n] = a b^T with a [m x k], b [n x k].
void gemm_nt(const double* a, const double* b, double* out, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
            out[i * n + j] = s;
        }
    }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    const auto da = as_matrix(a, "matmul");
    const auto db = as_matrix(b, "matmul");
    if (da.cols != db.rows) {
        throw DimensionError("matmul: inner extents differ (" + shape_string(a.shape()) + " * " +
                             shape_string(b.shape()) + ")");
    }
    Tensor out({da.rows, db.cols});
    gemm_nn(a.data().data(), b.data().data(), out.data().data(), da.rows, da.cols, db.cols);
    return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    const auto da = as_matrix(a, "matmul_tn");
    const auto db = as_matrix(b, "matmul_tn");
    if (da.rows != db.rows) throw DimensionError("matmul_tn: row counts differ");
    Tensor out({da.cols, db.cols});
    gemm_tn(a.data().data(), b.data().data(), out.data().data(), da.cols, da.rows, db.cols);
    return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    const auto da = as_matrix(a, "matmul_nt");
    const auto db = as_matrix(b, "matmul_nt");
    if (da.cols != db.cols) throw DimensionError("matmul_nt: column counts differ");
    Tensor out({da.rows, db.rows});
    gemm_nt(a.data().data(), b.data().data(), out.data().data(), da.rows, da.cols, db.rows);
    return out;
}

Cholesky::Cholesky(const Tensor& spd) : n_(0) {
    const auto d = as_matrix(spd, "cholesky");
    if (d.rows != d.cols) throw DimensionError("cholesky: matrix is not square");
    n_ = d.rows;
    lower_ = Tensor({n_, n_});
    double scale = 0.0;
    for (std::size_t i = 0; i < n_; ++i) scale = std::max(scale, std::abs(spd(i, i)));
    const double floor = scale * 1e-13;
    for (std::size_t j = 0; j < n_; ++j) {
        double diag = spd(j, j);
        for (std::size_t p = 0; p < j; ++p) diag -= lower_(j, p) * lower_(j, p);
        if (!(diag > floor)) {
            throw SingularityError("normal system is singular or not positive definite (pivot " +
                                   std::to_string(j) + " = " + std::to_string(diag) + ")");
        }
        const double ljj = std::sqrt(diag);
        lower_(j, j) = ljj;
        for (std::size_t i = j + 1; i < n_; ++i) {
            double s = spd(i, j);
            for (std::size_t p = 0; p < j; ++p) s -= lower_(i, p) * lower_(j, p);
            lower_(i, j) = s / ljj;
        }
    }
}

Tensor Cholesky::solve(const Tensor& rhs) const {
    const auto d = as_matrix(rhs, "cholesky solve");
    if (d.rows != n_) throw DimensionError("cholesky solve: rhs has " + std::to_string(d.rows) + " rows, need " + std::to_string(n_));
    Tensor x = rhs;
    const std::size_t m = d.cols;
    // forward: L y = b
    for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t c = 0; c < m; ++c) {
            double s = x[i * m + c];
            for (std::size_t p = 0; p < i; ++p) s -= lower_(i, p) * x[p * m + c];
            x[i * m + c] = s / lower_(i, i);
        }
    }
    // backward: L^T x = y
    for (std::size_t ii = n_; ii-- > 0;) {
        for (std::size_t c = 0; c < m; ++c) {
            double s = x[ii * m + c];
            for (std::size_t p = ii + 1; p < n_; ++p) s -= lower_(p, ii) * x[p * m + c];
            x[ii * m + c] = s / lower_(ii, ii);
        }
    }
    return x;
}

Tensor Cholesky::inverse() const {
    Tensor inv = solve(Tensor::identity(n_));
    // symmetrize away rounding asymmetry
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = i + 1; j < n_; ++j) {
            const double v = 0.5 * (inv(i, j) + inv(j, i));
            inv(i, j) = v;
            inv(j, i) = v;
        }
    return inv;
}

Tensor Cholesky::pivots() const {
    Tensor p({n_});
    for (std::size_t i = 0; i < n_; ++i) p[i] = lower_(i, i) * lower_(i, i);
    return p;
}

Tensor gram_plus_ridge(const Tensor& a, double lambda) {
    Tensor g = matmul_tn(a, a);
    for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) += lambda;
    return g;
}

Tensor outer_gram_plus_ridge(const Tensor& a, double lambda) {
    Tensor g = matmul_nt(a, a);
    for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) += lambda;
    return g;
}

}  // namespace mbnn
