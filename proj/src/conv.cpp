#include "mbnn/conv.hpp"

#include <cmath>

#include "mbnn/errors.hpp"

namespace mbnn {

void ConvGeometry::validate() const {
    if (krows > rows || kcols > cols) {
        throw DimensionError("kernel " + std::to_string(krows) + "x" + std::to_string(kcols) +
                             " is larger than image " + std::to_string(rows) + "x" + std::to_string(cols));
    }
}

namespace {

std::pair<std::size_t, std::size_t> extents2(const Tensor& t, const char* what) {
    if (t.rank() == 1) return {1, t.extent(0)};
    if (t.rank() == 2) return {t.extent(0), t.extent(1)};
    throw DimensionError(std::string(what) + " must be 1-D or 2-D, got " + shape_string(t.shape()));
}

ConvGeometry geometry_of(const Tensor& image, const Tensor& kernel) {
    const auto [h, w] = extents2(image, "image");
    const auto [kh, kw] = extents2(kernel, "kernel");
    ConvGeometry g{h, w, kh, kw};
    g.validate();
    return g;
}

}  // namespace

void conv2d_circular_raw(std::span<const double> in, std::span<const double> kernel, std::span<double> out,
                         const ConvGeometry& g) {
    const std::size_t H = g.rows, W = g.cols;
    const std::size_t ch = g.krows / 2, cw = g.kcols / 2;
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t a = 0; a < g.krows; ++a) {
        for (std::size_t b = 0; b < g.kcols; ++b) {
            const double kv = kernel[a * g.kcols + b];
            if (kv == 0.0) continue;
            // out[i,j] += kv * in[i - (a - ch), j - (b - cw)]
            const std::size_t di = (H + ch - a % H) % H;  // row offset into input
            const std::size_t dj = (W + cw - b % W) % W;
            for (std::size_t i = 0; i < H; ++i) {
                const std::size_t si = (i + di) % H;
                const double* irow = in.data() + si * W;
                double* orow = out.data() + i * W;
                const std::size_t split = W - dj;
                for (std::size_t j = 0; j < split; ++j) orow[j] += kv * irow[j + dj];
                for (std::size_t j = split; j < W; ++j) orow[j] += kv * irow[j + dj - W];
            }
        }
    }
}

void correlate2d_circular_raw(std::span<const double> in, std::span<const double> kernel, std::span<double> out,
                              const ConvGeometry& g) {
    const std::size_t H = g.rows, W = g.cols;
    const std::size_t ch = g.krows / 2, cw = g.kcols / 2;
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t a = 0; a < g.krows; ++a) {
        for (std::size_t b = 0; b < g.kcols; ++b) {
            const double kv = kernel[a * g.kcols + b];
            if (kv == 0.0) continue;
            // out[p,q] += kv * in[p + (a - ch), q + (b - cw)]
            const std::size_t di = (a % H + H - ch % H) % H;
            const std::size_t dj = (b % W + W - cw % W) % W;
            for (std::size_t i = 0; i < H; ++i) {
                const std::size_t si = (i + di) % H;
                const double* irow = in.data() + si * W;
                double* orow = out.data() + i * W;
                const std::size_t split = W - dj;
                for (std::size_t j = 0; j < split; ++j) orow[j] += kv * irow[j + dj];
                for (std::size_t j = split; j < W; ++j) orow[j] += kv * irow[j + dj - W];
            }
        }
    }
}

void conv2d_kernel_grad_raw(std::span<const double> in, std::span<const double> upstream, std::span<double> kgrad,
                            const ConvGeometry& g) {
    const std::size_t H = g.rows, W = g.cols;
    const std::size_t ch = g.krows / 2, cw = g.kcols / 2;
    for (std::size_t a = 0; a < g.krows; ++a) {
        for (std::size_t b = 0; b < g.kcols; ++b) {
            const std::size_t di = (H + ch - a % H) % H;
            const std::size_t dj = (W + cw - b % W) % W;
            double s = 0.0;
            for (std::size_t i = 0; i < H; ++i) {
                const std::size_t si = (i + di) % H;
                const double* irow = in.data() + si * W;
                const double* urow = upstream.data() + i * W;
                for (std::size_t j = 0; j < W; ++j) s += urow[j] * irow[(j + dj) % W];
            }
            kgrad[a * g.kcols + b] += s;
        }
    }
}

Tensor conv2d_circular(const Tensor& image, const Tensor& kernel) {
    const auto g = geometry_of(image, kernel);
    Tensor out(image.shape());
    conv2d_circular_raw(image.data(), kernel.data(), out.data(), g);
    return out;
}

Tensor correlate2d_circular(const Tensor& image, const Tensor& kernel) {
    const auto g = geometry_of(image, kernel);
    Tensor out(image.shape());
    correlate2d_circular_raw(image.data(), kernel.data(), out.data(), g);
    return out;
}

std::vector<Complex> conv_transfer(const Tensor& kernel, std::size_t rows, std::size_t cols) {
    const auto [kh, kw] = extents2(kernel, "kernel");
    ConvGeometry{rows, cols, kh, kw}.validate();
    std::vector<Complex> buf(rows * cols, Complex(0.0, 0.0));
    const std::size_t ch = kh / 2, cw = kw / 2;
    for (std::size_t a = 0; a < kh; ++a)
        for (std::size_t b = 0; b < kw; ++b) {
            const std::size_t i = (a + rows - ch) % rows;
            const std::size_t j = (b + cols - cw) % cols;
            buf[i * cols + j] += kernel[a * kw + b];
        }
    dft2_inplace(buf, rows, cols, FftDirection::forward);
    const double scale = std::sqrt(static_cast<double>(rows * cols));
    for (auto& v : buf) v *= scale;
    return buf;
}

Tensor kernel_from_transfer(std::span<const Complex> transfer, std::size_t rows, std::size_t cols) {
    if (transfer.size() != rows * cols) throw DimensionError("transfer length does not match extents");
    std::vector<Complex> buf(transfer.begin(), transfer.end());
    dft2_inplace(buf, rows, cols, FftDirection::inverse);
    const double scale = 1.0 / std::sqrt(static_cast<double>(rows * cols));
    Tensor k({rows, cols});
    const std::size_t ch = rows / 2, cw = cols / 2;
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) {
            const std::size_t a = (i + ch) % rows;
            const std::size_t b = (j + cw) % cols;
            k(a, b) = buf[i * cols + j].real() * scale;
        }
    return k;
}

}  // namespace mbnn
