#include "mbnn/transforms.hpp"

#include <cmath>
#include <numbers>

#include "mbnn/errors.hpp"

namespace mbnn {

bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

void fft_inplace(std::span<Complex> x, FftDirection dir) {
    const std::size_t n = x.size();
    if (!is_power_of_two(n)) throw SizeError("fft length " + std::to_string(n) + " is not a power of two");
    if (n == 1) return;

    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(x[i], x[j]);
    }
    const double sign = dir == FftDirection::forward ? -1.0 : 1.0;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len / 2;
        for (std::size_t k = 0; k < half; ++k) {
            const double ang = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(len);
            const Complex w(std::cos(ang), std::sin(ang));
            for (std::size_t i = 0; i < n; i += len) {
                const Complex u = x[i + k];
                const Complex v = x[i + k + half] * w;
                x[i + k] = u + v;
                x[i + k + half] = u - v;
            }
        }
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (auto& v : x) v *= scale;
}

void fft2_inplace(std::span<Complex> x, std::size_t rows, std::size_t cols, FftDirection dir) {
    if (x.size() != rows * cols) throw DimensionError("fft2: buffer does not match extents");
    if (!is_power_of_two(rows) || !is_power_of_two(cols)) {
        throw SizeError("fft2 extents " + std::to_string(rows) + "x" + std::to_string(cols) +
                        " are not powers of two");
    }
    if (cols > 1)
        for (std::size_t r = 0; r < rows; ++r) fft_inplace(x.subspan(r * cols, cols), dir);
    if (rows > 1) {
        std::vector<Complex> col(rows);
        for (std::size_t c = 0; c < cols; ++c) {
            for (std::size_t r = 0; r < rows; ++r) col[r] = x[r * cols + c];
            fft_inplace(col, dir);
            for (std::size_t r = 0; r < rows; ++r) x[r * cols + c] = col[r];
        }
    }
}

namespace {

void direct_dft(std::span<Complex> x, std::size_t stride, std::size_t n, FftDirection dir, std::vector<Complex>& tmp) {
    const double sign = dir == FftDirection::forward ? -1.0 : 1.0;
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    tmp.assign(n, Complex(0.0, 0.0));
    for (std::size_t k = 0; k < n; ++k) {
        Complex acc(0.0, 0.0);
        for (std::size_t t = 0; t < n; ++t) {
            const double ang = sign * 2.0 * std::numbers::pi * static_cast<double>(k * t % n) / static_cast<double>(n);
            acc += x[t * stride] * Complex(std::cos(ang), std::sin(ang));
        }
        tmp[k] = acc * scale;
    }
    for (std::size_t k = 0; k < n; ++k) x[k * stride] = tmp[k];
}

}  // namespace

void dft2_inplace(std::span<Complex> x, std::size_t rows, std::size_t cols, FftDirection dir) {
    if (is_power_of_two(rows) && is_power_of_two(cols)) return fft2_inplace(x, rows, cols, dir);
    if (x.size() != rows * cols) throw DimensionError("dft2: buffer does not match extents");
    std::vector<Complex> tmp;
    if (cols > 1)
        for (std::size_t r = 0; r < rows; ++r) direct_dft(x.subspan(r * cols), 1, cols, dir, tmp);
    if (rows > 1)
        for (std::size_t c = 0; c < cols; ++c) direct_dft(x.subspan(c), cols, rows, dir, tmp);
}

std::vector<Complex> to_complex(std::span<const double> real) {
    std::vector<Complex> out(real.size());
    for (std::size_t i = 0; i < real.size(); ++i) out[i] = Complex(real[i], 0.0);
    return out;
}

Tensor to_complex_pair(const Tensor& real) {
    Shape shape{2};
    shape.insert(shape.end(), real.shape().begin(), real.shape().end());
    Tensor out(shape);
    std::copy(real.data().begin(), real.data().end(), out.data().begin());
    return out;
}

Tensor fft(const Tensor& pair, FftDirection dir) {
    if ((pair.rank() != 2 && pair.rank() != 3) || pair.extent(0) != 2) {
        throw DimensionError("fft expects a complex pair [2,n] or [2,rows,cols], got " + shape_string(pair.shape()));
    }
    const std::size_t n = pair.size() / 2;
    std::vector<Complex> buf(n);
    for (std::size_t i = 0; i < n; ++i) buf[i] = Complex(pair[i], pair[n + i]);
    if (pair.rank() == 2)
        fft_inplace(buf, dir);
    else
        fft2_inplace(buf, pair.extent(1), pair.extent(2), dir);
    Tensor out(pair.shape());
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = buf[i].real();
        out[n + i] = buf[i].imag();
    }
    return out;
}

void check_haar_size(std::size_t rows, std::size_t cols, std::size_t levels) {
    if (levels == 0) throw ParameterError("haar levels must be at least 1");
    const std::size_t block = std::size_t{1} << levels;
    auto ok = [&](std::size_t e) { return e == 1 || (is_power_of_two(e) && e % block == 0); };
    if (!ok(rows) || !ok(cols) || (rows == 1 && cols == 1)) {
        throw SizeError("haar: extents " + std::to_string(rows) + "x" + std::to_string(cols) +
                        " do not support " + std::to_string(levels) + " level(s)");
    }
}

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

// One analysis step on `len` samples spaced by `stride`.
void haar_step(double* x, std::size_t len, std::size_t stride, std::vector<double>& tmp) {
    const std::size_t half = len / 2;
    tmp.resize(len);
    for (std::size_t i = 0; i < half; ++i) {
        const double a = x[(2 * i) * stride];
        const double b = x[(2 * i + 1) * stride];
        tmp[i] = (a + b) * kInvSqrt2;
        tmp[half + i] = (a - b) * kInvSqrt2;
    }
    for (std::size_t i = 0; i < len; ++i) x[i * stride] = tmp[i];
}

void haar_unstep(double* x, std::size_t len, std::size_t stride, std::vector<double>& tmp) {
    const std::size_t half = len / 2;
    tmp.resize(len);
    for (std::size_t i = 0; i < half; ++i) {
        const double s = x[i * stride];
        const double d = x[(half + i) * stride];
        tmp[2 * i] = (s + d) * kInvSqrt2;
        tmp[2 * i + 1] = (s - d) * kInvSqrt2;
    }
    for (std::size_t i = 0; i < len; ++i) x[i * stride] = tmp[i];
}

}  // namespace

void haar_forward(std::span<const double> in, std::span<double> out, std::size_t rows, std::size_t cols,
                  std::size_t levels) {
    check_haar_size(rows, cols, levels);
    if (in.size() != rows * cols || out.size() != in.size()) throw DimensionError("haar: buffer size mismatch");
    std::copy(in.begin(), in.end(), out.begin());
    std::vector<double> tmp;
    std::size_t r = rows, c = cols;
    for (std::size_t lvl = 0; lvl < levels; ++lvl) {
        if (c > 1)
            for (std::size_t i = 0; i < r; ++i) haar_step(out.data() + i * cols, c, 1, tmp);
        if (r > 1)
            for (std::size_t j = 0; j < c; ++j) haar_step(out.data() + j, r, cols, tmp);
        if (r > 1) r /= 2;
        if (c > 1) c /= 2;
    }
}

void haar_inverse(std::span<const double> in, std::span<double> out, std::size_t rows, std::size_t cols,
                  std::size_t levels) {
    check_haar_size(rows, cols, levels);
    if (in.size() != rows * cols || out.size() != in.size()) throw DimensionError("haar: buffer size mismatch");
    std::copy(in.begin(), in.end(), out.begin());
    std::vector<double> tmp;
    for (std::size_t lvl = levels; lvl-- > 0;) {
        const std::size_t r = rows > 1 ? rows >> lvl : 1;
        const std::size_t c = cols > 1 ? cols >> lvl : 1;
        if (r > 1)
            for (std::size_t j = 0; j < c; ++j) haar_unstep(out.data() + j, r, cols, tmp);
        if (c > 1)
            for (std::size_t i = 0; i < r; ++i) haar_unstep(out.data() + i * cols, c, 1, tmp);
    }
}

namespace {

std::pair<std::size_t, std::size_t> image_extents(const Tensor& t) {
    if (t.rank() == 1) return {1, t.extent(0)};
    if (t.rank() == 2) return {t.extent(0), t.extent(1)};
    throw DimensionError("expected a 1-D signal or 2-D image, got " + shape_string(t.shape()));
}

}  // namespace

Tensor haar_forward(const Tensor& image, std::size_t levels) {
    const auto [r, c] = image_extents(image);
    Tensor out(image.shape());
    haar_forward(image.data(), out.data(), r, c, levels);
    return out;
}

Tensor haar_inverse(const Tensor& coeffs, std::size_t levels) {
    const auto [r, c] = image_extents(coeffs);
    Tensor out(coeffs.shape());
    haar_inverse(coeffs.data(), out.data(), r, c, levels);
    return out;
}

}  // namespace mbnn
