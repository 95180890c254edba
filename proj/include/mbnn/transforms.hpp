#pragma once

#include <complex>
#include <span>
#include <vector>

#include "mbnn/tensor.hpp"

namespace mbnn {

using Complex = std::complex<double>;

enum class FftDirection { forward, inverse };

bool is_power_of_two(std::size_t n) noexcept;

/// In-place radix-2 FFT with unitary 1/sqrt(N) scaling in both directions.
void fft_inplace(std::span<Complex> x, FftDirection dir);
/// Unitary 2-D FFT of a row-major rows x cols array. Extents of 1 are allowed.
void fft2_inplace(std::span<Complex> x, std::size_t rows, std::size_t cols, FftDirection dir);
/// Unitary 2-D DFT of any extents: fft2_inplace for powers of two, direct sums otherwise.
void dft2_inplace(std::span<Complex> x, std::size_t rows, std::size_t cols, FftDirection dir);

/// FFT on the complex-pair representation: shape [2, n] or [2, rows, cols],
/// plane 0 holding real parts and plane 1 imaginary parts.
Tensor fft(const Tensor& pair, FftDirection dir);
/// Real tensor [n] or [rows, cols] lifted to the pair representation.
Tensor to_complex_pair(const Tensor& real);

std::vector<Complex> to_complex(std::span<const double> real);

/// Orthonormal multi-level 2-D Haar transform in the Mallat layout: after
/// each level the low-pass (LL) block occupies the top-left corner and the
/// three detail subbands fill the other quadrants. A dimension of extent 1 is
/// left alone, so rows == 1 gives the 1-D transform.
void haar_forward(std::span<const double> in, std::span<double> out, std::size_t rows, std::size_t cols,
                  std::size_t levels);
void haar_inverse(std::span<const double> in, std::span<double> out, std::size_t rows, std::size_t cols,
                  std::size_t levels);
/// Throws SizeError unless both non-unit extents are divisible by 2^levels.
void check_haar_size(std::size_t rows, std::size_t cols, std::size_t levels);

Tensor haar_forward(const Tensor& image, std::size_t levels);
Tensor haar_inverse(const Tensor& coeffs, std::size_t levels);

}  // namespace mbnn
