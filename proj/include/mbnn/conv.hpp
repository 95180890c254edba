#pragma once

#include <span>
#include <vector>

#include "mbnn/tensor.hpp"
#include "mbnn/transforms.hpp"

namespace mbnn {

/// Geometry of a circular 2-D convolution. The kernel tap (kh/2, kw/2) sits on
/// the output pixel, so an odd kernel with a single 1 at its center is the identity.
struct ConvGeometry {
    std::size_t rows, cols;    // image
    std::size_t krows, kcols;  // kernel

    void validate() const;
};

/// out[i,j] = sum_{a,b} k[a,b] * in[(i - a + kh/2) mod H, (j - b + kw/2) mod W]
void conv2d_circular_raw(std::span<const double> in, std::span<const double> kernel, std::span<double> out,
                         const ConvGeometry& g);
/// Adjoint of conv2d_circular_raw in the image argument (circular correlation).
void correlate2d_circular_raw(std::span<const double> in, std::span<const double> kernel, std::span<double> out,
                              const ConvGeometry& g);
/// Gradient of <upstream, conv(in, k)> with respect to k.
void conv2d_kernel_grad_raw(std::span<const double> in, std::span<const double> upstream, std::span<double> kgrad,
                            const ConvGeometry& g);

/// Circular convolution of an image [H x W] (or signal [n]) with a kernel no larger than it.
Tensor conv2d_circular(const Tensor& image, const Tensor& kernel);
Tensor correlate2d_circular(const Tensor& image, const Tensor& kernel);

/// Unnormalized DFT of the kernel wrapped onto an H x W torus with its center
/// at the origin, so conv(x, k) = IDFT(transfer . DFT(x)) with unitary transforms
/// scaled back by sqrt(H W) (absorbed here: the returned transfer already multiplies
/// unitary spectra directly).
std::vector<Complex> conv_transfer(const Tensor& kernel, std::size_t rows, std::size_t cols);
/// Full-size real kernel [H x W] realizing a transfer function (inverse of conv_transfer).
/// The transfer must be conjugate symmetric; the imaginary residue is dropped.
Tensor kernel_from_transfer(std::span<const Complex> transfer, std::size_t rows, std::size_t cols);

}  // namespace mbnn
