#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mbnn/tensor.hpp"

namespace mbnn::forward {

// ---------------------------------------------------------------------------
// Infrared radiometry
// ---------------------------------------------------------------------------

/// Emissivity / environment parameters of the radiometric transfer.
struct IRParams {
    double e = 1.0;    ///< emissivity, (0, 1]
    double Tu = 300.0; ///< background temperature [K]
    double k = 0.0;    ///< attenuation coefficient [1/m]
    double d = 0.0;    ///< distance [m]
    double Ta = 290.0; ///< air temperature [K]
    double n = 4.0;    ///< radiometric exponent

    /// Throws ParameterError naming the first field out of range.
    void validate() const;
};

/// phi(f) = [(e f^n + (1-e) Tu^n + (exp(-k d) - 1) Ta) / exp(k d)]^(1/n).
/// Throws DomainError when f <= 0 or the bracket is negative.
double ir_phi(double f, const IRParams& p);
/// Elementwise phi; the DomainError names the offending pixel.
Tensor ir_phi(const Tensor& f, const IRParams& p);

/// Inverse of phi in f: [(phi^n exp(k d) - (1-e) Tu^n - (exp(-k d) - 1) Ta) / e]^(1/n).
/// Throws DomainError when phi <= 0 or no positive f maps to phi.
double ir_phi_inverse(double phi, const IRParams& p);
Tensor ir_phi_inverse(const Tensor& phi, const IRParams& p);

/// Normalized non-negative blur kernel.
struct PSF {
    Tensor kernel;
    double sigma = 0.0;  ///< width when Gaussian-generated, 0 otherwise
};

/// Wrap an arbitrary kernel, checking non-negativity and unit sum (1e-12).
PSF make_psf(Tensor kernel);
/// Sampled, normalized, centered Gaussian of odd extent `size`.
PSF gaussian_psf(std::size_t size, double sigma);

/// g = psf * phi(f) + noise, circular convolution, i.i.d. N(0, noise_sd^2) noise from `seed`.
Tensor ir_forward(const Tensor& f, const IRParams& p, const PSF& psf, double noise_sd, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Microphone-array acoustics
// ---------------------------------------------------------------------------

struct Point2 {
    double x = 0.0, y = 0.0;
};

/// Regular grid of source cells in the source plane, centered on (cx, cy).
struct SourceGrid {
    std::size_t nx = 0, ny = 0;
    double dx = 0.0, dy = 0.0;
    double cx = 0.0, cy = 0.0;

    Point2 cell_center(std::size_t ix, std::size_t iy) const;
    std::size_t cells() const noexcept { return nx * ny; }
};

/// Microphones in the plane z = 0, sources in the parallel plane z = standoff.
struct ArrayGeometry {
    std::vector<Point2> mics;
    SourceGrid grid;
    double standoff = 1.0;      ///< plane separation [m]
    double c = 343.0;           ///< sound speed [m/s]
    double sample_rate = 0.0;   ///< [Hz]
    double omega = 0.0;         ///< source angular frequency [rad/s]

    /// Throws ConfigError naming the violated constraint.
    void validate() const;
    /// Propagation delay from cell (ix, iy) to microphone m [s].
    double delay(std::size_t mic, std::size_t ix, std::size_t iy) const;
    double max_delay() const;
    /// Samples in half a period when that is an integer, else 1.
    std::size_t half_period_samples() const;
    /// Signal length used when none is given: the largest delay plus 100 periods.
    double default_duration() const;
};

/// Planar microphone ring(s): `per_ring` microphones on each radius, angles 2 pi j / per_ring + phase.
std::vector<Point2> ring_array(std::span<const double> radii, std::size_t per_ring, double phase = 0.0);
/// Sunflower (Fermat spiral) layout of `count` microphones within `radius`.
std::vector<Point2> spiral_array(std::size_t count, double radius);

/// Per-microphone time signals [mics x samples]: sum over cells of
/// sqrt(intensity) cos(omega (t - tau)) plus seeded Gaussian noise.
Tensor acoustic_synthesize(const Tensor& sources, const ArrayGeometry& geom, double duration, std::uint64_t seed,
                           double noise_sd);

/// Delay-and-sum power map [ny x nx]. Each microphone signal is advanced by its
/// delay (linear interpolation), the array average is squared and averaged over
/// the steady-state window (length a whole number of half periods), then doubled
/// so a unit-intensity source reads about 1 at its own cell.
Tensor delay_and_sum(const Tensor& signals, const ArrayGeometry& geom);

/// Noise-free beam map of a unit source at cell (ix, iy).
Tensor beamformer_psf(const ArrayGeometry& geom, std::size_t ix, std::size_t iy);

}  // namespace mbnn::forward
