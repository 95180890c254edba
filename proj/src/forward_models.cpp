#include "mbnn/forward_models.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "mbnn/conv.hpp"
#include "mbnn/errors.hpp"
#include "mbnn/rng.hpp"

namespace mbnn::forward {

void IRParams::validate() const {
    auto fail = [](const std::string& field, double v, const char* bound) {
        std::ostringstream os;
        os << "IRParams." << field << " = " << v << " violates " << bound;
        throw ParameterError(os.str());
    };
    if (!(e > 0.0 && e <= 1.0)) fail("e", e, "0 < e <= 1");
    if (!(Tu > 0.0)) fail("Tu", Tu, "Tu > 0");
    if (!(k >= 0.0)) fail("k", k, "k >= 0");
    if (!(d >= 0.0)) fail("d", d, "d >= 0");
    if (!(Ta > 0.0)) fail("Ta", Ta, "Ta > 0");
    if (!(n > 0.0)) fail("n", n, "n > 0");
}

double ir_phi(double f, const IRParams& p) {
    if (!(f > 0.0)) throw DomainError("ir_phi: temperature must be > 0, got " + std::to_string(f));
    const double kd = p.k * p.d;
    // e = 1 and k d = 0 reduce the bracket to f^n exactly
    if (p.e == 1.0 && kd == 0.0) return f;
    const double bracket =
        (p.e * std::pow(f, p.n) + (1.0 - p.e) * std::pow(p.Tu, p.n) + std::expm1(-kd) * p.Ta) / std::exp(kd);
    if (bracket < 0.0) {
        throw DomainError("ir_phi: bracket is negative (" + std::to_string(bracket) + ") for f = " + std::to_string(f));
    }
    return std::pow(bracket, 1.0 / p.n);
}

Tensor ir_phi(const Tensor& f, const IRParams& p) {
    p.validate();
    Tensor out(f.shape());
    const std::size_t w = f.rank() >= 2 ? f.cols() : f.size();
    for (std::size_t i = 0; i < f.size(); ++i) {
        try {
            out[i] = ir_phi(f[i], p);
        } catch (const DomainError& err) {
            throw DomainError(std::string(err.what()) + " at pixel (" + std::to_string(i / w) + ", " +
                              std::to_string(i % w) + ")");
        }
    }
    return out;
}

double ir_phi_inverse(double phi, const IRParams& p) {
    if (!(phi > 0.0)) throw DomainError("ir_phi_inverse: radiometric value must be > 0, got " + std::to_string(phi));
    const double kd = p.k * p.d;
    if (p.e == 1.0 && kd == 0.0) return phi;
    const double fn =
        (std::pow(phi, p.n) * std::exp(kd) - (1.0 - p.e) * std::pow(p.Tu, p.n) - std::expm1(-kd) * p.Ta) / p.e;
    if (!(fn > 0.0)) {
        throw DomainError("ir_phi_inverse: no positive temperature maps to " + std::to_string(phi));
    }
    return std::pow(fn, 1.0 / p.n);
}

Tensor ir_phi_inverse(const Tensor& phi, const IRParams& p) {
    p.validate();
    Tensor out(phi.shape());
    const std::size_t w = phi.rank() >= 2 ? phi.cols() : phi.size();
    for (std::size_t i = 0; i < phi.size(); ++i) {
        try {
            out[i] = ir_phi_inverse(phi[i], p);
        } catch (const DomainError& err) {
            throw DomainError(std::string(err.what()) + " at pixel (" + std::to_string(i / w) + ", " +
                              std::to_string(i % w) + ")");
        }
    }
    return out;
}

PSF make_psf(Tensor kernel) {
    if (kernel.rank() == 1) kernel = kernel.reshaped({1, kernel.size()});
    double sum = 0.0;
    for (double v : kernel.data()) {
        if (!(v >= 0.0)) throw ParameterError("PSF entries must be non-negative");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw ParameterError("PSF must sum to 1, sums to " + std::to_string(sum));
    return PSF{std::move(kernel), 0.0};
}

PSF gaussian_psf(std::size_t size, double sigma) {
    if (size % 2 == 0) throw ParameterError("gaussian_psf: size must be odd, got " + std::to_string(size));
    if (!(sigma > 0.0)) throw ParameterError("gaussian_psf: sigma must be > 0");
    Tensor k({size, size});
    const double c = static_cast<double>(size / 2);
    double sum = 0.0;
    for (std::size_t i = 0; i < size; ++i)
        for (std::size_t j = 0; j < size; ++j) {
            const double di = static_cast<double>(i) - c, dj = static_cast<double>(j) - c;
            const double v = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
            k(i, j) = v;
            sum += v;
        }
    for (auto& v : k.data()) v /= sum;
    return PSF{std::move(k), sigma};
}

Tensor ir_forward(const Tensor& f, const IRParams& p, const PSF& psf, double noise_sd, std::uint64_t seed) {
    if (!(noise_sd >= 0.0)) throw ParameterError("noise_sd must be >= 0");
    Tensor g = conv2d_circular(ir_phi(f, p), psf.kernel);
    if (noise_sd > 0.0) {
        CounterRng rng(seed);
        for (auto& v : g.data()) v += noise_sd * rng.gaussian();
    }
    return g;
}

// ---------------------------------------------------------------------------

Point2 SourceGrid::cell_center(std::size_t ix, std::size_t iy) const {
    const double ox = static_cast<double>(nx - 1) / 2.0;
    const double oy = static_cast<double>(ny - 1) / 2.0;
    return {cx + (static_cast<double>(ix) - ox) * dx, cy + (static_cast<double>(iy) - oy) * dy};
}

void ArrayGeometry::validate() const {
    if (mics.size() < 2) throw ConfigError("array needs at least 2 microphones, has " + std::to_string(mics.size()));
    if (grid.nx == 0 || grid.ny == 0) throw ConfigError("source grid extents must be positive");
    if (!(grid.dx > 0.0 && grid.dy > 0.0)) throw ConfigError("source grid spacing must be positive");
    if (!(c > 0.0)) throw ConfigError("sound speed must be > 0");
    if (!(omega > 0.0)) throw ConfigError("source angular frequency must be > 0");
    if (!(standoff >= 0.0)) throw ConfigError("standoff must be >= 0");
    if (!(sample_rate > omega / std::numbers::pi)) {
        throw ConfigError("sample_rate " + std::to_string(sample_rate) + " Hz violates Nyquist for omega " +
                          std::to_string(omega) + " rad/s (need > " + std::to_string(omega / std::numbers::pi) + ")");
    }
}

double ArrayGeometry::delay(std::size_t mic, std::size_t ix, std::size_t iy) const {
    const Point2 s = grid.cell_center(ix, iy);
    const Point2 m = mics[mic];
    const double dx = m.x - s.x, dy = m.y - s.y;
    return std::sqrt(dx * dx + dy * dy + standoff * standoff) / c;
}

double ArrayGeometry::max_delay() const {
    double best = 0.0;
    for (std::size_t m = 0; m < mics.size(); ++m)
        for (std::size_t iy = 0; iy < grid.ny; ++iy)
            for (std::size_t ix = 0; ix < grid.nx; ++ix) best = std::max(best, delay(m, ix, iy));
    return best;
}

std::size_t ArrayGeometry::half_period_samples() const {
    const double half = std::numbers::pi * sample_rate / omega;
    const double r = std::round(half);
    return (r >= 1.0 && std::abs(half - r) < 1e-9 * half) ? static_cast<std::size_t>(r) : 1;
}

double ArrayGeometry::default_duration() const {
    return max_delay() + 100.0 * 2.0 * std::numbers::pi / omega;
}

std::vector<Point2> ring_array(std::span<const double> radii, std::size_t per_ring, double phase) {
    std::vector<Point2> out;
    for (double r : radii)
        for (std::size_t j = 0; j < per_ring; ++j) {
            const double a = phase + 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(per_ring);
            out.push_back({r * std::cos(a), r * std::sin(a)});
        }
    return out;
}

std::vector<Point2> spiral_array(std::size_t count, double radius) {
    std::vector<Point2> out;
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (std::size_t j = 0; j < count; ++j) {
        const double r = radius * std::sqrt((static_cast<double>(j) + 0.5) / static_cast<double>(count));
        const double a = golden * static_cast<double>(j);
        out.push_back({r * std::cos(a), r * std::sin(a)});
    }
    return out;
}

Tensor acoustic_synthesize(const Tensor& sources, const ArrayGeometry& geom, double duration, std::uint64_t seed,
                           double noise_sd) {
    geom.validate();
    if (sources.rank() != 2 || sources.rows() != geom.grid.ny || sources.cols() != geom.grid.nx) {
        throw DimensionError("source map must be [ny x nx] = [" + std::to_string(geom.grid.ny) + " x " +
                             std::to_string(geom.grid.nx) + "], got " + shape_string(sources.shape()));
    }
    if (!(duration > 0.0)) throw ConfigError("duration must be > 0");
    if (!(noise_sd >= 0.0)) throw ParameterError("noise_sd must be >= 0");
    for (double v : sources.data())
        if (!(v >= 0.0)) throw ParameterError("source intensities must be >= 0");

    const std::size_t samples = static_cast<std::size_t>(std::llround(duration * geom.sample_rate));
    if (samples < 2) throw ConfigError("duration gives fewer than 2 samples");
    const std::size_t mics = geom.mics.size();

    // cos(w (t - tau)) = cos(w t) cos(w tau) + sin(w t) sin(w tau)
    // separate loops keep cos from being fused into sincos, which can differ by an ulp
    std::vector<double> ct(samples), st(samples);
    for (std::size_t n = 0; n < samples; ++n) ct[n] = std::cos(geom.omega * static_cast<double>(n) / geom.sample_rate);
    for (std::size_t n = 0; n < samples; ++n) st[n] = std::sin(geom.omega * static_cast<double>(n) / geom.sample_rate);
    Tensor out({mics, samples});
    for (std::size_t m = 0; m < mics; ++m) {
        double ac = 0.0, as = 0.0;
        for (std::size_t iy = 0; iy < geom.grid.ny; ++iy)
            for (std::size_t ix = 0; ix < geom.grid.nx; ++ix) {
                const double inten = sources(iy, ix);
                if (inten == 0.0) continue;
                const double amp = std::sqrt(inten);
                const double ph = geom.omega * geom.delay(m, ix, iy);
                ac += amp * std::cos(ph);
                as += amp * std::sin(ph);
            }
        double* row = out.data().data() + m * samples;
        for (std::size_t n = 0; n < samples; ++n) row[n] = ac * ct[n] + as * st[n];
        if (noise_sd > 0.0) {
            CounterRng rng = CounterRng(seed).split(m);
            for (std::size_t n = 0; n < samples; ++n) row[n] += noise_sd * rng.gaussian();
        }
    }
    return out;
}

Tensor delay_and_sum(const Tensor& signals, const ArrayGeometry& geom) {
    geom.validate();
    const std::size_t mics = geom.mics.size();
    if (signals.rank() != 2 || signals.rows() != mics) {
        throw DimensionError("signals must be [" + std::to_string(mics) + " x samples], got " +
                             shape_string(signals.shape()));
    }
    const std::size_t samples = signals.cols();
    const double max_shift = geom.max_delay() * geom.sample_rate;
    const auto reach = static_cast<std::size_t>(std::ceil(max_shift)) + 1;
    if (samples <= reach + 1) {
        throw ConfigError("signals have " + std::to_string(samples) + " samples, need more than the largest delay (" +
                          std::to_string(reach) + " samples)");
    }
    const std::size_t avail = samples - reach;
    const std::size_t half = geom.half_period_samples();
    const std::size_t window = avail >= half ? (avail / half) * half : avail;

    Tensor map({geom.grid.ny, geom.grid.nx});
    std::vector<double> beam(window);
    for (std::size_t iy = 0; iy < geom.grid.ny; ++iy)
        for (std::size_t ix = 0; ix < geom.grid.nx; ++ix) {
            std::fill(beam.begin(), beam.end(), 0.0);
            for (std::size_t m = 0; m < mics; ++m) {
                const double shift = geom.delay(m, ix, iy) * geom.sample_rate;
                const auto base = static_cast<std::size_t>(std::floor(shift));
                const double frac = shift - static_cast<double>(base);
                const double* row = signals.data().data() + m * samples + base;
                for (std::size_t n = 0; n < window; ++n) beam[n] += (1.0 - frac) * row[n] + frac * row[n + 1];
            }
            double power = 0.0;
            for (double v : beam) power += v * v;
            const double inv_m = 1.0 / static_cast<double>(mics);
            map(iy, ix) = 2.0 * power * inv_m * inv_m / static_cast<double>(window);
        }
    return map;
}

Tensor beamformer_psf(const ArrayGeometry& geom, std::size_t ix, std::size_t iy) {
    if (ix >= geom.grid.nx || iy >= geom.grid.ny) {
        throw IndexError("cell (" + std::to_string(ix) + ", " + std::to_string(iy) + ") outside the source grid");
    }
    Tensor src({geom.grid.ny, geom.grid.nx});
    src(iy, ix) = 1.0;
    return delay_and_sum(acoustic_synthesize(src, geom, geom.default_duration(), 0, 0.0), geom);
}

}  // namespace mbnn::forward
