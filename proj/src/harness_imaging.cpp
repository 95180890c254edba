#include <algorithm>
#include <cmath>
#include <numbers>

#include "harness_internal.hpp"
#include "mbnn/bayes_linear.hpp"
#include "mbnn/errors.hpp"
#include "mbnn/forward_models.hpp"
#include "mbnn/linear_op.hpp"
#include "mbnn/unfolded.hpp"

namespace mbnn::harness::detail {

namespace {

using config::Range;
using config::Section;

std::size_t as_index(double v, std::size_t limit, const std::string& field) {
    if (!(v >= 0.0) || v != std::floor(v) || v >= static_cast<double>(limit)) {
        throw ConfigError("config field '" + field + "' = " + io::format_double(v) + " must be an integer in [0, " +
                          std::to_string(limit - 1) + "]");
    }
    return static_cast<std::size_t>(v);
}

/// Exclusive upper bound: an integer in [1, limit].
std::size_t as_end(double v, std::size_t limit, const std::string& field) {
    if (!(v >= 1.0) || v != std::floor(v) || v > static_cast<double>(limit)) {
        throw ConfigError("config field '" + field + "' = " + io::format_double(v) + " must be an integer in [1, " +
                          std::to_string(limit) + "]");
    }
    return static_cast<std::size_t>(v);
}

std::pair<double, double> value_range(std::initializer_list<const Tensor*> images) {
    double lo = INFINITY, hi = -INFINITY;
    for (const Tensor* t : images) {
        for (double v : t->data()) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (!(hi > lo)) hi = lo + 1.0;
    return {lo, hi};
}

// ---------------------------------------------------------------------------
// Infrared scenes

forward::IRParams read_ir_params(const Section& s) {
    forward::IRParams p;
    p.e = s.real("e", 0.9, Range::open_closed(0.0, 1.0));
    p.Tu = s.real("Tu", 290.0, Range::positive());
    p.k = s.real("k", 0.01, Range::non_negative());
    p.d = s.real("d", 5.0, Range::non_negative());
    p.Ta = s.real("Ta", 288.0, Range::positive());
    p.n = s.real("n", 4.0, Range::positive());
    return p;
}

forward::PSF read_psf(const Section& s, std::size_t rows, std::size_t cols) {
    const std::size_t size = s.count("size", 7, 1, 255);
    if (size % 2 == 0) throw ConfigError("config field 'psf.size' = " + std::to_string(size) + " must be odd");
    if (size > rows || size > cols) {
        throw ConfigError("config field 'psf.size' = " + std::to_string(size) + " exceeds the image extent " +
                          std::to_string(rows) + "x" + std::to_string(cols));
    }
    return forward::gaussian_psf(size, s.real("sigma", 1.5, Range::positive()));
}

/// Temperature map from [scene]: an optional PGM base image, a uniform background,
/// then rectangles [r0, c0, r1, c1, T] (half-open) and discs [r, c, radius, T].
Tensor read_scene(const ExperimentConfig& cfg, const Section& s) {
    Tensor f;
    if (s.has("image")) {
        const auto path = input_path(cfg, s.text("image"), "scene.image");
        const double lo = s.real("t_lo", 280.0, Range::positive());
        const double hi = s.real("t_hi", 320.0, Range::positive());
        if (!(hi > lo)) throw ConfigError("config field 'scene.t_hi' must exceed 'scene.t_lo'");
        f = io::dequantize(io::read_pgm(path), lo, hi);
    } else {
        const std::size_t rows = s.count("rows", 64, 1, 4096);
        const std::size_t cols = s.count("cols", 64, 1, 4096);
        f = Tensor::filled({rows, cols}, s.real("background", 295.0, Range::positive()));
    }
    const std::size_t rows = f.rows(), cols = f.cols();
    const auto rects = s.rows("rectangles", {{16, 12, 28, 30, 340}, {38, 34, 54, 56, 320}}, 5);
    for (std::size_t i = 0; i < rects.size(); ++i) {
        const std::string field = "scene.rectangles[" + std::to_string(i) + "]";
        const auto& r = rects[i];
        const std::size_t r0 = as_index(r[0], rows, field), c0 = as_index(r[1], cols, field);
        const std::size_t r1 = as_end(r[2], rows, field), c1 = as_end(r[3], cols, field);
        if (r1 <= r0 || c1 <= c0) throw ConfigError("config field '" + field + "' is an empty rectangle");
        if (!(r[4] > 0.0)) throw ConfigError("config field '" + field + "' temperature must be > 0");
        for (std::size_t y = r0; y < r1; ++y)
            for (std::size_t x = c0; x < c1; ++x) f(y, x) = r[4];
    }
    const auto discs = s.rows("discs", {{18, 46, 6, 360}}, 4);
    for (std::size_t i = 0; i < discs.size(); ++i) {
        const std::string field = "scene.discs[" + std::to_string(i) + "]";
        const auto& d = discs[i];
        if (!(d[2] > 0.0)) throw ConfigError("config field '" + field + "' radius must be > 0");
        if (!(d[3] > 0.0)) throw ConfigError("config field '" + field + "' temperature must be > 0");
        for (std::size_t y = 0; y < rows; ++y) {
            for (std::size_t x = 0; x < cols; ++x) {
                const double dy = static_cast<double>(y) - d[0], dx = static_cast<double>(x) - d[1];
                if (dy * dy + dx * dx <= d[2] * d[2]) f(y, x) = d[3];
            }
        }
    }
    return f;
}

struct IrSetup {
    Tensor f;
    forward::IRParams ir;
    forward::PSF psf;
    double noise_sd = 0.0;
};

IrSetup read_ir_setup(const ExperimentConfig& cfg) {
    const Section root = cfg.doc->root();
    IrSetup s;
    s.f = read_scene(cfg, root.section("scene"));
    s.ir = read_ir_params(root.section("ir"));
    s.psf = read_psf(root.section("psf"), s.f.rows(), s.f.cols());
    s.noise_sd = root.section("noise").real("sd", 0.5, Range::non_negative());
    return s;
}

void add_stats(Metrics& m, const std::string& name, const Tensor& t) {
    double lo = INFINITY, hi = -INFINITY, sum = 0.0;
    for (double v : t.data()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        sum += v;
    }
    m.add(name + "_min", lo).add(name + "_max", hi).add(name + "_mean", sum / static_cast<double>(t.size()));
}

class IrSimulate : public Experiment {
public:
    explicit IrSimulate(const ExperimentConfig& cfg)
        : s_(read_ir_setup(cfg)), img_(read_image_options(cfg.doc->root())), seed_(cfg.seed) {}

    void run(Output& out) const override {
        const Tensor phi = forward::ir_phi(s_.f, s_.ir);
        const Tensor g = forward::ir_forward(s_.f, s_.ir, s_.psf, s_.noise_sd, seed_);
        const auto [lo, hi] = value_range({&s_.f, &phi, &g});
        out.image("f.pgm", io::quantize(s_.f, lo, hi, img_.maxval));
        out.image("phi.pgm", io::quantize(phi, lo, hi, img_.maxval));
        out.image("g.pgm", io::quantize(g, lo, hi, img_.maxval));
        out.matrix("f.csv", s_.f);
        out.matrix("phi.csv", phi);
        out.matrix("g.csv", g);
        out.matrix("psf.csv", s_.psf.kernel);
        Metrics m;
        add_stats(m, "f", s_.f);
        add_stats(m, "phi", phi);
        add_stats(m, "g", g);
        m.add("rmse_phi_f", root_mean_squared_error(phi, s_.f));
        m.add("rmse_g_phi", root_mean_squared_error(g, phi));
        m.add("display_lo", lo).add("display_hi", hi);
        out.text("metrics.csv", m.csv());
    }

private:
    IrSetup s_;
    ImageOptions img_;
    std::uint64_t seed_;
};

/// Deconvolves g by the MAP estimate under the PSF, then inverts phi pixelwise.
/// Data come from [input] g (a matrix CSV) or from simulating the scene.
class IrInvert : public Experiment {
public:
    explicit IrInvert(const ExperimentConfig& cfg) : img_(read_image_options(cfg.doc->root())), seed_(cfg.seed) {
        const Section root = cfg.doc->root();
        const Section input = root.section("input");
        if (input.has("g")) {
            g_ = io::decode_matrix_csv(io::read_text(input_path(cfg, input.text("g"), "input.g")));
            ir_ = read_ir_params(root.section("ir"));
            psf_ = read_psf(root.section("psf"), g_.rows(), g_.cols());
        } else {
            IrSetup s = read_ir_setup(cfg);
            truth_ = s.f;
            ir_ = s.ir;
            psf_ = s.psf;
            noise_sd_ = s.noise_sd;
        }
        lambda_ = root.section("invert").real("lambda", 1e-2, Range::non_negative());
    }

    void run(Output& out) const override {
        const Tensor g = truth_ ? forward::ir_forward(*truth_, ir_, psf_, noise_sd_, seed_) : g_;
        const LinearOp H = LinearOp::from_kernel(psf_.kernel, g.rows(), g.cols());
        const Tensor phi_hat = bayes::map_estimate(H, g, lambda_).reshaped(g.shape());
        const Tensor f_hat = forward::ir_phi_inverse(phi_hat, ir_);
        const auto [lo, hi] = truth_ ? value_range({&*truth_, &g, &f_hat}) : value_range({&g, &f_hat});
        out.image("g.pgm", io::quantize(g, lo, hi, img_.maxval));
        out.image("f_hat.pgm", io::quantize(f_hat, lo, hi, img_.maxval));
        out.matrix("g.csv", g);
        out.matrix("phi_hat.csv", phi_hat);
        out.matrix("f_hat.csv", f_hat);
        Metrics m;
        m.add("lambda", lambda_);
        add_stats(m, "f_hat", f_hat);
        if (truth_) {
            out.image("f.pgm", io::quantize(*truth_, lo, hi, img_.maxval));
            m.add("rmse_g_f", root_mean_squared_error(g, *truth_));
            m.add("rmse_f_hat_f", root_mean_squared_error(f_hat, *truth_));
            m.add("rmse_phi_hat_phi", root_mean_squared_error(phi_hat, forward::ir_phi(*truth_, ir_)));
        }
        m.add("display_lo", lo).add("display_hi", hi);
        out.text("metrics.csv", m.csv());
    }

private:
    std::optional<Tensor> truth_;
    Tensor g_;
    forward::IRParams ir_;
    forward::PSF psf_;
    double noise_sd_ = 0.0;
    double lambda_ = 0.0;
    ImageOptions img_;
    std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Acoustic scenes

struct SourceCell {
    std::size_t ix, iy;
    double intensity;
};

struct AcousticSetup {
    forward::ArrayGeometry geom;
    std::vector<SourceCell> sources;
    double duration = 0.0;
    double noise_sd = 0.0;
    double peak_fraction = 0.5;

    Tensor source_map() const {
        Tensor s({geom.grid.ny, geom.grid.nx});
        for (const auto& c : sources) s(c.iy, c.ix) += c.intensity;
        return s;
    }
};

AcousticSetup read_acoustic_setup(const ExperimentConfig& cfg) {
    const Section root = cfg.doc->root();
    AcousticSetup a;
    const Section arr = root.section("array");
    if (arr.choice("layout", "ring", {"ring", "spiral"}) == "ring") {
        const auto radii = arr.reals("radii", {0.15, 0.3, 0.45}, Range::positive());
        if (radii.empty()) throw ConfigError("config field 'array.radii' must not be empty");
        a.geom.mics = forward::ring_array(radii, arr.count("per_ring", 12, 1, 4096), arr.real("phase", 0.0));
    } else {
        a.geom.mics = forward::spiral_array(arr.count("count", 36, 2, 4096), arr.real("radius", 0.5, Range::positive()));
    }
    const Section grid = root.section("grid");
    a.geom.grid.nx = grid.count("nx", 21, 1, 1024);
    a.geom.grid.ny = grid.count("ny", 21, 1, 1024);
    a.geom.grid.dx = grid.real("dx", 0.05, Range::positive());
    a.geom.grid.dy = grid.real("dy", 0.05, Range::positive());
    a.geom.grid.cx = grid.real("cx", 0.0);
    a.geom.grid.cy = grid.real("cy", 0.0);
    const Section ac = root.section("acoustics");
    a.geom.standoff = ac.real("standoff", 1.0, Range::non_negative());
    a.geom.c = ac.real("c", 343.0, Range::positive());
    a.geom.sample_rate = ac.real("sample_rate", 48000.0, Range::positive());
    a.geom.omega = 2.0 * std::numbers::pi * ac.real("frequency", 4000.0, Range::positive());
    a.duration = ac.real("duration", 0.0, Range::non_negative());
    a.noise_sd = ac.real("noise_sd", 0.0, Range::non_negative());
    a.geom.validate();
    if (a.duration == 0.0) a.duration = a.geom.default_duration();
    const auto cells = root.section("sources").rows("cells", {{6, 10, 1.0}, {14, 10, 0.5}}, 3);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const std::string field = "sources.cells[" + std::to_string(i) + "]";
        if (!(cells[i][2] >= 0.0)) throw ConfigError("config field '" + field + "' intensity must be >= 0");
        a.sources.push_back({as_index(cells[i][0], a.geom.grid.nx, field), as_index(cells[i][1], a.geom.grid.ny, field),
                             cells[i][2]});
    }
    a.peak_fraction = root.section("peaks").real("fraction", 0.5, Range::open_closed(0.0, 1.0));
    return a;
}

struct Peak {
    std::size_t ix, iy;
    double value;
};

/// Strict 8-neighbour local maxima at or above fraction * global maximum, strongest first.
std::vector<Peak> find_peaks(const Tensor& b, double fraction) {
    double top = -INFINITY;
    for (double v : b.data()) top = std::max(top, v);
    std::vector<Peak> peaks;
    if (!(top > 0.0)) return peaks;
    const std::size_t ny = b.rows(), nx = b.cols();
    for (std::size_t y = 0; y < ny; ++y) {
        for (std::size_t x = 0; x < nx; ++x) {
            const double v = b(y, x);
            if (v < fraction * top) continue;
            bool is_max = true;
            for (int dy = -1; dy <= 1 && is_max; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dy == 0 && dx == 0) continue;
                    const auto yy = static_cast<std::ptrdiff_t>(y) + dy, xx = static_cast<std::ptrdiff_t>(x) + dx;
                    if (yy < 0 || xx < 0 || yy >= static_cast<std::ptrdiff_t>(ny) || xx >= static_cast<std::ptrdiff_t>(nx)) {
                        continue;
                    }
                    const double w = b(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
                    // ties resolve to the first cell in row-major order
                    if (w > v || (w == v && (yy < static_cast<std::ptrdiff_t>(y) ||
                                             (yy == static_cast<std::ptrdiff_t>(y) && xx < static_cast<std::ptrdiff_t>(x))))) {
                        is_max = false;
                        break;
                    }
                }
            }
            if (is_max) peaks.push_back({x, y, v});
        }
    }
    std::stable_sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) { return a.value > b.value; });
    return peaks;
}

std::string peaks_csv(const std::vector<Peak>& peaks) {
    io::CsvTable t({"ix", "iy", "value"});
    for (const auto& p : peaks) {
        t.row(std::vector<std::string>{std::to_string(p.ix), std::to_string(p.iy), io::format_double(p.value)});
    }
    return t.text();
}

/// Sources with positive intensity whose cell is a detected peak.
std::size_t localized(const std::vector<SourceCell>& sources, const std::vector<Peak>& peaks) {
    std::size_t n = 0;
    for (const auto& s : sources) {
        if (!(s.intensity > 0.0)) continue;
        for (const auto& p : peaks) {
            if (p.ix == s.ix && p.iy == s.iy) {
                ++n;
                break;
            }
        }
    }
    return n;
}

std::size_t active(const std::vector<SourceCell>& sources) {
    return static_cast<std::size_t>(std::count_if(sources.begin(), sources.end(), [](const auto& s) { return s.intensity > 0.0; }));
}

io::GrayImage map_image(const Tensor& b, unsigned maxval) {
    const auto [lo, hi] = value_range({&b});
    return io::quantize(b, std::min(lo, 0.0), hi, maxval);
}

Tensor beamform(const AcousticSetup& a, std::uint64_t seed) {
    const Tensor signals = forward::acoustic_synthesize(a.source_map(), a.geom, a.duration, seed, a.noise_sd);
    return forward::delay_and_sum(signals, a.geom);
}

Tensor mic_matrix(const forward::ArrayGeometry& g) {
    Tensor m({g.mics.size(), 2});
    for (std::size_t i = 0; i < g.mics.size(); ++i) {
        m(i, 0) = g.mics[i].x;
        m(i, 1) = g.mics[i].y;
    }
    return m;
}

class AcousticBf : public Experiment {
public:
    explicit AcousticBf(const ExperimentConfig& cfg)
        : a_(read_acoustic_setup(cfg)), img_(read_image_options(cfg.doc->root())), seed_(cfg.seed) {}

    void run(Output& out) const override {
        const Tensor b = beamform(a_, seed_);
        const auto peaks = find_peaks(b, a_.peak_fraction);
        out.matrix("mics.csv", mic_matrix(a_.geom));
        out.matrix("sources.csv", a_.source_map());
        out.matrix("beamform.csv", b);
        out.image("beamform.pgm", map_image(b, img_.maxval));
        out.text("peaks.csv", peaks_csv(peaks));
        Metrics m;
        m.add("sources", static_cast<double>(active(a_.sources)));
        m.add("localized", static_cast<double>(localized(a_.sources, peaks)));
        m.add("peaks", static_cast<double>(peaks.size()));
        m.add("peak_value", peaks.empty() ? 0.0 : peaks.front().value);
        m.add("duration", a_.duration);
        out.text("metrics.csv", m.csv());
    }

private:
    AcousticSetup a_;
    ImageOptions img_;
    std::uint64_t seed_;
};

/// Beam map deconvolved with the centre-cell beamformer PSF as a circular kernel.
class AcousticDeconv : public Experiment {
public:
    explicit AcousticDeconv(const ExperimentConfig& cfg)
        : a_(read_acoustic_setup(cfg)), img_(read_image_options(cfg.doc->root())), seed_(cfg.seed) {
        const Section d = cfg.doc->root().section("deconv");
        ista_ = d.choice("method", "ista", {"ista", "map"}) == "ista";
        lambda_ = d.real("lambda", ista_ ? 0.05 : 0.1, ista_ ? Range::non_negative() : Range::positive());
        if (ista_) {
            iterations_ = d.count("iterations", 500, 1, 1'000'000);
            tol_ = d.real("tol", 1e-8, Range::non_negative());
        }
    }

    void run(Output& out) const override {
        const Tensor b = beamform(a_, seed_);
        const std::size_t ny = a_.geom.grid.ny, nx = a_.geom.grid.nx;
        const Tensor psf = forward::beamformer_psf(a_.geom, nx / 2, ny / 2);
        const LinearOp H = LinearOp::from_kernel(psf, ny, nx);
        Tensor f;
        Metrics m;
        m.add("lambda", lambda_);
        if (ista_) {
            const auto cfg = unfolded::IstaConfig::create(H, lambda_, {}, iterations_, tol_);
            const auto r = unfolded::ista_solve(H, b, cfg);
            f = r.f.reshaped({ny, nx});
            m.add("iterations", static_cast<double>(r.iterations));
            m.add("converged", r.converged ? 1.0 : 0.0);
            m.add("objective", r.objective.back());
            m.add("step", cfg.alpha);
        } else {
            f = bayes::map_estimate(H, b, lambda_).reshaped({ny, nx});
        }
        const auto peaks_b = find_peaks(b, a_.peak_fraction);
        const auto peaks_f = find_peaks(f, a_.peak_fraction);
        out.matrix("sources.csv", a_.source_map());
        out.matrix("beamform.csv", b);
        out.image("beamform.pgm", map_image(b, img_.maxval));
        out.matrix("psf.csv", psf);
        out.image("psf.pgm", map_image(psf, img_.maxval));
        out.matrix("deconv.csv", f);
        out.image("deconv.pgm", map_image(f, img_.maxval));
        out.text("peaks.csv", peaks_csv(peaks_f));
        m.add("sources", static_cast<double>(active(a_.sources)));
        m.add("localized_beamform", static_cast<double>(localized(a_.sources, peaks_b)));
        m.add("localized_deconv", static_cast<double>(localized(a_.sources, peaks_f)));
        m.add("rmse_beamform", root_mean_squared_error(b, a_.source_map()));
        m.add("rmse_deconv", root_mean_squared_error(f, a_.source_map()));
        out.text("metrics.csv", m.csv());
    }

private:
    AcousticSetup a_;
    ImageOptions img_;
    std::uint64_t seed_;
    bool ista_ = true;
    double lambda_ = 0.0;
    std::size_t iterations_ = 0;
    double tol_ = 0.0;
};

}  // namespace

std::unique_ptr<Experiment> make_ir_simulate(const ExperimentConfig& cfg) { return std::make_unique<IrSimulate>(cfg); }
std::unique_ptr<Experiment> make_ir_invert(const ExperimentConfig& cfg) { return std::make_unique<IrInvert>(cfg); }
std::unique_ptr<Experiment> make_acoustic_bf(const ExperimentConfig& cfg) { return std::make_unique<AcousticBf>(cfg); }
std::unique_ptr<Experiment> make_acoustic_deconv(const ExperimentConfig& cfg) {
    return std::make_unique<AcousticDeconv>(cfg);
}

}  // namespace mbnn::harness::detail
