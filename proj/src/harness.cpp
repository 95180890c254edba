#include "mbnn/harness.hpp"

#include <algorithm>
#include <cmath>

#include "harness_internal.hpp"
#include "mbnn/errors.hpp"

namespace mbnn::harness {

namespace {

struct Entry {
    std::string name;
    detail::Factory factory;
};

const std::vector<Entry>& registry() {
    static const std::vector<Entry> r = {
        {"ir-simulate", detail::make_ir_simulate},         {"ir-invert", detail::make_ir_invert},
        {"acoustic-bf", detail::make_acoustic_bf},         {"acoustic-deconv", detail::make_acoustic_deconv},
        {"lista-vs-ista", detail::make_lista_vs_ista},     {"transform-denoise", detail::make_transform_denoise},
        {"pinn-ode", detail::make_pinn_ode},               {"pinn-pde", detail::make_pinn_pde},
    };
    return r;
}

detail::Factory factory_of(std::string_view name) {
    check_experiment_name(name);
    for (const auto& e : registry())
        if (e.name == name) return e.factory;
    return nullptr;
}

}  // namespace

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        for (const auto& e : registry()) n.push_back(e.name);
        return n;
    }();
    return names;
}

void check_experiment_name(std::string_view name) {
    for (const auto& n : experiment_names())
        if (n == name) return;
    std::string list;
    for (const auto& n : experiment_names()) list += (list.empty() ? "" : ", ") + n;
    throw UsageError("unknown experiment '" + std::string(name) + "'; valid names: " + list);
}

ExperimentConfig parse_config(std::string_view toml, const std::filesystem::path& base_dir, const Overrides& overrides) {
    auto doc = std::make_shared<config::Document>(config::Document::parse(toml));
    const config::Section root = doc->root();
    ExperimentConfig cfg;
    const std::string file_name = root.text("experiment", "");
    if (overrides.experiment) {
        if (!file_name.empty() && file_name != *overrides.experiment) {
            throw UsageError("config selects experiment '" + file_name + "' but '" + *overrides.experiment +
                             "' was requested");
        }
        cfg.name = *overrides.experiment;
    } else {
        if (file_name.empty()) throw ConfigError("config field 'experiment' is required");
        cfg.name = file_name;
    }
    check_experiment_name(cfg.name);
    if (overrides.seed) {
        cfg.seed = *overrides.seed;
        (void)root.seed("seed", 0);
    } else {
        if (!root.has("seed")) throw ConfigError("config field 'seed' is required");
        cfg.seed = root.seed("seed", 0);
    }
    const std::string out = root.text("out", "out/" + cfg.name);
    cfg.out_dir = overrides.out ? *overrides.out : std::filesystem::path(out);
    cfg.base_dir = base_dir;
    cfg.doc = std::move(doc);
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, const Overrides& overrides) {
    const std::string text = io::read_text(path);
    return parse_config(text, path.parent_path(), overrides);
}

ExperimentConfig default_config(std::string_view name, const Overrides& overrides) {
    check_experiment_name(name);
    Overrides o = overrides;
    o.experiment = std::string(name);
    return parse_config("seed = 0\n", ".", o);
}

void validate(const ExperimentConfig& cfg) {
    (void)factory_of(cfg.name)(cfg);
    cfg.doc->check_unused();
}

RunResult run_experiment(const ExperimentConfig& cfg) {
    const auto experiment = factory_of(cfg.name)(cfg);
    cfg.doc->check_unused();
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec) throw FileError("cannot create output directory " + cfg.out_dir.string() + ": " + ec.message());
    detail::Output out(cfg.out_dir);
    out.format = detail::read_image_options(cfg.doc->root()).format;
    experiment->run(out);
    RunResult r;
    r.files = out.finish();
    r.manifest = cfg.out_dir / "manifest.txt";
    return r;
}

// ---------------------------------------------------------------------------

namespace detail {

Output::Output(std::filesystem::path dir) : dir_(std::move(dir)) {}

void Output::text(const std::string& name, std::string_view content) {
    for (const auto& e : entries_)
        if (e.path == name) throw ContractError("artifact '" + name + "' written twice");
    io::write_text(dir_ / name, content);
    entries_.push_back({name, io::sha256_hex(content)});
}

void Output::matrix(const std::string& name, const Tensor& m) { text(name, io::encode_matrix_csv(m)); }

void Output::image(const std::string& name, const io::GrayImage& img) { text(name, io::encode_pgm(img, format)); }

void Output::state(const std::string& name, const State& s) { text(name, serialize(s)); }

std::vector<ManifestEntry> Output::finish() {
    std::vector<ManifestEntry> sorted = entries_;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
    std::string manifest;
    for (const auto& e : sorted) manifest += e.path + " " + e.sha256 + "\n";
    io::write_text(dir_ / "manifest.txt", manifest);
    return sorted;
}

ImageOptions read_image_options(const config::Section& root) {
    const config::Section s = root.section("output");
    ImageOptions o;
    const std::int64_t bits = s.integer("bits", 8, 8, 16);
    if (bits != 8 && bits != 16) throw ConfigError("config field 'output.bits' = " + std::to_string(bits) + " must be 8 or 16");
    o.maxval = bits == 8 ? 255 : 65535;
    o.format = s.choice("format", "binary", {"binary", "plain"}) == "plain" ? io::PgmFormat::plain : io::PgmFormat::binary;
    return o;
}

TrainConfig read_train(const config::Section& s, TrainConfig d, std::uint64_t seed) {
    TrainConfig c = d;
    c.optimizer = s.choice("optimizer", d.optimizer == Optimizer::adam ? "adam" : "sgd", {"adam", "sgd"}) == "adam"
                      ? Optimizer::adam
                      : Optimizer::sgd;
    c.learning_rate = s.real("learning_rate", d.learning_rate, config::Range::positive());
    c.steps = s.count("steps", d.steps, 0, 10'000'000);
    c.batch_size = s.count("batch_size", d.batch_size, 0);
    c.beta1 = s.real("beta1", d.beta1, {0.0, 1.0, false, true});
    c.beta2 = s.real("beta2", d.beta2, {0.0, 1.0, false, true});
    c.epsilon = s.real("epsilon", d.epsilon, config::Range::positive());
    c.seed = seed;
    return c;
}

std::filesystem::path input_path(const ExperimentConfig& cfg, const std::string& value, const std::string& field) {
    std::filesystem::path p(value);
    if (p.is_relative()) p = cfg.base_dir / p;
    if (!std::filesystem::is_regular_file(p)) {
        throw FileError("input file '" + p.string() + "' named by config field '" + field + "' does not exist");
    }
    return p;
}

Metrics& Metrics::add(const std::string& name, double value) {
    rows_.emplace_back(name, value);
    return *this;
}

std::string Metrics::csv() const {
    io::CsvTable t({"quantity", "value"});
    for (const auto& [k, v] : rows_) t.row(std::vector<std::string>{k, io::format_double(v)});
    return t.text();
}

Tensor as_row_matrix(const Tensor& t) { return t.reshaped({1, t.size()}); }

double mean_squared_error(const Tensor& a, const Tensor& b) {
    if (a.size() != b.size()) throw DimensionError("mean squared error needs equal sizes");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s / static_cast<double>(a.size());
}

double root_mean_squared_error(const Tensor& a, const Tensor& b) { return std::sqrt(mean_squared_error(a, b)); }

}  // namespace detail

}  // namespace mbnn::harness
