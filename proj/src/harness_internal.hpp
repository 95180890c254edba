#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "mbnn/config.hpp"
#include "mbnn/harness.hpp"
#include "mbnn/io.hpp"
#include "mbnn/serialize.hpp"
#include "mbnn/tensor.hpp"
#include "mbnn/train.hpp"

namespace mbnn::harness::detail {

/// Writes artifacts into one directory and records their digests.
class Output {
public:
    explicit Output(std::filesystem::path dir);

    void text(const std::string& name, std::string_view content);
    void matrix(const std::string& name, const Tensor& m);
    void image(const std::string& name, const io::GrayImage& img);
    void state(const std::string& name, const State& s);

    /// Writes manifest.txt and returns the sorted entries.
    std::vector<ManifestEntry> finish();

    io::PgmFormat format = io::PgmFormat::binary;

private:
    std::filesystem::path dir_;
    std::vector<ManifestEntry> entries_;
};

/// An experiment reads and validates its settings on construction.
class Experiment {
public:
    virtual ~Experiment() = default;
    virtual void run(Output& out) const = 0;
};

using Factory = std::unique_ptr<Experiment> (*)(const ExperimentConfig&);

std::unique_ptr<Experiment> make_ir_simulate(const ExperimentConfig& cfg);
std::unique_ptr<Experiment> make_ir_invert(const ExperimentConfig& cfg);
std::unique_ptr<Experiment> make_acoustic_bf(const ExperimentConfig& cfg);
std::unique_ptr<Experiment> make_acoustic_deconv(const ExperimentConfig& cfg);
std::unique_ptr<Experiment> make_lista_vs_ista(const ExperimentConfig& cfg);
std::unique_ptr<Experiment> make_transform_denoise(const ExperimentConfig& cfg);
std::unique_ptr<Experiment> make_pinn_ode(const ExperimentConfig& cfg);
std::unique_ptr<Experiment> make_pinn_pde(const ExperimentConfig& cfg);

/// [output] bits = 8 | 16, format = "binary" | "plain".
struct ImageOptions {
    unsigned maxval = 255;
    io::PgmFormat format = io::PgmFormat::binary;
};
ImageOptions read_image_options(const config::Section& root);

/// [train] section on top of the given defaults; the seed comes from the config.
TrainConfig read_train(const config::Section& section, TrainConfig defaults, std::uint64_t seed);

/// Resolves a path field against the config directory; FileError when missing.
std::filesystem::path input_path(const ExperimentConfig& cfg, const std::string& value, const std::string& field);

/// "quantity,value" table.
class Metrics {
public:
    Metrics& add(const std::string& name, double value);
    std::string csv() const;

private:
    std::vector<std::pair<std::string, double>> rows_;
};

/// Row-vector (1 x n) tensor view of a flat tensor for CSV output.
Tensor as_row_matrix(const Tensor& t);
double mean_squared_error(const Tensor& a, const Tensor& b);
double root_mean_squared_error(const Tensor& a, const Tensor& b);

}  // namespace mbnn::harness::detail
