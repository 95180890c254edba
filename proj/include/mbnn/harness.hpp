#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mbnn/config.hpp"

namespace mbnn::harness {

/// Registered experiment names in registry order.
const std::vector<std::string>& experiment_names();
/// Throws UsageError listing the valid names.
void check_experiment_name(std::string_view name);

/// Command-line values that take precedence over the config file.
struct Overrides {
    std::optional<std::string> experiment;
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out;
};

/// Top-level config fields plus the module sections.
///   experiment = "<name>"   seed = <n >= 0>   out = "<dir>" (default out/<name>)
/// Relative input paths inside sections resolve against base_dir.
struct ExperimentConfig {
    std::string name;
    std::uint64_t seed = 0;
    std::filesystem::path out_dir;
    std::filesystem::path base_dir;
    std::shared_ptr<const config::Document> doc;
};

/// Throws ParseError, UsageError (unknown experiment) or ConfigError (missing seed).
ExperimentConfig parse_config(std::string_view toml, const std::filesystem::path& base_dir,
                              const Overrides& overrides = {});
/// Reads `path` (FileError when unreadable); base_dir is its directory.
ExperimentConfig load_config(const std::filesystem::path& path, const Overrides& overrides = {});
/// Built-in configuration of an experiment: every field at its default, seed 0.
ExperimentConfig default_config(std::string_view name, const Overrides& overrides = {});

/// Reads and range-checks every field the experiment uses, rejects unknown
/// fields and checks referenced input files exist. Throws ConfigError or FileError.
void validate(const ExperimentConfig& cfg);

struct ManifestEntry {
    std::string path;    ///< relative to the output directory
    std::string sha256;
};

struct RunResult {
    std::vector<ManifestEntry> files;  ///< sorted by path
    std::filesystem::path manifest;    ///< <out>/manifest.txt
};

/// Validates, creates the output directory, writes every artifact and
/// manifest.txt ("<path> <sha256>" per line, sorted by path).
RunResult run_experiment(const ExperimentConfig& cfg);

}  // namespace mbnn::harness
