#include <algorithm>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mbnn/errors.hpp"
#include "mbnn/harness.hpp"

namespace {

using mbnn::harness::Overrides;

enum Exit : int { ok = 0, failure = 1, usage = 2, config = 3, file = 4 };

struct Flags {
    std::string name;
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
};

CLI::App* add_group(CLI::App& app, const std::string& cmd, const std::string& help,
                    const std::vector<std::string>& names, Flags& f) {
    std::string list;
    for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
    CLI::App* sub = app.add_subcommand(cmd, help);
    sub->add_option("experiment", f.name, "one of: " + list)->check(CLI::IsMember(names));
    sub->add_option("--config", f.config, "TOML config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", f.seed, "seed, overrides the config file");
    sub->add_option("--out", f.out, "output directory, overrides the config file");
    return sub;
}

int run(const Flags& f, const std::vector<std::string>* group) {
    Overrides o;
    o.seed = f.seed;
    if (f.out) o.out = *f.out;
    if (!f.name.empty()) o.experiment = f.name;
    const auto cfg = !f.config.empty() ? mbnn::harness::load_config(f.config, o)
                                       : mbnn::harness::default_config(o.experiment ? *o.experiment : group->front(), o);
    if (group && std::find(group->begin(), group->end(), cfg.name) == group->end()) {
        throw mbnn::UsageError("experiment '" + cfg.name + "' does not belong to this subcommand");
    }
    const auto result = mbnn::harness::run_experiment(cfg);
    for (const auto& e : result.files) std::cout << e.sha256 << "  " << (cfg.out_dir / e.path).string() << "\n";
    std::cout << "manifest: " << result.manifest.string() << "\n";
    return Exit::ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Model-based neural network experiments"};
    app.require_subcommand(1);
    Flags f;

    struct Group {
        const char* cmd;
        const char* help;
        std::vector<std::string> names;
    };
    const std::vector<Group> groups = {
        {"simulate", "forward simulation experiments", {"ir-simulate", "acoustic-bf"}},
        {"invert", "inverse problem experiments", {"ir-invert", "acoustic-deconv"}},
        {"train", "learned network experiments", {"lista-vs-ista", "transform-denoise"}},
        {"pinn", "physics-informed network experiments", {"pinn-ode", "pinn-pde"}},
    };
    std::vector<std::pair<CLI::App*, const Group*>> subs;
    for (const auto& g : groups) subs.emplace_back(add_group(app, g.cmd, g.help, g.names, f), &g);

    CLI::App* run_cmd = app.add_subcommand("run", "run the experiment named in a config file");
    run_cmd->add_option("--config", f.config, "TOML config file")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--experiment", f.name, "experiment name, must agree with the file");
    run_cmd->add_option("--seed", f.seed, "seed, overrides the config file");
    run_cmd->add_option("--out", f.out, "output directory, overrides the config file");

    CLI::App* list_cmd = app.add_subcommand("list", "list experiment names");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? Exit::ok : Exit::usage;
    }

    try {
        if (list_cmd->parsed()) {
            for (const auto& n : mbnn::harness::experiment_names()) std::cout << n << "\n";
            return Exit::ok;
        }
        if (run_cmd->parsed()) return run(f, nullptr);
        for (const auto& [sub, g] : subs) {
            if (sub->parsed()) return run(f, &g->names);
        }
    } catch (const mbnn::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return Exit::usage;
    } catch (const mbnn::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return Exit::config;
    } catch (const mbnn::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return Exit::config;
    } catch (const mbnn::MigrationError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return Exit::config;
    } catch (const mbnn::FileError& e) {
        std::cerr << "file error: " << e.what() << "\n";
        return Exit::file;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return Exit::failure;
    }
    return Exit::failure;
}
