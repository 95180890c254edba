#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mbnn/netspec.hpp"
#include "mbnn/params.hpp"
#include "mbnn/unfolded.hpp"

namespace mbnn {

inline constexpr int kStateVersion = 1;

/// Named nets, unfolded nets and parameter sets saved together.
///
/// Text layout (one record per line, tokens separated by single spaces):
///   mbnn-state 1
///   net <name> input=<n> secondary=<i|none> layers=<count>
///   layer <key>=<value> ...            (count lines)
///   unfolded <name> layers=<K> tied=<0|1> n=<n> m=<m>
///   params <name> entries=<count>
///   tensor <name> trainable=<0|1> shape=<d0>x<d1>...
///   <values>                           (shortest round-trip decimal)
///   end
/// Names must be non-empty and free of whitespace and '='.
struct State {
    std::vector<std::pair<std::string, NetSpec>> nets;
    std::vector<std::pair<std::string, unfolded::UnfoldedNet>> unfolded;
    std::vector<std::pair<std::string, ParamSet>> params;

    const NetSpec& net(std::string_view name) const;
    const unfolded::UnfoldedNet& unfolded_net(std::string_view name) const;
    const ParamSet& param_set(std::string_view name) const;
};

std::string serialize(const State& state);
/// Throws ParseError (with byte offset) on malformed input and MigrationError
/// on a different format version. Nothing is returned on failure.
State deserialize(std::string_view text);

/// Writes through a temporary file and a rename. Throws FileError.
void save_state(const std::filesystem::path& path, const State& state);
State load_state(const std::filesystem::path& path);

}  // namespace mbnn
