#pragma once

#include "mcf/flow.hpp"
#include "mcf/initial_maps.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mcf {

// Everything one CLI run needs. Serialized as sectioned key=value text with
// sections [manifold], [grid], [flow], [initial] and [output].
struct RunConfig {
    FlowConfig flow;
    InitialMapSpec initial;
    std::filesystem::path out_dir = "out";
    // Write a snapshot every this many steps; 0 writes only the final state.
    long snapshot_interval = 0;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Throws ConfigError listing every problem found, one per line.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const RunConfig& config);

// "N" or "N1,N2[,N3]". A single count on a sphere domain sets every colatitude
// axis to N and the longitude to 2N.
std::vector<int> parse_resolution(std::string_view text, const ManifoldSpec& domain);

// Decimal literal, optionally scaled by pi: "0.5", "2pi", "0.6*pi", "-pi".
std::optional<double> parse_scalar(std::string_view text);

} // namespace mcf
