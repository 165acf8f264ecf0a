#pragma once

#include "mcf/map_field.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace mcf {

// Text snapshot: five header lines (manifold1, manifold2, shape, time, step)
// followed by one row per node in row-major order. Values are written in
// shortest round-trip form so a read returns bit-identical doubles.
void snapshot_write(const FlowState& state, std::ostream& out);
void snapshot_write_file(const FlowState& state, const std::filesystem::path& path);

FlowState snapshot_read(std::string_view text);
FlowState snapshot_read_file(const std::filesystem::path& path);

} // namespace mcf
