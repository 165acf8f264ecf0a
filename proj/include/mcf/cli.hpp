#pragma once

#include <iosfwd>

namespace mcf {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRefused = 2;
inline constexpr int kExitBreakdown = 3;

// Full command-line run: parse flags, load the config, flow, write outputs.
// Progress goes to `out`, errors (prefixed with the raising module) to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace mcf
