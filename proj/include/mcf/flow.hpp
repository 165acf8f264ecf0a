#pragma once

#include "mcf/diagnostics.hpp"
#include "mcf/map_field.hpp"

#include <functional>
#include <string>
#include <vector>

namespace mcf {

struct FlowConfig {
    ProductSpec product;
    std::vector<int> resolution;
    double cfl_safety = 0.25;
    double t_max = 1.0;
    double stop_A_norm = 1e-8;
    double stop_eta1 = 1e-4;
    // Initial data with min eta below this margin is refused.
    double min_eta = 1e-2;
    long max_steps = 0; // 0: unlimited
    bool polar_filter = true;
    int monitor_interval = 10;
    bool verify_flat = false;
    bool verify_sphere = false;
    // Verification checkpoints: every verify_every time units (0: none) plus
    // any explicit verify_times.
    double verify_every = 0.0;
    std::vector<double> verify_times;

    void validate() const;

    friend bool operator==(const FlowConfig&, const FlowConfig&) = default;
};

struct StepOptions {
    double cfl_safety = 0.25;
    bool polar_filter = true;
};

// df/dt of the nonparametric flow at every node, in the storage layout of the
// field (two chart components for torus targets, an ambient tangent vector for
// sphere targets). The graph moved with this velocity has normal velocity H.
std::vector<double> mcf_rhs(const FlowState& state, const ProductSpec& product);

// Largest explicit step times cfl_safety. With the polar filter the longitude
// spacing of each ring is replaced by the spacing of its highest kept mode.
double stable_dt(const FlowState& state, const ProductSpec& product, double cfl_safety, bool polar_filter = true);

// Low-pass each longitude ring of a sphere-domain tendency in place: ring
// modes above the one resolved at the equatorial spacing are removed.
void apply_polar_filter(const Grid& grid, std::vector<double>& tendency, int components);
int polar_filter_modes(const Grid& grid, std::size_t ring);

// One explicit midpoint step followed by chart normalization. Throws
// ValidationError when dt exceeds stable_dt for the given options.
FlowState advance(const FlowState& state, double dt, const ProductSpec& product, const StepOptions& options = {});

struct RunHooks {
    std::function<void(const TimeSeriesRow&)> on_row;
    std::function<void(const FlowState&)> on_step;
    std::function<void(const FlowState&, const VerifierReport&)> on_verify;
    // Called with the last good state before a breakdown is rethrown.
    std::function<void(const FlowState&)> on_breakdown;
};

struct RunResult {
    FlowState final_state;
    std::string stop_reason;
    std::vector<TimeSeriesRow> rows;
    std::vector<VerifierReport> verifications;
    long steps = 0;
};

inline constexpr const char* kStopANorm = "A-norm threshold";
inline constexpr const char* kStopEta1 = "eta1 threshold";
inline constexpr const char* kStopTime = "t_max reached";
inline constexpr const char* kStopSteps = "max steps reached";

RunResult run(const FlowConfig& config, const MapField& initial, const RunHooks& hooks = {});

} // namespace mcf
