#pragma once

#include "mcf/gauss.hpp"
#include "mcf/map_field.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mcf {

struct TimeSeriesRow {
    double time = 0.0;
    double min_eta = 0.0;
    double min_eta1 = 0.0;
    double max_product = 0.0;
    double max_A_norm_sq = 0.0;
    double energy_H = 0.0;
    double area = 0.0;
    std::optional<double> residual_44;
    std::optional<double> residual_49;

    friend bool operator==(const TimeSeriesRow&, const TimeSeriesRow&) = default;
};

// Everything the monitor and the verifiers need at one node.
struct NodeAnalysis {
    DifferentialData diff;
    SingularData sv;
    GaussFunctionals gf;
    SecondFormData sff;
    Eigen::Matrix3d g_inv = Eigen::Matrix3d::Zero(); // induced metric, chart components
    double sqrt_det_g = 0.0;
    double sqrt_det_g1 = 0.0;
};

struct FieldAnalysis {
    std::vector<NodeAnalysis> nodes;
    // Node attaining min eta (first in row-major order on ties).
    std::size_t argmin_eta = 0;
};

FieldAnalysis analyze(const MapField& field, const ProductSpec& product);

// (1/sqrt g) d_i (sqrt g g^{ij} d_j u) on the graph, in flux form.
std::vector<double> laplace_beltrami(std::span<const double> u, const MapField& field, const ProductSpec& product);
std::vector<double> laplace_beltrami(std::span<const double> u, const MapField& field, const FieldAnalysis& analysis);

TimeSeriesRow monitor(const FlowState& state, const ProductSpec& product);
TimeSeriesRow monitor(const FlowState& state, const FieldAnalysis& analysis);

struct VerifierReport {
    std::vector<double> residuals; // flat: LHS - RHS; sphere: inequality slack
    std::vector<int> det_sign;
    double max_abs_residual = 0.0;
    double min_slack = 0.0;
    // Largest c >= 0 with LHS - Delta eta1 >= c eta1 (1 - eta1^2) at every node.
    double fitted_c = 0.0;
    double spacing = 0.0; // largest chart spacing of the grid
    double dt = 0.0;
    std::optional<double> order;
};

// d/dt along the normal flow, from three equally spaced states: central time
// difference at fixed chart points minus the advection by the tangential part
// of the coordinate velocity (0, df/dt).
std::vector<double> normal_time_derivative(const FlowState& s0, const FlowState& s1, const FlowState& s2,
                                           const FieldAnalysis& middle, std::span<const double> eta1_0,
                                           std::span<const double> eta1_2);

VerifierReport verify_evolution_flat(std::span<const FlowState> states, const ProductSpec& product);
VerifierReport verify_inequality_sphere(std::span<const FlowState> states, const ProductSpec& product);

// Convergence order of max_abs_residual between successive reports, each
// refining the spacing. Needs at least two reports.
std::optional<double> measured_order(std::span<const VerifierReport> reports);

// C (h^2 + dt), with C frozen from the flat affine calibration.
inline constexpr double kResidualConstant = 2.0;
double residual_tolerance(double spacing, double dt);

inline constexpr const char* kTimeSeriesHeader =
    "time,min_eta,min_eta1,max_product,max_A_norm_sq,energy_H,area,residual_44,residual_49";

void emit_timeseries(std::span<const TimeSeriesRow> rows, std::ostream& out);
void emit_timeseries(std::span<const TimeSeriesRow> rows, const std::filesystem::path& path);
std::string format_row(const TimeSeriesRow& row);
std::vector<TimeSeriesRow> read_timeseries(std::string_view text);

// Largest violation of "value nondecreasing up to drift * (t - s)" over all
// pairs of rows s < t; zero when the series complies.
double monotone_violation(std::span<const TimeSeriesRow> rows, const std::function<double(const TimeSeriesRow&)>& value,
                          double drift_per_time);

// min over consecutive rows of (dm/dt) / (m (1 - m^2)) for m = min_eta1,
// skipping rows with 1 - m^2 below `floor`. nullopt when no pair qualifies.
std::optional<double> fit_reaction_constant(std::span<const TimeSeriesRow> rows, double floor = 1e-5);

} // namespace mcf
