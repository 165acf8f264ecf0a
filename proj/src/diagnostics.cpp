#include "mcf/diagnostics.hpp"

#include "mcf/error.hpp"
#include "mcf/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>

namespace mcf {

namespace {

const char* kModule = "diagnostics";

using Block = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDomainDim, kMaxDomainDim>;

// sqrt(det g1) on the face between `node` and its neighbour along `axis`
// (side +1 or -1). Pole faces carry zero weight.
double face_weight(const Grid& grid, std::size_t node, int axis, int side) {
    const auto& spec = grid.spec();
    if (spec.is_torus()) {
        return 1.0;
    }
    const auto index = grid.unravel(node);
    const int n = grid.dim();
    if (grid.topology()[axis] == AxisTopology::Colatitude) {
        const int face = side > 0 ? index[axis] + 1 : index[axis];
        if (face == 0 || face == grid.shape()[axis]) {
            return 0.0;
        }
    }
    auto x = grid.coordinates(node);
    x[axis] += 0.5 * side * grid.spacing()[axis];
    return volume_factor(spec, std::span<const double>(x.data(), n));
}

// Mean of sqrt(det g1) over the chart cell of `node` divided by its nodal
// value. Dividing the flux balance by the cell mean keeps the pole rows second
// order.
double cell_measure_ratio(const Grid& grid, std::size_t node) {
    if (grid.spec().is_torus()) {
        return 1.0;
    }
    const int n = grid.dim();
    const auto x = grid.coordinates(node);
    double ratio = 1.0;
    for (int m = 0; m < n - 1; ++m) {
        const double h = grid.spacing()[m];
        const double a = x[m] - 0.5 * h;
        const double b = x[m] + 0.5 * h;
        const double s = std::sin(x[m]);
        if (n - 1 - m == 1) {
            ratio *= (std::cos(a) - std::cos(b)) / h / s;
        } else {
            ratio *= (0.5 - (std::sin(2.0 * b) - std::sin(2.0 * a)) / (4.0 * h)) / (s * s);
        }
    }
    return ratio;
}

void require_same_run(std::span<const FlowState> states) {
    if (states.size() != 3) {
        throw ValidationError(kModule, "verification needs exactly three consecutive states");
    }
    for (int k = 1; k < 3; ++k) {
        if (!(*states[k].field.grid == *states[0].field.grid) || !(states[k].field.target == states[0].field.target)) {
            throw ValidationError(kModule, "verification states live on different grids");
        }
    }
    const double d1 = states[1].time - states[0].time;
    const double d2 = states[2].time - states[1].time;
    if (!(d1 > 0.0) || !(d2 > 0.0)) {
        throw ValidationError(kModule, "verification states must have increasing times");
    }
    if (std::abs(d1 - d2) > 1e-9 * std::max(d1, d2)) {
        throw ValidationError(kModule, "verification states are not equally spaced in time (" + format_double(d1) +
                                           " vs " + format_double(d2) + ")");
    }
}

std::vector<double> eta1_values(const FieldAnalysis& a) {
    std::vector<double> out(a.nodes.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a.nodes[i].gf.eta1;
    }
    return out;
}

double max_spacing(const Grid& grid) {
    return *std::max_element(grid.spacing().begin(), grid.spacing().end());
}

struct Sides {
    FieldAnalysis middle;
    std::vector<double> lhs;
    std::vector<double> laplacian;
    std::vector<double> eta1;
};

Sides evaluate_sides(std::span<const FlowState> states, const ProductSpec& product) {
    require_same_run(states);
    if (!(states[0].field.grid->spec() == product.sigma1) || !(states[0].field.target == product.sigma2)) {
        throw ValidationError(kModule, "states do not match the product specification");
    }
    Sides s;
    const auto a0 = analyze(states[0].field, product);
    const auto a2 = analyze(states[2].field, product);
    s.middle = analyze(states[1].field, product);
    s.eta1 = eta1_values(s.middle);
    s.lhs = normal_time_derivative(states[0], states[1], states[2], s.middle, eta1_values(a0), eta1_values(a2));
    s.laplacian = laplace_beltrami(s.eta1, states[1].field, s.middle);
    return s;
}

} // namespace

FieldAnalysis analyze(const MapField& field, const ProductSpec& product) {
    const Grid& grid = *field.grid;
    const int n = grid.dim();
    FieldAnalysis out;
    out.nodes.resize(grid.size());
    double min_eta = std::numeric_limits<double>::infinity();
    for (std::size_t node = 0; node < grid.size(); ++node) {
        auto& a = out.nodes[node];
        const auto x = grid.coordinates(node);
        const auto g1 = geometry_at(product.sigma1, std::span<const double>(x.data(), n));
        a.diff = differential_at(field, node);
        const auto frame = adapted_frame(a.diff, g1);
        a.sv = frame.sv;
        a.gf = gauss_functionals(a.sv);
        a.sff = second_fundamental_form(a.diff, g1, frame);
        const Eigen::Matrix3d g = induced_metric(a.diff, g1);
        const Block gb = g.topLeftCorner(n, n);
        Eigen::LLT<Block> llt(gb);
        if (llt.info() != Eigen::Success) {
            throw NumericError(kModule, "induced metric is not positive definite at node " + std::to_string(node));
        }
        a.g_inv.topLeftCorner(n, n) = llt.solve(Block::Identity(n, n));
        const double det = gb.determinant();
        a.sqrt_det_g = std::sqrt(det);
        a.sqrt_det_g1 = g1.sqrt_det;
        if (a.gf.eta < min_eta) {
            min_eta = a.gf.eta;
            out.argmin_eta = node;
        }
    }
    return out;
}

std::vector<double> laplace_beltrami(std::span<const double> u, const MapField& field, const ProductSpec& product) {
    return laplace_beltrami(u, field, analyze(field, product));
}

std::vector<double> laplace_beltrami(std::span<const double> u, const MapField& field, const FieldAnalysis& analysis) {
    const Grid& grid = *field.grid;
    const int n = grid.dim();
    const auto& h = grid.spacing();
    if (u.size() != grid.size() || analysis.nodes.size() != grid.size()) {
        throw ValidationError(kModule, "scalar field does not match the grid");
    }

    // K = sqrt(det g / det g1) g^{ij}, smooth across the chart poles.
    std::vector<Eigen::Matrix3d> K(grid.size());
    std::vector<Eigen::Vector3d> du(grid.size(), Eigen::Vector3d::Zero());
    for (std::size_t node = 0; node < grid.size(); ++node) {
        const auto& a = analysis.nodes[node];
        K[node] = a.g_inv * (a.sqrt_det_g / a.sqrt_det_g1);
        for (int j = 0; j < n; ++j) {
            du[node][j] = (u[grid.plus(node, j)] - u[grid.minus(node, j)]) / (2.0 * h[j]);
        }
    }

    std::vector<double> out(grid.size(), 0.0);
    for (std::size_t node = 0; node < grid.size(); ++node) {
        double div = 0.0;
        for (int i = 0; i < n; ++i) {
            double flux[2] = {0.0, 0.0};
            for (int side = 0; side < 2; ++side) {
                const int sign = side == 0 ? 1 : -1;
                const double w = face_weight(grid, node, i, sign);
                if (w == 0.0) {
                    continue;
                }
                const std::size_t other = sign > 0 ? grid.plus(node, i) : grid.minus(node, i);
                const Eigen::Vector3d k = 0.5 * (K[node].row(i) + K[other].row(i)).transpose();
                double f = k[i] * sign * (u[other] - u[node]) / h[i];
                for (int j = 0; j < n; ++j) {
                    if (j != i) {
                        f += k[j] * 0.5 * (du[node][j] + du[other][j]);
                    }
                }
                flux[side] = w * f;
            }
            div += (flux[0] - flux[1]) / h[i];
        }
        out[node] = div / (analysis.nodes[node].sqrt_det_g * cell_measure_ratio(grid, node));
    }
    return out;
}

TimeSeriesRow monitor(const FlowState& state, const ProductSpec& product) {
    if (!(state.field.grid->spec() == product.sigma1) || !(state.field.target == product.sigma2)) {
        throw ValidationError(kModule, "state does not match the product specification");
    }
    return monitor(state, analyze(state.field, product));
}

TimeSeriesRow monitor(const FlowState& state, const FieldAnalysis& analysis) {
    TimeSeriesRow row;
    row.time = state.time;
    row.min_eta = std::numeric_limits<double>::infinity();
    row.min_eta1 = std::numeric_limits<double>::infinity();
    const double cell = state.field.grid->cell_volume();
    for (const auto& a : analysis.nodes) {
        row.min_eta = std::min(row.min_eta, a.gf.eta);
        row.min_eta1 = std::min(row.min_eta1, a.gf.eta1);
        row.max_product = std::max(row.max_product, a.gf.product);
        row.max_A_norm_sq = std::max(row.max_A_norm_sq, a.sff.A_norm_sq);
        const double dmu = a.sqrt_det_g * cell;
        row.area += dmu;
        row.energy_H += a.sff.H.squaredNorm() * dmu;
    }
    return row;
}

std::vector<double> normal_time_derivative(const FlowState& s0, const FlowState& s1, const FlowState& s2,
                                           const FieldAnalysis& middle, std::span<const double> eta1_0,
                                           std::span<const double> eta1_2) {
    const MapField& f1 = s1.field;
    const Grid& grid = *f1.grid;
    const int n = grid.dim();
    const auto& h = grid.spacing();
    const double dt2 = s2.time - s0.time;
    const bool torus = f1.target.is_torus();
    std::vector<double> out(grid.size());
    for (std::size_t node = 0; node < grid.size(); ++node) {
        const auto& a = middle.nodes[node];
        const auto v0 = s0.field.at(node);
        const auto v2 = s2.field.at(node);
        Eigen::Vector2d fdot;
        if (torus) {
            for (int c = 0; c < 2; ++c) {
                fdot[c] = minimal_image(v2[c] - v0[c], f1.target.periods[c]) / dt2;
            }
        } else {
            const Eigen::Vector3d amb(v2[0] - v0[0], v2[1] - v0[1], v2[2] - v0[2]);
            fdot = a.diff.target_basis.transpose() * amb / dt2;
        }
        Eigen::Vector3d p = Eigen::Vector3d::Zero();
        for (int l = 0; l < n; ++l) {
            p[l] = fdot.dot(a.diff.df.col(l));
        }
        const Eigen::Vector3d w = a.g_inv * p;
        double advection = 0.0;
        for (int k = 0; k < n; ++k) {
            const double grad = (middle.nodes[grid.plus(node, k)].gf.eta1 -
                                 middle.nodes[grid.minus(node, k)].gf.eta1) /
                                (2.0 * h[k]);
            advection += w[k] * grad;
        }
        out[node] = (eta1_2[node] - eta1_0[node]) / dt2 - advection;
    }
    return out;
}

VerifierReport verify_evolution_flat(std::span<const FlowState> states, const ProductSpec& product) {
    if (!product.flat()) {
        throw ValidationError(kModule, "the parallel-form identity needs flat factors (k1 = k2 = 0)");
    }
    const auto s = evaluate_sides(states, product);
    VerifierReport r;
    const std::size_t count = s.lhs.size();
    r.residuals.resize(count);
    r.det_sign.resize(count);
    r.min_slack = std::numeric_limits<double>::infinity();
    for (std::size_t node = 0; node < count; ++node) {
        const auto& a = s.middle.nodes[node];
        const double reaction =
            a.sff.A_norm_sq - 2.0 * a.sv.det_sign * a.sv.product() * second_form_cross(a.sff);
        const double rhs = s.laplacian[node] + a.gf.eta1 * reaction;
        r.residuals[node] = s.lhs[node] - rhs;
        r.det_sign[node] = a.sv.det_sign;
        r.max_abs_residual = std::max(r.max_abs_residual, std::abs(r.residuals[node]));
        r.min_slack = std::min(r.min_slack, r.residuals[node]);
    }
    r.spacing = max_spacing(*states[1].field.grid);
    r.dt = states[2].time - states[1].time;
    return r;
}

VerifierReport verify_inequality_sphere(std::span<const FlowState> states, const ProductSpec& product) {
    if (!product.sigma1.is_sphere()) {
        throw ValidationError(kModule, "the curvature inequality needs a round sphere domain");
    }
    product.validate();
    const auto s = evaluate_sides(states, product);
    VerifierReport r;
    const std::size_t count = s.lhs.size();
    const int n = product.n();
    r.residuals.resize(count);
    r.det_sign.resize(count);
    r.min_slack = std::numeric_limits<double>::infinity();
    double c = std::numeric_limits<double>::infinity();
    for (std::size_t node = 0; node < count; ++node) {
        const auto& a = s.middle.nodes[node];
        const auto terms = curvature_term_closed(a.sv, product.k1(), product.k2(), n);
        const double eta1 = a.gf.eta1;
        const double excess = s.lhs[node] - s.laplacian[node];
        r.residuals[node] = excess - eta1 * terms.eta1_reaction;
        r.det_sign[node] = a.sv.det_sign;
        r.min_slack = std::min(r.min_slack, r.residuals[node]);
        r.max_abs_residual = std::max(r.max_abs_residual, std::abs(r.residuals[node]));
        const double gap = 1.0 - eta1 * eta1;
        if (gap >= 1e-6) {
            c = std::min(c, excess / (eta1 * gap));
        }
    }
    r.fitted_c = std::isfinite(c) ? std::max(0.0, c) : 0.0;
    r.spacing = max_spacing(*states[1].field.grid);
    r.dt = states[2].time - states[1].time;
    return r;
}

std::optional<double> measured_order(std::span<const VerifierReport> reports) {
    if (reports.size() < 2) {
        return std::nullopt;
    }
    double order = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < reports.size(); ++k) {
        const auto& coarse = reports[k - 1];
        const auto& fine = reports[k];
        if (!(coarse.spacing > fine.spacing)) {
            throw ValidationError(kModule, "reports must be ordered from coarse to fine");
        }
        order = std::min(order, std::log(coarse.max_abs_residual / fine.max_abs_residual) /
                                    std::log(coarse.spacing / fine.spacing));
    }
    return order;
}

double residual_tolerance(double spacing, double dt) {
    return kResidualConstant * (spacing * spacing + dt);
}

std::string format_row(const TimeSeriesRow& row) {
    std::string out;
    for (double v : {row.time, row.min_eta, row.min_eta1, row.max_product, row.max_A_norm_sq, row.energy_H, row.area}) {
        out += format_double(v);
        out += ',';
    }
    if (row.residual_44) {
        out += format_double(*row.residual_44);
    }
    out += ',';
    if (row.residual_49) {
        out += format_double(*row.residual_49);
    }
    return out;
}

void emit_timeseries(std::span<const TimeSeriesRow> rows, std::ostream& out) {
    out << kTimeSeriesHeader << '\n';
    for (const auto& row : rows) {
        out << format_row(row) << '\n';
    }
}

void emit_timeseries(std::span<const TimeSeriesRow> rows, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError(kModule, "cannot open time series for writing: " + path.string());
    }
    emit_timeseries(rows, out);
    out.flush();
    if (!out) {
        throw IoError(kModule, "failed writing time series: " + path.string());
    }
}

std::vector<TimeSeriesRow> read_timeseries(std::string_view text) {
    std::vector<TimeSeriesRow> rows;
    std::size_t pos = 0;
    bool header = true;
    while (pos < text.size()) {
        const auto end = text.find('\n', pos);
        const auto stop = end == std::string_view::npos ? text.size() : end;
        std::string_view line = text.substr(pos, stop - pos);
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        const std::size_t line_start = pos;
        pos = end == std::string_view::npos ? text.size() : end + 1;
        if (header) {
            if (line != kTimeSeriesHeader) {
                throw FormatError(kModule, "unexpected time series header", line_start);
            }
            header = false;
            continue;
        }
        if (line.empty()) {
            continue;
        }
        std::vector<std::string_view> cells;
        std::size_t cell_pos = 0;
        while (true) {
            const auto comma = line.find(',', cell_pos);
            cells.push_back(line.substr(cell_pos, comma == std::string_view::npos ? std::string_view::npos : comma - cell_pos));
            if (comma == std::string_view::npos) {
                break;
            }
            cell_pos = comma + 1;
        }
        if (cells.size() != 9) {
            throw FormatError(kModule, "time series row needs 9 cells, found " + std::to_string(cells.size()), line_start);
        }
        double values[7];
        std::size_t offset = line_start;
        for (int k = 0; k < 7; ++k) {
            const auto v = parse_double(cells[k]);
            if (!v) {
                throw FormatError(kModule, "bad number '" + std::string(cells[k]) + "'", offset);
            }
            values[k] = *v;
            offset += cells[k].size() + 1;
        }
        TimeSeriesRow row{values[0], values[1], values[2], values[3], values[4], values[5], values[6], {}, {}};
        for (int k = 7; k < 9; ++k) {
            if (!cells[k].empty()) {
                const auto v = parse_double(cells[k]);
                if (!v) {
                    throw FormatError(kModule, "bad number '" + std::string(cells[k]) + "'", offset);
                }
                (k == 7 ? row.residual_44 : row.residual_49) = *v;
            }
            offset += cells[k].size() + 1;
        }
        rows.push_back(row);
    }
    if (header) {
        throw FormatError(kModule, "time series is empty", 0);
    }
    return rows;
}

double monotone_violation(std::span<const TimeSeriesRow> rows, const std::function<double(const TimeSeriesRow&)>& value,
                          double drift_per_time) {
    double worst = 0.0;
    for (std::size_t s = 0; s < rows.size(); ++s) {
        const double vs = value(rows[s]);
        for (std::size_t t = s + 1; t < rows.size(); ++t) {
            const double allowed = vs - drift_per_time * (rows[t].time - rows[s].time);
            worst = std::max(worst, allowed - value(rows[t]));
        }
    }
    return worst;
}

std::optional<double> fit_reaction_constant(std::span<const TimeSeriesRow> rows, double floor) {
    std::optional<double> c;
    for (std::size_t k = 1; k < rows.size(); ++k) {
        const double dt = rows[k].time - rows[k - 1].time;
        if (!(dt > 0.0)) {
            continue;
        }
        const double m = 0.5 * (rows[k].min_eta1 + rows[k - 1].min_eta1);
        const double gap = 1.0 - m * m;
        if (gap < floor) {
            continue;
        }
        const double ratio = (rows[k].min_eta1 - rows[k - 1].min_eta1) / dt / (m * gap);
        c = c ? std::min(*c, ratio) : ratio;
    }
    return c;
}

} // namespace mcf
