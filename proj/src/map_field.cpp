#include "mcf/map_field.hpp"

#include "mcf/error.hpp"

#include <cmath>
#include <cstring>

namespace mcf {

namespace {
const char* kModule = "graph-state";

void require_finite(std::span<const double> v, std::size_t node) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw NumericError(kModule, "non-finite field value at node " + std::to_string(node));
        }
    }
}
} // namespace

MapField::MapField(std::shared_ptr<const Grid> g, ManifoldSpec t) : grid(std::move(g)), target(std::move(t)) {
    values.assign(grid->size() * static_cast<std::size_t>(components()), 0.0);
}

bool operator==(const MapField& a, const MapField& b) {
    if (!(a.target == b.target) || !(*a.grid == *b.grid) || a.values.size() != b.values.size()) {
        return false;
    }
    return std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(double)) == 0;
}

Eigen::Matrix<double, 3, 2> sphere_tangent_basis(const Eigen::Vector3d& p) {
    const Eigen::Vector3d unit = p.normalized();
    int axis = 0;
    for (int a = 1; a < 3; ++a) {
        if (std::abs(unit[a]) < std::abs(unit[axis])) {
            axis = a;
        }
    }
    Eigen::Vector3d e = Eigen::Vector3d::Zero();
    e[axis] = 1.0;
    const Eigen::Vector3d t1 = (e - e.dot(unit) * unit).normalized();
    const Eigen::Vector3d t2 = unit.cross(t1);
    Eigen::Matrix<double, 3, 2> basis;
    basis.col(0) = t1;
    basis.col(1) = t2;
    return basis;
}

DifferentialData differential_at(const MapField& field, std::size_t node) {
    const Grid& grid = *field.grid;
    const int n = grid.dim();
    DifferentialData out;
    out.dim = n;
    const auto& h = grid.spacing();

    if (field.target.is_torus()) {
        const double* v0 = field.values.data() + node * 2;
        require_finite({v0, 2}, node);
        const auto& period = field.target.periods;
        auto diff = [&](std::uint32_t other, int c) {
            const double value = field.values[other * 2 + c];
            if (!std::isfinite(value)) {
                throw NumericError(kModule, "non-finite value at node " + std::to_string(other) +
                                                " (stencil of node " + std::to_string(node) + ")");
            }
            return minimal_image(value - v0[c], period[c]);
        };
        for (int i = 0; i < n; ++i) {
            const auto p = grid.plus(node, i);
            const auto m = grid.minus(node, i);
            for (int c = 0; c < 2; ++c) {
                const double dp = diff(p, c);
                const double dm = -diff(m, c);
                out.df(c, i) = (dp + dm) / (2.0 * h[i]);
                out.second_derivs[i][i][c] = (dp - dm) / (h[i] * h[i]);
            }
        }
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                const auto pp = grid.diagonal(node, i, j, 0);
                const auto pm = grid.diagonal(node, i, j, 1);
                const auto mp = grid.diagonal(node, i, j, 2);
                const auto mm = grid.diagonal(node, i, j, 3);
                for (int c = 0; c < 2; ++c) {
                    const double value =
                        (diff(pp, c) - diff(pm, c) - diff(mp, c) + diff(mm, c)) / (4.0 * h[i] * h[j]);
                    out.second_derivs[i][j][c] = value;
                    out.second_derivs[j][i][c] = value;
                }
            }
        }
        out.target_basis.setZero();
        out.target_basis(0, 0) = 1.0;
        out.target_basis(1, 1) = 1.0;
        return out;
    }

    auto load = [&](std::uint32_t other) {
        const double* v = field.values.data() + static_cast<std::size_t>(other) * 3;
        Eigen::Vector3d x(v[0], v[1], v[2]);
        if (!x.allFinite()) {
            throw NumericError(kModule, "non-finite value at node " + std::to_string(other) +
                                            " (stencil of node " + std::to_string(node) + ")");
        }
        return x;
    };
    const Eigen::Vector3d v0 = load(static_cast<std::uint32_t>(node));
    if (v0.norm() < 1e-8) {
        throw NumericError(kModule, "sphere value with vanishing norm at node " + std::to_string(node));
    }
    const auto basis = sphere_tangent_basis(v0);
    out.target_basis = basis;
    for (int i = 0; i < n; ++i) {
        const Eigen::Vector3d vp = load(grid.plus(node, i));
        const Eigen::Vector3d vm = load(grid.minus(node, i));
        out.df.col(i) = basis.transpose() * ((vp - vm) / (2.0 * h[i]));
        out.second_derivs[i][i] = basis.transpose() * ((vp - 2.0 * v0 + vm) / (h[i] * h[i]));
    }
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const Eigen::Vector3d d = load(grid.diagonal(node, i, j, 0)) - load(grid.diagonal(node, i, j, 1)) -
                                      load(grid.diagonal(node, i, j, 2)) + load(grid.diagonal(node, i, j, 3));
            const Eigen::Vector2d value = basis.transpose() * (d / (4.0 * h[i] * h[j]));
            out.second_derivs[i][j] = value;
            out.second_derivs[j][i] = value;
        }
    }
    return out;
}

void chart_normalize_in_place(MapField& field) {
    if (field.target.is_torus()) {
        const auto& period = field.target.periods;
        for (std::size_t node = 0; node < field.size(); ++node) {
            for (int c = 0; c < 2; ++c) {
                double& x = field.values[node * 2 + c];
                double r = std::fmod(x, period[c]);
                if (r < 0.0) {
                    r += period[c];
                }
                if (r >= period[c]) {
                    r = 0.0;
                }
                x = r;
            }
        }
        return;
    }
    const double radius = 1.0 / std::sqrt(field.target.curvature);
    for (std::size_t node = 0; node < field.size(); ++node) {
        double* v = field.values.data() + node * 3;
        const double norm = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        if (!(norm >= 1e-8) || !std::isfinite(norm)) {
            throw NumericError(kModule, "cannot project sphere value at node " + std::to_string(node) +
                                            " (norm " + std::to_string(norm) + ")");
        }
        // Leave values already on the sphere to rounding untouched so the pass
        // is idempotent bit for bit.
        if (std::abs(norm / radius - 1.0) <= 1e-15) {
            continue;
        }
        const double scale = radius / norm;
        for (int c = 0; c < 3; ++c) {
            v[c] *= scale;
        }
    }
}

MapField chart_normalize(MapField field) {
    chart_normalize_in_place(field);
    return field;
}

} // namespace mcf
