#pragma once

#include "mcf/grid.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <vector>

namespace mcf {

// Discretized map f: Sigma_1 -> Sigma_2. Torus targets store two periodic
// coordinates per node; sphere targets store an ambient vector of R^3 with
// norm 1/sqrt(k2).
struct MapField {
    std::shared_ptr<const Grid> grid;
    ManifoldSpec target;
    std::vector<double> values;

    MapField() = default;
    MapField(std::shared_ptr<const Grid> grid, ManifoldSpec target);

    int components() const { return target.is_sphere() ? 3 : 2; }
    std::size_t size() const { return grid->size(); }

    std::span<double> at(std::size_t node) {
        return {values.data() + node * components(), static_cast<std::size_t>(components())};
    }
    std::span<const double> at(std::size_t node) const {
        return {values.data() + node * components(), static_cast<std::size_t>(components())};
    }

    friend bool operator==(const MapField& a, const MapField& b);
};

struct FlowState {
    double time = 0.0;
    MapField field;
    long step_index = 0;

    friend bool operator==(const FlowState& a, const FlowState& b) {
        return a.time == b.time && a.step_index == b.step_index && a.field == b.field;
    }
};

// Chart derivatives of f at a node, expressed in an orthonormal basis of the
// target tangent plane at f(node). For sphere targets the ambient stencils are
// projected onto that plane, which yields the target-covariant second
// derivative. Entries beyond the domain dimension are zero.
struct DifferentialData {
    int dim = 0;
    Eigen::Matrix<double, 2, 3> df = Eigen::Matrix<double, 2, 3>::Zero();
    std::array<std::array<Eigen::Vector2d, 3>, 3> second_derivs{};
    // Columns span the target tangent plane in ambient R^3 (sphere targets).
    Eigen::Matrix<double, 3, 2> target_basis = Eigen::Matrix<double, 3, 2>::Zero();

    Eigen::Vector2d second(int i, int j) const { return second_derivs[i][j]; }
};

// Oriented orthonormal basis (t1, t2) of the plane orthogonal to p, with
// t1 x t2 along p. Deterministic in p.
Eigen::Matrix<double, 3, 2> sphere_tangent_basis(const Eigen::Vector3d& p);

// Minimal-image representative of a coordinate difference modulo period.
inline double minimal_image(double d, double period) {
    return d - period * std::nearbyint(d / period);
}

DifferentialData differential_at(const MapField& field, std::size_t node);

// Wrap torus values into [0, period); rescale sphere values to radius 1/sqrt(k2).
MapField chart_normalize(MapField field);
void chart_normalize_in_place(MapField& field);

} // namespace mcf
