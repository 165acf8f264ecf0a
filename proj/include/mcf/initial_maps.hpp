#pragma once

#include "mcf/map_field.hpp"

#include <string>
#include <vector>

namespace mcf {

// Parameters of the initial-map library. A is 2 x n row-major, b has two
// entries, q0 is a target point (two chart coordinates on a torus, an ambient
// direction on a sphere).
struct InitialMapSpec {
    std::string name = "constant";
    std::vector<double> A;
    std::vector<double> b;
    double epsilon = 0.0;
    std::vector<double> q0;

    friend bool operator==(const InitialMapSpec&, const InitialMapSpec&) = default;
};

// Names: constant, affine, perturbed-affine, sphere-harmonic, identity, hopf.
const std::vector<std::string>& initial_map_names();

MapField initial_map(const InitialMapSpec& spec, std::shared_ptr<const Grid> grid, const ProductSpec& product);

// Standard Hopf map S^3 -> S^2 on unit vectors.
Eigen::Vector3d hopf_map(const Eigen::Vector4d& p);

// exp_q(v) on the sphere of radius |q| for v tangent at q.
Eigen::Vector3d sphere_exp(const Eigen::Vector3d& q, const Eigen::Vector3d& v);

} // namespace mcf
