#include "mcf/initial_maps.hpp"

#include "mcf/error.hpp"
#include "mcf/text.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mcf {

namespace {

const char* kModule = "cli-runner";

void require(bool ok, const std::string& what) {
    if (!ok) {
        throw ValidationError(kModule, what);
    }
}

Eigen::Vector3d target_point(const InitialMapSpec& spec, const ManifoldSpec& target) {
    if (target.is_torus()) {
        Eigen::Vector3d q = Eigen::Vector3d::Zero();
        if (!spec.q0.empty()) {
            require(spec.q0.size() == 2, "q0 on a torus target needs two coordinates");
            q[0] = spec.q0[0];
            q[1] = spec.q0[1];
        }
        return q;
    }
    Eigen::Vector3d q(0.0, 0.0, 1.0);
    if (!spec.q0.empty()) {
        require(spec.q0.size() == 3, "q0 on a sphere target needs three ambient components");
        q = Eigen::Vector3d(spec.q0[0], spec.q0[1], spec.q0[2]);
    }
    require(q.norm() > 1e-8, "q0 must be a nonzero ambient vector");
    return q.normalized() / std::sqrt(target.curvature);
}

// Linear part as a 2 x n matrix.
Eigen::Matrix<double, 2, 3> linear_part(const InitialMapSpec& spec, int n) {
    Eigen::Matrix<double, 2, 3> A = Eigen::Matrix<double, 2, 3>::Zero();
    require(static_cast<int>(spec.A.size()) == 2 * n,
            "A must have 2 x " + std::to_string(n) + " entries (row-major), got " + std::to_string(spec.A.size()));
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < n; ++c) {
            A(r, c) = spec.A[r * n + c];
        }
    }
    return A;
}

void require_period_compatible(const Eigen::Matrix<double, 2, 3>& A, const ManifoldSpec& domain,
                               const ManifoldSpec& target) {
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < domain.dim; ++c) {
            const double k = A(r, c) * domain.periods[c] / target.periods[r];
            if (std::abs(k - std::nearbyint(k)) > 1e-9) {
                throw ValidationError(kModule, "affine map is not period compatible: A(" + std::to_string(r + 1) + "," +
                                                   std::to_string(c + 1) + ") * " + format_double(domain.periods[c]) +
                                                   " is not a multiple of the target period " +
                                                   format_double(target.periods[r]));
            }
        }
    }
}

} // namespace

const std::vector<std::string>& initial_map_names() {
    static const std::vector<std::string> names{"constant", "affine", "perturbed-affine", "sphere-harmonic",
                                                "identity", "hopf"};
    return names;
}

Eigen::Vector3d hopf_map(const Eigen::Vector4d& p) {
    const double re = p[0] * p[2] + p[1] * p[3];
    const double im = p[1] * p[2] - p[0] * p[3];
    return {2.0 * re, 2.0 * im, p[0] * p[0] + p[1] * p[1] - p[2] * p[2] - p[3] * p[3]};
}

Eigen::Vector3d sphere_exp(const Eigen::Vector3d& q, const Eigen::Vector3d& v) {
    const double radius = q.norm();
    const double r = v.norm();
    if (r == 0.0) {
        return q;
    }
    return std::cos(r / radius) * q + radius * std::sin(r / radius) * v / r;
}

MapField initial_map(const InitialMapSpec& spec, std::shared_ptr<const Grid> grid, const ProductSpec& product) {
    product.validate();
    const ManifoldSpec& domain = product.sigma1;
    const ManifoldSpec& target = product.sigma2;
    require(grid->spec() == domain, "grid does not match the domain factor");
    const int n = domain.dim;
    MapField field(grid, target);
    const auto& names = initial_map_names();
    require(std::find(names.begin(), names.end(), spec.name) != names.end(), "unknown initial map '" + spec.name + "'");
    require(std::isfinite(spec.epsilon), "epsilon must be finite");
    const Eigen::Vector3d q0 = target_point(spec, target);

    auto store = [&](std::size_t node, const Eigen::Vector3d& v) {
        auto out = field.at(node);
        for (int c = 0; c < field.components(); ++c) {
            out[c] = v[c];
        }
    };

    if (spec.name == "constant") {
        for (std::size_t node = 0; node < grid->size(); ++node) {
            store(node, q0);
        }
    } else if (spec.name == "affine" || spec.name == "perturbed-affine") {
        require(domain.is_torus() && target.is_torus(), spec.name + " needs torus domain and torus target");
        const auto A = linear_part(spec, n);
        require_period_compatible(A, domain, target);
        Eigen::Vector2d b = Eigen::Vector2d::Zero();
        if (!spec.b.empty()) {
            require(spec.b.size() == 2, "b needs two entries");
            b = Eigen::Vector2d(spec.b[0], spec.b[1]);
        }
        const bool perturbed = spec.name == "perturbed-affine";
        std::array<double, 3> xi{};
        for (int j = 0; j < n; ++j) {
            xi[j] = 2.0 * std::numbers::pi / domain.periods[j];
        }
        for (std::size_t node = 0; node < grid->size(); ++node) {
            const auto x = grid->coordinates(node);
            Eigen::Vector3d v = Eigen::Vector3d::Zero();
            v.head<2>() = A.leftCols(n) * Eigen::Map<const Eigen::VectorXd>(x.data(), n) + b;
            if (perturbed) {
                double s = 0.0;
                double c = xi[0] * x[0];
                for (int j = 0; j < n; ++j) {
                    s += xi[j] * x[j];
                    if (j > 0) {
                        c -= xi[j] * x[j];
                    }
                }
                v[0] += spec.epsilon * std::sin(s);
                v[1] += spec.epsilon * std::cos(c);
            }
            store(node, v);
        }
    } else if (spec.name == "sphere-harmonic") {
        require(domain.is_sphere() && target.is_sphere(), "sphere-harmonic needs sphere domain and sphere target");
        // W = the longitude-ring components of the position on S^n(k1), which
        // has unit C^1 bound; the image is exp_{q0}(epsilon W).
        const double reach = std::abs(spec.epsilon) / std::sqrt(domain.curvature);
        require(reach < std::numbers::pi / std::sqrt(target.curvature),
                "sphere-harmonic epsilon too large: exp_{q0} leaves its injectivity radius");
        const auto basis = sphere_tangent_basis(q0);
        for (std::size_t node = 0; node < grid->size(); ++node) {
            const auto x = grid->coordinates(node);
            const Eigen::Vector4d p = sphere_embedding(n, std::span<const double>(x.data(), n)) /
                                      std::sqrt(domain.curvature);
            const Eigen::Vector3d w = basis * Eigen::Vector2d(p[n - 1], p[n]);
            store(node, sphere_exp(q0, spec.epsilon * w));
        }
    } else if (spec.name == "identity") {
        require(domain.is_sphere() && target.is_sphere() && n == 2, "identity needs S^2 -> S^2");
        for (std::size_t node = 0; node < grid->size(); ++node) {
            const auto x = grid->coordinates(node);
            const Eigen::Vector4d p = sphere_embedding(2, std::span<const double>(x.data(), 2));
            store(node, p.head<3>() / std::sqrt(target.curvature));
        }
    } else {
        require(domain.is_sphere() && target.is_sphere() && n == 3, "hopf needs S^3 -> S^2");
        for (std::size_t node = 0; node < grid->size(); ++node) {
            const auto x = grid->coordinates(node);
            const Eigen::Vector4d p = sphere_embedding(3, std::span<const double>(x.data(), 3));
            store(node, hopf_map(p) / std::sqrt(target.curvature));
        }
    }
    chart_normalize_in_place(field);
    return field;
}

} // namespace mcf
