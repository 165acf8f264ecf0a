#include "mcf/manifold.hpp"

#include "mcf/error.hpp"
#include "mcf/text.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace mcf {

namespace {

const char* kModule = "manifold-geometry";

// Diagonal of the round metric of curvature k in the chart (c_1..c_{n-1}, phi):
// g_aa = prod_{l < a} sin^2(c_l) / k.
void sphere_diagonal(int dim, double k, std::span<const double> x, std::array<double, 3>& diag) {
    double factor = 1.0 / k;
    for (int a = 0; a < dim; ++a) {
        diag[a] = factor;
        if (a < dim - 1) {
            const double s = std::sin(x[a]);
            factor *= s * s;
        }
    }
}

std::pair<double, double> split_product(const ProductSpec& product, const MVector& u,
                                        const MVector& v) {
    const int n = product.n();
    const double first = u.head(n).dot(v.head(n));
    const double second = u.tail(kTargetDim).dot(v.tail(kTargetDim));
    return {first, second};
}

} // namespace

ManifoldSpec ManifoldSpec::torus(std::vector<double> periods) {
    ManifoldSpec spec;
    spec.kind = ManifoldKind::FlatTorus;
    spec.dim = static_cast<int>(periods.size());
    spec.periods = std::move(periods);
    spec.curvature = 0.0;
    return spec;
}

ManifoldSpec ManifoldSpec::sphere(int dim, double curvature) {
    ManifoldSpec spec;
    spec.kind = ManifoldKind::RoundSphere;
    spec.dim = dim;
    spec.curvature = curvature;
    return spec;
}

void ManifoldSpec::validate() const {
    if (dim < 2 || dim > kMaxDomainDim) {
        throw ValidationError(kModule, "manifold dimension must be 2 or 3, got " + std::to_string(dim));
    }
    if (is_torus()) {
        if (static_cast<int>(periods.size()) != dim) {
            throw ValidationError(kModule, "torus needs one period per dimension");
        }
        for (double p : periods) {
            if (!(p > 0.0) || !std::isfinite(p)) {
                throw ValidationError(kModule, "torus periods must be positive and finite");
            }
        }
        if (curvature != 0.0) {
            throw ValidationError(kModule, "a flat torus carries no curvature value");
        }
    } else {
        if (!periods.empty()) {
            throw ValidationError(kModule, "a sphere carries no periods");
        }
        if (!(curvature > 0.0) || !std::isfinite(curvature)) {
            throw ValidationError(kModule, "sphere curvature must be positive");
        }
    }
}

std::string ManifoldSpec::to_string() const {
    if (is_torus()) {
        return "torus:" + join_doubles(periods);
    }
    return "sphere:" + std::to_string(dim) + ":" + format_double(curvature);
}

ManifoldSpec ManifoldSpec::parse(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) {
        throw ValidationError(kModule, "manifold spec '" + text + "' lacks a kind prefix");
    }
    const std::string kind = text.substr(0, colon);
    const std::string rest = text.substr(colon + 1);
    ManifoldSpec spec;
    if (kind == "torus") {
        std::vector<double> periods;
        for (auto part : split(rest, ',')) {
            auto value = parse_double(part);
            if (!value) {
                throw ValidationError(kModule, "bad torus period '" + std::string(part) + "'");
            }
            periods.push_back(*value);
        }
        spec = torus(std::move(periods));
    } else if (kind == "sphere") {
        auto parts = split(rest, ':');
        if (parts.size() != 2) {
            throw ValidationError(kModule, "sphere spec must read sphere:DIM:K");
        }
        auto dim = parse_integer(parts[0]);
        auto k = parse_double(parts[1]);
        if (!dim || !k) {
            throw ValidationError(kModule, "bad sphere spec '" + text + "'");
        }
        spec = sphere(static_cast<int>(*dim), *k);
    } else {
        throw ValidationError(kModule, "unknown manifold kind '" + kind + "'");
    }
    spec.validate();
    return spec;
}

void ProductSpec::validate() const {
    sigma1.validate();
    sigma2.validate();
    if (sigma2.dim != kTargetDim) {
        throw ValidationError(kModule, "the target factor must be two-dimensional");
    }
    if (sigma1.is_sphere()) {
        if (sigma1.curvature < std::abs(sigma2.k())) {
            std::ostringstream msg;
            msg << "hypothesis k1 >= |k2| violated (k1 = " << sigma1.curvature
                << ", k2 = " << sigma2.k() << ")";
            throw ValidationError(kModule, msg.str());
        }
    } else if (sigma2.is_sphere()) {
        throw ValidationError(kModule,
                              "flat domain with a curved target is outside both regimes "
                              "(flat x flat, or S^n(k1) x Sigma_2 with k1 >= |k2|)");
    }
}

MetricData geometry_at(const ManifoldSpec& spec, std::span<const double> point) {
    MetricData out;
    const int n = spec.dim;
    out.dim = n;
    if (static_cast<int>(point.size()) != n) {
        throw ValidationError(kModule, "point has wrong number of chart coordinates");
    }
    if (spec.is_torus()) {
        for (int a = 0; a < n; ++a) {
            out.g(a, a) = 1.0;
            out.g_inv(a, a) = 1.0;
        }
        out.sqrt_det = 1.0;
        return out;
    }

    for (int m = 0; m < n - 1; ++m) {
        const double c = point[m];
        if (!(c > 0.0 && c < std::numbers::pi) || std::sin(c) < 1e-12) {
            std::ostringstream msg;
            msg << "colatitude c_" << (m + 1) << " = " << c << " lies in the pole exclusion band";
            throw DomainError(kModule, msg.str());
        }
    }

    const double k = spec.curvature;
    std::array<double, 3> diag{};
    sphere_diagonal(n, k, point, diag);

    // dg[l][a] = d/dx^l g_aa; only colatitudes before a contribute.
    double dg[3][3] = {};
    for (int a = 0; a < n; ++a) {
        for (int l = 0; l < std::min(a, n - 1); ++l) {
            dg[l][a] = diag[a] * 2.0 * std::cos(point[l]) / std::sin(point[l]);
        }
    }

    double det = 1.0;
    for (int a = 0; a < n; ++a) {
        out.g(a, a) = diag[a];
        out.g_inv(a, a) = 1.0 / diag[a];
        det *= diag[a];
    }
    out.sqrt_det = std::sqrt(det);

    for (int a = 0; a < n; ++a) {
        const double inv = out.g_inv(a, a);
        for (int b = 0; b < n; ++b) {
            for (int c = 0; c < n; ++c) {
                double value = 0.0;
                if (b == a && c == a) {
                    value = 0.5 * inv * dg[a][a];
                } else if (b == a) {
                    value = 0.5 * inv * dg[c][a];
                } else if (c == a) {
                    value = 0.5 * inv * dg[b][a];
                } else if (b == c) {
                    value = -0.5 * inv * dg[a][b];
                }
                out.christoffel[a](b, c) = value;
            }
        }
    }
    return out;
}

Eigen::Vector4d sphere_embedding(int dim, std::span<const double> point) {
    Eigen::Vector4d p = Eigen::Vector4d::Zero();
    double r = 1.0;
    for (int m = 0; m < dim - 1; ++m) {
        p[m] = r * std::cos(point[m]);
        r *= std::sin(point[m]);
    }
    p[dim - 1] = r * std::cos(point[dim - 1]);
    p[dim] = r * std::sin(point[dim - 1]);
    return p;
}

double volume_factor(const ManifoldSpec& spec, std::span<const double> point) {
    if (spec.is_torus()) {
        return 1.0;
    }
    const int n = spec.dim;
    double value = std::pow(spec.curvature, -0.5 * n);
    for (int m = 0; m < n - 1; ++m) {
        // colatitude c_m appears in every later diagonal entry
        value *= std::pow(std::abs(std::sin(point[m])), n - 1 - m);
    }
    return value;
}

double curvature_tensor(const ProductSpec& product, const MVector& x, const MVector& y,
                        const MVector& z, const MVector& w) {
    const auto [xy1, xy2] = split_product(product, x, y);
    const auto [zw1, zw2] = split_product(product, z, w);
    const auto [xw1, xw2] = split_product(product, x, w);
    const auto [yz1, yz2] = split_product(product, y, z);
    return product.k1() * (xy1 * zw1 - xw1 * yz1) + product.k2() * (xy2 * zw2 - xw2 * yz2);
}

double sectional_curvature(const ProductSpec& product, const MVector& x, const MVector& y) {
    return -curvature_tensor(product, x, y, y, x);
}

double riemann_contraction(const ProductSpec& product, const MVector& e_alpha,
                           std::span<const MVector> frame, int i) {
    const int n = product.n();
    const int total = n + kTargetDim;
    if (static_cast<int>(frame.size()) != n || i < 0 || i >= n) {
        throw ValidationError(kModule, "riemann_contraction needs n frame vectors and 0 <= i < n");
    }
    if (e_alpha.size() != total) {
        throw ValidationError(kModule, "tangent vectors must have n + 2 components");
    }
    double deviation = std::abs(e_alpha.squaredNorm() - 1.0);
    for (int a = 0; a < n; ++a) {
        if (frame[a].size() != total) {
            throw ValidationError(kModule, "tangent vectors must have n + 2 components");
        }
        deviation = std::max(deviation, std::abs(frame[a].dot(e_alpha)));
        for (int b = 0; b < n; ++b) {
            const double expected = a == b ? 1.0 : 0.0;
            deviation = std::max(deviation, std::abs(frame[a].dot(frame[b]) - expected));
        }
    }
    if (deviation > 1e-10) {
        std::ostringstream msg;
        msg << "frame is not orthonormal: max Gram deviation " << deviation;
        throw ValidationError(kModule, msg.str());
    }
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
        sum += curvature_tensor(product, e_alpha, frame[k], frame[k], frame[i]);
    }
    return sum;
}

} // namespace mcf
