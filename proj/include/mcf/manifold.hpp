#pragma once

#include <Eigen/Dense>

#include <array>
#include <span>
#include <string>
#include <vector>

namespace mcf {

inline constexpr int kMaxDomainDim = 3;
inline constexpr int kTargetDim = 2;

enum class ManifoldKind { FlatTorus, RoundSphere };

// One factor of the product. Tori carry one period per dimension and no
// curvature; spheres carry a curvature k > 0 and use the chart
// (c_1, ..., c_{n-1}, phi) with colatitudes c_m in (0, pi) and longitude phi.
struct ManifoldSpec {
    ManifoldKind kind = ManifoldKind::FlatTorus;
    int dim = 2;
    std::vector<double> periods;
    double curvature = 0.0;

    static ManifoldSpec torus(std::vector<double> periods);
    static ManifoldSpec sphere(int dim, double curvature);

    bool is_torus() const { return kind == ManifoldKind::FlatTorus; }
    bool is_sphere() const { return kind == ManifoldKind::RoundSphere; }
    // Sectional curvature; zero for tori.
    double k() const { return is_sphere() ? curvature : 0.0; }

    void validate() const;

    // "torus:P1,P2[,P3]" or "sphere:DIM:K"; parse() inverts to_string() exactly.
    std::string to_string() const;
    static ManifoldSpec parse(const std::string& text);

    friend bool operator==(const ManifoldSpec&, const ManifoldSpec&) = default;
};

// Riemannian product Sigma_1 x Sigma_2 with dim Sigma_2 = 2. Accepted regimes
// are flat x flat, or a round sphere domain with k1 >= |k2|.
struct ProductSpec {
    ManifoldSpec sigma1;
    ManifoldSpec sigma2;

    int n() const { return sigma1.dim; }
    double k1() const { return sigma1.k(); }
    double k2() const { return sigma2.k(); }
    bool flat() const { return sigma1.is_torus() && sigma2.is_torus(); }

    void validate() const;

    friend bool operator==(const ProductSpec&, const ProductSpec&) = default;
};

// Chart data at a point. Only the leading dim x dim blocks are meaningful;
// christoffel[k](i, j) = Gamma^k_{ij}.
struct MetricData {
    int dim = 0;
    Eigen::Matrix3d g = Eigen::Matrix3d::Zero();
    Eigen::Matrix3d g_inv = Eigen::Matrix3d::Zero();
    std::array<Eigen::Matrix3d, kMaxDomainDim> christoffel{
        Eigen::Matrix3d::Zero(), Eigen::Matrix3d::Zero(), Eigen::Matrix3d::Zero()};
    double sqrt_det = 0.0;
};

MetricData geometry_at(const ManifoldSpec& spec, std::span<const double> point);

// Unit-sphere embedding of the chart: (cos c_1, sin c_1 cos c_2, ...), the
// last two components being the longitude ring. Entries beyond dim + 1 are 0.
Eigen::Vector4d sphere_embedding(int dim, std::span<const double> point);

// sqrt(det g) at chart coordinates, including pole points where it vanishes.
double volume_factor(const ManifoldSpec& spec, std::span<const double> point);

// Tangent vector of M in orthonormal components: the first n entries refer to
// an orthonormal basis of T Sigma_1, the last two to one of T Sigma_2.
using MVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDomainDim + kTargetDim, 1>;

// R(X, Y, Z, W) of the product of constant-curvature factors, in the index
// convention R(X, Y, Z, W) = k (<X,Y><Z,W> - <X,W><Y,Z>) per factor. With it,
// sum_k R(e_alpha, e_k, e_k, e_i) matches the graph curvature closed form.
double curvature_tensor(const ProductSpec& product, const MVector& x, const MVector& y,
                        const MVector& z, const MVector& w);

// Sectional curvature of the plane spanned by orthonormal x, y.
double sectional_curvature(const ProductSpec& product, const MVector& x, const MVector& y);

// sum_k R(e_alpha, e_k, e_k, e_i) over an orthonormal frame e_1..e_n.
double riemann_contraction(const ProductSpec& product, const MVector& e_alpha,
                           std::span<const MVector> frame, int i);

} // namespace mcf
