#pragma once

#include "mcf/manifold.hpp"
#include "mcf/map_field.hpp"

#include <array>
#include <vector>

namespace mcf {

using MMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDomainDim + kTargetDim,
                              kMaxDomainDim + kTargetDim>;

// Singular values of df with respect to the domain and target metrics.
// lambdas[i] = 0 for i >= 2. det_sign is the orientation of df on the plane
// (a_1, a_2) when (a_1, ..., a_n) is positively oriented; +1 when df has rank < 2.
struct SingularData {
    int dim = 0;
    std::array<double, kMaxDomainDim> lambdas{};
    int det_sign = 1;

    double product() const { return lambdas[0] * lambdas[1]; }
};

struct GaussFunctionals {
    double eta = 1.0;
    double eta1 = 1.0;
    double comass_pullback = 0.0;
    double product = 0.0;

    bool in_class() const { return eta > 0.0; }
};

// Vectors of M in orthonormal components (n domain entries, then 2 target).
// Columns of `e` are e_1..e_n, e_{n+1}, e_{n+2}; `a` holds a_1..a_n,
// a_{n+1}, a_{n+2} the same way. The target pair is positively oriented, so
// df(a_2) = det_sign * lambda_2 * a_{n+2}.
struct AdaptedFrame {
    int dim = 0;
    SingularData sv;
    MMatrix a;
    MMatrix e;
    // Chart components of a_1..a_n (columns, n x n).
    Eigen::Matrix3d a_chart = Eigen::Matrix3d::Zero();
    // Maps chart components of a domain vector to orthonormal components.
    Eigen::Matrix3d chart_to_orthonormal = Eigen::Matrix3d::Zero();
    Eigen::Matrix2d target_to_orthonormal = Eigen::Matrix2d::Identity();

    MVector e_col(int k) const { return e.col(k); }
    // Signed singular value entering the frame formulas.
    double signed_lambda(int i) const { return i == 1 ? sv.det_sign * sv.lambdas[1] : sv.lambdas[i]; }
};

// h[a][i][k] = h_{n+1+a, i+1, k+1} in the adapted frame.
struct SecondFormData {
    int dim = 0;
    std::array<std::array<std::array<double, kMaxDomainDim>, kMaxDomainDim>, kTargetDim> h{};
    Eigen::Vector2d H = Eigen::Vector2d::Zero();
    double A_norm_sq = 0.0;
};

struct CurvatureTerms {
    int dim = 0;
    // R_{n+i,kki} closed form, i = 1..n.
    std::array<double, kMaxDomainDim> r_values{};
    // k1 S_i + k2 (1 - n + S_i), S_i = sum_{j != i} 1/(1 + lambda_j^2).
    std::array<double, kMaxDomainDim> brackets{};
    // (k1 - k2)/2 (n - 1) and (k1 + k2)/2 (sum_{j != i} 2/(1 + lambda_j^2) + 1 - n).
    std::array<double, kMaxDomainDim> split_difference{};
    std::array<double, kMaxDomainDim> split_sum{};
    // sum_i lambda_i^2/(1 + lambda_i^2) * brackets[i].
    double eta1_reaction = 0.0;
    // sum_i lambda_i/(1 + lambda_i^2) * brackets[i] = sum_i r_values[i].
    double r_total = 0.0;
};

SingularData singular_values(const DifferentialData& diff, const MetricData& g1,
                             const Eigen::Matrix2d& g2 = Eigen::Matrix2d::Identity());

GaussFunctionals gauss_functionals(const SingularData& sv);

AdaptedFrame adapted_frame(const DifferentialData& diff, const MetricData& g1,
                           const Eigen::Matrix2d& g2 = Eigen::Matrix2d::Identity());

// *(Omega_1 - Omega_2 ^ omega) for omega(a_3, ..., a_n) = omega_value.
double star_omega(const SingularData& sv, double omega_value);

// sqrt(det g1 / det g) with g = g1 + df^T g2 df the induced metric.
double eta1_from_metric(const DifferentialData& diff, const MetricData& g1,
                        const Eigen::Matrix2d& g2 = Eigen::Matrix2d::Identity());

// Induced metric in chart components (n x n block of the result).
Eigen::Matrix3d induced_metric(const DifferentialData& diff, const MetricData& g1,
                               const Eigen::Matrix2d& g2 = Eigen::Matrix2d::Identity());

SecondFormData second_fundamental_form(const DifferentialData& diff, const MetricData& g1,
                                       const AdaptedFrame& frame);
SecondFormData second_fundamental_form(const MapField& field, std::size_t node, const ProductSpec& product);

CurvatureTerms curvature_term_closed(const SingularData& sv, double k1, double k2, int n);

// Sum over k of (h_{n+1,1k} h_{n+2,2k} - h_{n+2,1k} h_{n+1,2k}).
double second_form_cross(const SecondFormData& h);

} // namespace mcf
