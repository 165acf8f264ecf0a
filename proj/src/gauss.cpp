#include "mcf/gauss.hpp"

#include "mcf/error.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace mcf {

namespace {

const char* kModule = "gauss-analysis";

constexpr double kClamp = 1e-14;

using Block = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDomainDim, kMaxDomainDim>;

struct Decomposition {
    int n = 0;
    Eigen::Matrix3d chart_to_orth = Eigen::Matrix3d::Zero(); // L^T
    Eigen::Matrix3d orth_to_chart = Eigen::Matrix3d::Zero(); // L^{-T}
    Eigen::Matrix2d target_to_orth = Eigen::Matrix2d::Identity();
    Eigen::Matrix<double, 2, Eigen::Dynamic, 0, 2, kMaxDomainDim> T;
    std::array<double, kMaxDomainDim> mu{};
    Block V;
};

void first_positive(Eigen::Ref<Eigen::VectorXd> v) {
    for (Eigen::Index k = 0; k < v.size(); ++k) {
        if (std::abs(v[k]) > 1e-12) {
            if (v[k] < 0) {
                v = -v;
            }
            return;
        }
    }
}

Decomposition decompose(const DifferentialData& diff, const MetricData& g1, const Eigen::Matrix2d& g2) {
    Decomposition d;
    const int n = diff.dim;
    d.n = n;
    if (!diff.df.allFinite()) {
        throw NumericError(kModule, "non-finite differential");
    }
    const Block G = g1.g.topLeftCorner(n, n);
    Eigen::LLT<Block> llt(G);
    if (llt.info() != Eigen::Success) {
        throw NumericError(kModule, "domain metric is not positive definite");
    }
    const Block L = llt.matrixL();
    const Block Lt = L.transpose();
    const Block LinvT = Lt.inverse();
    d.chart_to_orth.topLeftCorner(n, n) = Lt;
    d.orth_to_chart.topLeftCorner(n, n) = LinvT;

    Eigen::LLT<Eigen::Matrix2d> target(g2);
    if (target.info() != Eigen::Success) {
        throw NumericError(kModule, "target metric is not positive definite");
    }
    d.target_to_orth = target.matrixL().transpose();
    d.T = d.target_to_orth * diff.df.leftCols(n) * LinvT;

    const Block S = d.T.transpose() * d.T;
    Eigen::SelfAdjointEigenSolver<Block> es(S);
    if (es.info() != Eigen::Success) {
        throw NumericError(kModule, "eigen decomposition failed");
    }
    // Descending order.
    d.V.resize(n, n);
    for (int i = 0; i < n; ++i) {
        d.mu[i] = es.eigenvalues()[n - 1 - i];
        d.V.col(i) = es.eigenvectors().col(n - 1 - i);
    }
    const double scale = std::max(1.0, d.mu[0]);
    for (int i = 0; i < n; ++i) {
        if (d.mu[i] < kClamp) {
            d.mu[i] = 0.0;
        }
    }

    // Clusters of (numerically) equal eigenvalues get a basis built from the
    // projections of the standard basis, so the frame is reproducible.
    int start = 0;
    while (start < n) {
        int stop = start + 1;
        while (stop < n && std::abs(d.mu[stop] - d.mu[start]) <= 1e-12 * scale) {
            ++stop;
        }
        if (stop - start > 1) {
            const Block Q = d.V.middleCols(start, stop - start);
            const Block P = Q * Q.transpose();
            int filled = start;
            for (int k = 0; k < n && filled < stop; ++k) {
                Eigen::VectorXd v = P.col(k);
                for (int j = start; j < filled; ++j) {
                    v -= d.V.col(j).dot(v) * Eigen::VectorXd(d.V.col(j));
                }
                const double norm = v.norm();
                if (norm > 0.1) {
                    d.V.col(filled++) = v / norm;
                }
            }
        }
        start = stop;
    }
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd v = d.V.col(i);
        first_positive(v);
        d.V.col(i) = v;
    }
    if (d.V.determinant() < 0) {
        d.V.col(n - 1) = -d.V.col(n - 1);
    }
    return d;
}

struct TargetPair {
    Eigen::Vector2d first;
    Eigen::Vector2d second;
    int sign = 1;
};

TargetPair target_pair(const Decomposition& d, double l1, double l2) {
    TargetPair out;
    if (l1 > 0.0) {
        const Eigen::Vector2d v = d.T * d.V.col(0);
        out.first = v / v.norm();
    } else {
        out.first = Eigen::Vector2d(1.0, 0.0);
    }
    out.second = Eigen::Vector2d(-out.first[1], out.first[0]);
    if (l2 > 0.0 && d.n > 1) {
        const Eigen::Vector2d v = d.T * d.V.col(1);
        out.sign = v.dot(out.second) < 0 ? -1 : 1;
    }
    return out;
}

SingularData to_singular(const Decomposition& d, int sign) {
    SingularData sv;
    sv.dim = d.n;
    for (int i = 0; i < d.n; ++i) {
        sv.lambdas[i] = i < kTargetDim ? std::sqrt(d.mu[i]) : 0.0;
    }
    sv.det_sign = sign;
    return sv;
}

} // namespace

SingularData singular_values(const DifferentialData& diff, const MetricData& g1, const Eigen::Matrix2d& g2) {
    const auto d = decompose(diff, g1, g2);
    const double l1 = std::sqrt(d.mu[0]);
    const double l2 = std::sqrt(d.mu[1]);
    return to_singular(d, target_pair(d, l1, l2).sign);
}

GaussFunctionals gauss_functionals(const SingularData& sv) {
    const double l1 = sv.lambdas[0];
    const double l2 = sv.lambdas[1];
    const double root = std::sqrt((1.0 + l1 * l1) * (1.0 + l2 * l2));
    GaussFunctionals out;
    out.product = l1 * l2;
    out.comass_pullback = out.product;
    out.eta1 = 1.0 / root;
    out.eta = (1.0 - out.product) / root;
    return out;
}

AdaptedFrame adapted_frame(const DifferentialData& diff, const MetricData& g1, const Eigen::Matrix2d& g2) {
    const auto d = decompose(diff, g1, g2);
    const int n = d.n;
    const double l1 = std::sqrt(d.mu[0]);
    const double l2 = std::sqrt(d.mu[1]);
    const auto pair = target_pair(d, l1, l2);

    AdaptedFrame f;
    f.dim = n;
    f.sv = to_singular(d, pair.sign);
    f.chart_to_orthonormal = d.chart_to_orth;
    f.target_to_orthonormal = d.target_to_orth;
    f.a_chart.topLeftCorner(n, n) = d.orth_to_chart.topLeftCorner(n, n) * d.V;
    f.a = MMatrix::Zero(n + 2, n + 2);
    f.a.topLeftCorner(n, n) = d.V;
    f.a.block(n, n, 2, 1) = pair.first;
    f.a.block(n, n + 1, 2, 1) = pair.second;

    f.e = MMatrix::Zero(n + 2, n + 2);
    for (int i = 0; i < n; ++i) {
        if (i >= kTargetDim) {
            f.e.col(i) = f.a.col(i);
            continue;
        }
        const double l = f.signed_lambda(i);
        const double root = std::sqrt(1.0 + l * l);
        f.e.col(i) = (f.a.col(i) + l * f.a.col(n + i)) / root;
        f.e.col(n + i) = (f.a.col(n + i) - l * f.a.col(i)) / root;
    }
    return f;
}

double star_omega(const SingularData& sv, double omega_value) {
    if (!(std::abs(omega_value) <= 1.0)) {
        throw DomainError(kModule, "omega value must lie in [-1, 1] (comass one), got " + std::to_string(omega_value));
    }
    const double l1 = sv.lambdas[0];
    const double l2 = sv.lambdas[1];
    return (1.0 - l1 * l2 * omega_value) / std::sqrt((1.0 + l1 * l1) * (1.0 + l2 * l2));
}

Eigen::Matrix3d induced_metric(const DifferentialData& diff, const MetricData& g1, const Eigen::Matrix2d& g2) {
    Eigen::Matrix3d g = Eigen::Matrix3d::Zero();
    const int n = diff.dim;
    g.topLeftCorner(n, n) = g1.g.topLeftCorner(n, n) + diff.df.leftCols(n).transpose() * g2 * diff.df.leftCols(n);
    return g;
}

double eta1_from_metric(const DifferentialData& diff, const MetricData& g1, const Eigen::Matrix2d& g2) {
    const int n = diff.dim;
    const Eigen::Matrix3d g = induced_metric(diff, g1, g2);
    const double d1 = Block(g1.g.topLeftCorner(n, n)).determinant();
    const double d = Block(g.topLeftCorner(n, n)).determinant();
    return std::sqrt(d1 / d);
}

SecondFormData second_fundamental_form(const DifferentialData& diff, const MetricData& g1,
                                       const AdaptedFrame& frame) {
    const int n = frame.dim;
    SecondFormData out;
    out.dim = n;

    // Chart components of the unit tangent vectors e_i (domain part).
    Eigen::Matrix3d C = Eigen::Matrix3d::Zero();
    for (int i = 0; i < n; ++i) {
        const double l = i < kTargetDim ? frame.sv.lambdas[i] : 0.0;
        C.col(i) = frame.a_chart.col(i) / std::sqrt(1.0 + l * l);
    }

    // Normal components of nabla_{d_p} dF(d_q).
    std::array<Eigen::Matrix3d, kTargetDim> hc{Eigen::Matrix3d::Zero(), Eigen::Matrix3d::Zero()};
    for (int p = 0; p < n; ++p) {
        for (int q = p; q < n; ++q) {
            MVector v(n + 2);
            Eigen::Vector3d gamma = Eigen::Vector3d::Zero();
            for (int k = 0; k < n; ++k) {
                gamma[k] = g1.christoffel[k](p, q);
            }
            v.head(n) = (frame.chart_to_orthonormal * gamma).head(n);
            v.tail(2) = frame.target_to_orthonormal * diff.second(p, q);
            for (int a = 0; a < kTargetDim; ++a) {
                const double value = v.dot(frame.e.col(n + a));
                hc[a](p, q) = value;
                hc[a](q, p) = value;
            }
        }
    }

    for (int a = 0; a < kTargetDim; ++a) {
        const Eigen::Matrix3d h = C.transpose() * hc[a] * C;
        double trace = 0.0;
        for (int i = 0; i < n; ++i) {
            trace += h(i, i);
            for (int k = 0; k < n; ++k) {
                out.h[a][i][k] = h(i, k);
                out.A_norm_sq += h(i, k) * h(i, k);
            }
        }
        out.H[a] = trace;
    }
    return out;
}

SecondFormData second_fundamental_form(const MapField& field, std::size_t node, const ProductSpec& product) {
    const auto x = field.grid->coordinates(node);
    const auto g1 = geometry_at(product.sigma1, std::span<const double>(x.data(), product.n()));
    const auto diff = differential_at(field, node);
    const auto frame = adapted_frame(diff, g1);
    return second_fundamental_form(diff, g1, frame);
}

CurvatureTerms curvature_term_closed(const SingularData& sv, double k1, double k2, int n) {
    CurvatureTerms out;
    out.dim = n;
    std::array<double, kMaxDomainDim> inv{};
    for (int j = 0; j < n; ++j) {
        const double l = j < kTargetDim ? sv.lambdas[j] : 0.0;
        inv[j] = 1.0 / (1.0 + l * l);
    }
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) {
            if (j != i) {
                s += inv[j];
            }
        }
        const double l = i < kTargetDim ? sv.lambdas[i] : 0.0;
        out.brackets[i] = k1 * s + k2 * (1.0 - n + s);
        out.split_difference[i] = 0.5 * (k1 - k2) * (n - 1);
        out.split_sum[i] = 0.5 * (k1 + k2) * (2.0 * s + 1.0 - n);
        out.r_values[i] = l * inv[i] * out.brackets[i];
        out.r_total += out.r_values[i];
        out.eta1_reaction += l * l * inv[i] * out.brackets[i];
    }
    return out;
}

double second_form_cross(const SecondFormData& h) {
    double sum = 0.0;
    for (int k = 0; k < h.dim; ++k) {
        sum += h.h[0][0][k] * h.h[1][1][k] - h.h[1][0][k] * h.h[0][1][k];
    }
    return sum;
}

} // namespace mcf
