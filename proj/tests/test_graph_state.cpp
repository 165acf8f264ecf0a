#include "mcf/error.hpp"
#include "mcf/grid.hpp"
#include "mcf/map_field.hpp"
#include "mcf/snapshot.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>

using namespace mcf;

namespace {

constexpr double kPi = std::numbers::pi;

using ChartFn = std::function<Eigen::Vector3d(const std::array<double, 3>&)>;

MapField fill(std::shared_ptr<const Grid> grid, const ManifoldSpec& target, const ChartFn& f) {
    MapField field(grid, target);
    for (std::size_t node = 0; node < grid->size(); ++node) {
        const auto v = f(grid->coordinates(node));
        auto out = field.at(node);
        for (int c = 0; c < field.components(); ++c) {
            out[c] = v[c];
        }
    }
    return field;
}

Eigen::Vector3d sphere_point(int n, const std::array<double, 3>& x, Eigen::Vector4d* full = nullptr) {
    Eigen::Vector4d p;
    if (n == 2) {
        p << std::sin(x[0]) * std::cos(x[1]), std::sin(x[0]) * std::sin(x[1]), std::cos(x[0]), 0.0;
    } else {
        p << std::cos(x[0]), std::sin(x[0]) * std::cos(x[1]), std::sin(x[0]) * std::sin(x[1]) * std::cos(x[2]),
            std::sin(x[0]) * std::sin(x[1]) * std::sin(x[2]);
    }
    if (full) {
        *full = p;
    }
    return p.head<3>();
}

} // namespace

TEST(Grid, TorusSpacing) {
    Grid g(ManifoldSpec::torus({2 * kPi, 2 * kPi}), {8, 8});
    EXPECT_DOUBLE_EQ(g.spacing()[0], kPi / 4);
    EXPECT_DOUBLE_EQ(g.spacing()[1], kPi / 4);
    Grid h(ManifoldSpec::torus({1.0, 2 * kPi}), {16, 32});
    EXPECT_DOUBLE_EQ(h.spacing()[0], 1.0 / 16);
    EXPECT_DOUBLE_EQ(h.spacing()[1], kPi / 16);
    for (int a = 0; a < 2; ++a) {
        EXPECT_NEAR(h.spacing()[a] * h.shape()[a], h.spec().periods[a], 1e-15);
    }
}

TEST(Grid, SphereStaggering) {
    Grid g(ManifoldSpec::sphere(2, 1.0), {8, 16});
    EXPECT_DOUBLE_EQ(g.coordinates(0)[0], kPi / 16);
    for (std::size_t node = 0; node < g.size(); ++node) {
        const auto x = g.coordinates(node);
        EXPECT_GT(x[0], 0.0);
        EXPECT_LT(x[0], kPi);
    }
}

TEST(Grid, ResolutionLimits) {
    EXPECT_THROW(Grid(ManifoldSpec::torus({1, 1}), {7, 8}), ConfigError);
    EXPECT_THROW(Grid(ManifoldSpec::sphere(2, 1), {8, 17}), ConfigError);
    EXPECT_THROW(Grid(ManifoldSpec::torus({1, 1}), {8}), ConfigError);
}

// Every stencil neighbour, including those reflected across a pole, must sit
// at the ambient point reached by continuing the chart coordinates.
TEST(Grid, PoleReflectionIsGeometric) {
    for (int n : {2, 3}) {
        std::vector<int> shape(n, 8);
        shape[n - 1] = 16;
        Grid g(ManifoldSpec::sphere(n, 1.0), shape);
        for (std::size_t node = 0; node < g.size(); ++node) {
            for (int a = 0; a < n; ++a) {
                for (int s : {1, -1}) {
                    auto x = g.coordinates(node);
                    x[a] += s * g.spacing()[a];
                    const auto other = s > 0 ? g.plus(node, a) : g.minus(node, a);
                    Eigen::Vector4d p, q;
                    sphere_point(n, x, &p);
                    sphere_point(n, g.coordinates(other), &q);
                    ASSERT_LT((p - q).norm(), 1e-13) << "node " << node << " axis " << a;
                }
            }
            for (int i = 0; i < n; ++i) {
                for (int j = i + 1; j < n; ++j) {
                    const int si[4] = {1, 1, -1, -1};
                    const int sj[4] = {1, -1, 1, -1};
                    for (int c = 0; c < 4; ++c) {
                        auto x = g.coordinates(node);
                        x[i] += si[c] * g.spacing()[i];
                        x[j] += sj[c] * g.spacing()[j];
                        Eigen::Vector4d p, q;
                        sphere_point(n, x, &p);
                        sphere_point(n, g.coordinates(g.diagonal(node, i, j, c)), &q);
                        ASSERT_LT((p - q).norm(), 1e-13);
                    }
                }
            }
        }
    }
}

TEST(Differential, ConstantField) {
    auto grid = std::make_shared<const Grid>(ManifoldSpec::torus({2 * kPi, 2 * kPi}), std::vector<int>{16, 16});
    const auto field = fill(grid, ManifoldSpec::torus({1, 1}), [](auto&) { return Eigen::Vector3d(0.3, 0.7, 0); });
    for (std::size_t node = 0; node < grid->size(); node += 7) {
        const auto d = differential_at(field, node);
        EXPECT_EQ(d.df.norm(), 0.0);
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
                EXPECT_EQ(d.second(i, j).norm(), 0.0);
            }
        }
    }
}

TEST(Differential, AffineExactAcrossWrap) {
    auto grid = std::make_shared<const Grid>(ManifoldSpec::torus({2 * kPi, 2 * kPi}), std::vector<int>{32, 32});
    const auto target = ManifoldSpec::torus({kPi, 0.6 * kPi});
    auto field = fill(grid, target, [](auto& x) { return Eigen::Vector3d(0.5 * x[0] + 0.1, 0.3 * x[1] + 2.0, 0); });
    chart_normalize_in_place(field);
    for (std::size_t node = 0; node < grid->size(); ++node) {
        const auto d = differential_at(field, node);
        EXPECT_NEAR(d.df(0, 0), 0.5, 1e-12);
        EXPECT_NEAR(d.df(1, 1), 0.3, 1e-12);
        EXPECT_NEAR(d.df(0, 1), 0.0, 1e-12);
        EXPECT_NEAR(d.df(1, 0), 0.0, 1e-12);
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
                EXPECT_NEAR(d.second(i, j).norm(), 0.0, 1e-9);
            }
        }
    }
}

TEST(Differential, SineSecondDerivative) {
    auto grid = std::make_shared<const Grid>(ManifoldSpec::torus({2 * kPi, 2 * kPi}), std::vector<int>{64, 64});
    const auto field = fill(grid, ManifoldSpec::torus({2 * kPi, 2 * kPi}),
                            [](auto& x) { return Eigen::Vector3d(0.1 * std::sin(x[0]), 0, 0); });
    const int i = 16; // x = pi/2
    const auto d = differential_at(field, grid->ravel(std::array<int, 2>{i, 5}));
    const double h = grid->spacing()[0];
    EXPECT_NEAR(d.second(0, 0)[0], -0.1, 0.1 * h * h / 12 * 1.01);
    EXPECT_NEAR(d.df(0, 0), 0.0, 1e-15);
}

TEST(Differential, NonFiniteNeighbourNamesNode) {
    auto grid = std::make_shared<const Grid>(ManifoldSpec::torus({1, 1}), std::vector<int>{8, 8});
    MapField field(grid, ManifoldSpec::torus({1, 1}));
    field.values[grid->plus(10, 0) * 2] = std::nan("");
    try {
        differential_at(field, 10);
        FAIL();
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("node 10"), std::string::npos);
    }
}

namespace {

struct Analytic {
    ChartFn f;
    std::function<Eigen::Vector3d(const std::array<double, 3>&, int)> d1;
    std::function<Eigen::Vector3d(const std::array<double, 3>&, int, int)> d2;
};

double max_error(int N, const Analytic& a) {
    auto grid = std::make_shared<const Grid>(ManifoldSpec::torus({2 * kPi, 2 * kPi}), std::vector<int>{N, N});
    const auto field = fill(grid, ManifoldSpec::torus({2 * kPi, 2 * kPi}), a.f);
    double err = 0;
    for (std::size_t node = 0; node < grid->size(); ++node) {
        const auto x = grid->coordinates(node);
        const auto d = differential_at(field, node);
        for (int i = 0; i < 2; ++i) {
            err = std::max(err, (d.df.col(i) - a.d1(x, i).head<2>()).cwiseAbs().maxCoeff());
            for (int j = 0; j < 2; ++j) {
                err = std::max(err, (d.second(i, j) - a.d2(x, i, j).head<2>()).cwiseAbs().maxCoeff());
            }
        }
    }
    return err;
}

} // namespace

TEST(Differential, SecondOrderConvergenceTorus) {
    Analytic a;
    a.f = [](auto& x) { return Eigen::Vector3d(0.3 * std::sin(x[0]) * std::cos(x[1]), 0.2 * std::sin(x[0] + 2 * x[1]), 0); };
    a.d1 = [](auto& x, int i) {
        if (i == 0) {
            return Eigen::Vector3d(0.3 * std::cos(x[0]) * std::cos(x[1]), 0.2 * std::cos(x[0] + 2 * x[1]), 0);
        }
        return Eigen::Vector3d(-0.3 * std::sin(x[0]) * std::sin(x[1]), 0.4 * std::cos(x[0] + 2 * x[1]), 0);
    };
    a.d2 = [](auto& x, int i, int j) {
        const double s = std::sin(x[0] + 2 * x[1]);
        if (i == 0 && j == 0) {
            return Eigen::Vector3d(-0.3 * std::sin(x[0]) * std::cos(x[1]), -0.2 * s, 0);
        }
        if (i == 1 && j == 1) {
            return Eigen::Vector3d(-0.3 * std::sin(x[0]) * std::cos(x[1]), -0.8 * s, 0);
        }
        return Eigen::Vector3d(-0.3 * std::cos(x[0]) * std::sin(x[1]), -0.4 * s, 0);
    };
    const double coarse = max_error(32, a);
    const double fine = max_error(64, a);
    EXPECT_GE(coarse / fine, 3.5) << coarse << " " << fine;
}

namespace {

// Sphere target: f(p) = (p + c)/|p + c| on S^2 (unit). Oracle derivatives come
// from fine fourth-order differences of the ambient map in the chart.
double sphere_error(int N) {
    const Eigen::Vector3d c(0.2, -0.1, 1.5);
    auto F = [&](const std::array<double, 3>& x) {
        const Eigen::Vector3d q = sphere_point(2, x) + c;
        return Eigen::Vector3d(q.normalized());
    };
    auto grid = std::make_shared<const Grid>(ManifoldSpec::sphere(2, 1.0), std::vector<int>{N, 2 * N});
    const auto field = fill(grid, ManifoldSpec::sphere(2, 1.0), F);
    const double e = 1e-3;
    double err = 0;
    for (std::size_t node = 0; node < grid->size(); ++node) {
        const auto x = grid->coordinates(node);
        const auto d = differential_at(field, node);
        const auto B = d.target_basis;
        auto shifted = [&](int i, double s, int j, double t) {
            auto y = x;
            y[i] += s;
            y[j] += t;
            return F(y);
        };
        for (int i = 0; i < 2; ++i) {
            const Eigen::Vector3d d1 = (-shifted(i, 2 * e, i, 0) + 8.0 * shifted(i, e, i, 0) - 8.0 * shifted(i, -e, i, 0) +
                                        shifted(i, -2 * e, i, 0)) /
                                       (12 * e);
            err = std::max(err, (d.df.col(i) - B.transpose() * d1).cwiseAbs().maxCoeff());
            const Eigen::Vector3d d2 = (-shifted(i, 2 * e, i, 0) + 16.0 * shifted(i, e, i, 0) - 30.0 * F(x) +
                                        16.0 * shifted(i, -e, i, 0) - shifted(i, -2 * e, i, 0)) /
                                       (12 * e * e);
            err = std::max(err, (d.second(i, i) - B.transpose() * d2).cwiseAbs().maxCoeff());
        }
        const Eigen::Vector3d mixed =
            (shifted(0, e, 1, e) - shifted(0, e, 1, -e) - shifted(0, -e, 1, e) + shifted(0, -e, 1, -e)) / (4 * e * e);
        err = std::max(err, (d.second(0, 1) - B.transpose() * mixed).cwiseAbs().maxCoeff());
        EXPECT_LT((d.second(0, 1) - d.second(1, 0)).norm(), 1e-10);
    }
    return err;
}

} // namespace

TEST(Differential, SecondOrderConvergenceSphere) {
    const double coarse = sphere_error(16);
    const double fine = sphere_error(32);
    EXPECT_GE(coarse / fine, 3.5) << coarse << " " << fine;
}

TEST(Differential, TangentBasisOriented) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    for (int t = 0; t < 200; ++t) {
        const Eigen::Vector3d p(nd(rng), nd(rng), nd(rng));
        const auto B = sphere_tangent_basis(p);
        EXPECT_NEAR(B.col(0).dot(p), 0, 1e-12 * p.norm());
        EXPECT_NEAR(B.col(1).dot(p), 0, 1e-12 * p.norm());
        EXPECT_NEAR(B.col(0).norm(), 1, 1e-14);
        EXPECT_NEAR(B.col(1).norm(), 1, 1e-14);
        EXPECT_NEAR(B.col(0).cross(B.col(1)).dot(p.normalized()), 1.0, 1e-14);
    }
}

TEST(Normalize, Examples) {
    auto grid = std::make_shared<const Grid>(ManifoldSpec::torus({1, 1}), std::vector<int>{8, 8});
    MapField s(grid, ManifoldSpec::sphere(2, 1.0));
    for (std::size_t node = 0; node < s.size(); ++node) {
        s.at(node)[0] = 1.02;
    }
    chart_normalize_in_place(s);
    EXPECT_NEAR(s.at(3)[0], 1.0, 1e-15);

    MapField t(grid, ManifoldSpec::torus({2.0, 3.0}));
    t.at(0)[0] = 2.3;
    t.at(0)[1] = -0.5;
    chart_normalize_in_place(t);
    EXPECT_NEAR(t.at(0)[0], 0.3, 1e-15);
    EXPECT_NEAR(t.at(0)[1], 2.5, 1e-15);

    MapField z(grid, ManifoldSpec::sphere(2, 1.0));
    EXPECT_THROW(chart_normalize_in_place(z), NumericError);
}

TEST(Normalize, Idempotent) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> nd(0, 5);
    auto grid = std::make_shared<const Grid>(ManifoldSpec::torus({1, 1}), std::vector<int>{16, 16});
    for (const auto& target : {ManifoldSpec::sphere(2, 0.37), ManifoldSpec::torus({0.7, 3.1})}) {
        MapField f(grid, target);
        for (auto& v : f.values) {
            v = nd(rng);
        }
        const auto once = chart_normalize(f);
        const auto twice = chart_normalize(once);
        EXPECT_TRUE(once == twice);
        if (target.is_sphere()) {
            for (std::size_t node = 0; node < once.size(); ++node) {
                const auto v = once.at(node);
                EXPECT_NEAR(std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]), 1 / std::sqrt(0.37), 1e-10);
            }
        } else {
            for (double v : once.values) {
                EXPECT_GE(v, 0.0);
            }
        }
    }
}

namespace {

FlowState random_state(const ManifoldSpec& domain, std::vector<int> shape, const ManifoldSpec& target,
                       unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    auto grid = std::make_shared<const Grid>(domain, std::move(shape));
    FlowState s;
    s.field = MapField(grid, target);
    for (auto& v : s.field.values) {
        v = nd(rng) * 1e3 * nd(rng);
    }
    s.time = 0.1 + 1e-17;
    s.step_index = 4711;
    return s;
}

} // namespace

TEST(Snapshot, RoundTripBitExact) {
    for (unsigned seed = 0; seed < 3; ++seed) {
        const auto state = seed == 1 ? random_state(ManifoldSpec::sphere(3, 1.0), {8, 8, 16},
                                                    ManifoldSpec::sphere(2, 0.5), seed)
                                     : random_state(ManifoldSpec::torus({2 * kPi, 1.0}), {8, 12},
                                                    ManifoldSpec::torus({kPi, 0.6 * kPi}), seed);
        std::ostringstream out;
        snapshot_write(state, out);
        const auto back = snapshot_read(out.str());
        EXPECT_TRUE(back == state);
    }
}

TEST(Snapshot, Truncated) {
    const auto state = random_state(ManifoldSpec::torus({1, 1}), {8, 8}, ManifoldSpec::torus({1, 1}), 7);
    std::ostringstream out;
    snapshot_write(state, out);
    const std::string text = out.str();
    EXPECT_THROW(snapshot_read(std::string_view(text).substr(0, text.size() / 2)), FormatError);
    EXPECT_THROW(snapshot_read(std::string_view(text).substr(0, 20)), FormatError);
    EXPECT_THROW(snapshot_read(""), FormatError);
}

TEST(Snapshot, CountMismatch) {
    std::string text = "manifold1=torus:1,1\nmanifold2=torus:1,1\nshape=16,16\ntime=0\nstep=0\n";
    for (int i = 0; i < 100; ++i) {
        text += "0.5 0.25\n";
    }
    try {
        snapshot_read(text);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("count mismatch"), std::string::npos);
        EXPECT_EQ(e.offset(), text.size());
    }
}

TEST(Snapshot, MalformedHeaderOffset) {
    const std::string text = "manifold1=torus:1,1\nmanifold2=torus:1,1\nshape=16;16\ntime=0\nstep=0\n";
    try {
        snapshot_read(text);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.offset(), text.find("shape"));
    }
}
