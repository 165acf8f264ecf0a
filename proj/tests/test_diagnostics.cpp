#include "mcf/diagnostics.hpp"
#include "mcf/error.hpp"
#include "mcf/flow.hpp"
#include "mcf/initial_maps.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>
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
    return chart_normalize(field);
}

ProductSpec flat_product(double q1 = 2 * kPi, double q2 = 2 * kPi) {
    return {ManifoldSpec::torus({2 * kPi, 2 * kPi}), ManifoldSpec::torus({q1, q2})};
}

ProductSpec sphere_product() { return {ManifoldSpec::sphere(2, 1.0), ManifoldSpec::sphere(2, 1.0)}; }

std::shared_ptr<const Grid> torus_grid(int n) {
    return std::make_shared<const Grid>(ManifoldSpec::torus({2 * kPi, 2 * kPi}), std::vector<int>{n, n});
}

std::shared_ptr<const Grid> sphere_grid(int n) {
    return std::make_shared<const Grid>(ManifoldSpec::sphere(2, 1.0), std::vector<int>{n, 2 * n});
}

// Smooth periodic graph over T^2 with analytic derivatives.
struct Bump {
    double a = 0.3;
    Eigen::Vector2d f(double x, double y) const { return {a * std::sin(x) * std::cos(y), a * std::cos(x + y)}; }
    Eigen::Matrix2d df(double x, double y) const {
        Eigen::Matrix2d d;
        d << a * std::cos(x) * std::cos(y), -a * std::sin(x) * std::sin(y), -a * std::sin(x + y),
            -a * std::sin(x + y);
        return d;
    }
    // second(i, j) as a vector in the target
    Eigen::Vector2d second(double x, double y, int i, int j) const {
        if (i == 0 && j == 0) {
            return {-a * std::sin(x) * std::cos(y), -a * std::cos(x + y)};
        }
        if (i == 1 && j == 1) {
            return {-a * std::sin(x) * std::cos(y), -a * std::cos(x + y)};
        }
        return {-a * std::cos(x) * std::sin(y), -a * std::cos(x + y)};
    }
};

MapField bump_field(std::shared_ptr<const Grid> grid, const Bump& b, double shift = 0.0) {
    return fill(grid, ManifoldSpec::torus({2 * kPi, 2 * kPi}), [&](const auto& x) {
        const auto v = b.f(x[0] - shift, x[1]);
        return Eigen::Vector3d(v[0], v[1], 0.0);
    });
}

TimeSeriesRow row_at(double t, double m) {
    TimeSeriesRow r;
    r.time = t;
    r.min_eta = m;
    r.min_eta1 = m;
    r.area = 1.0;
    return r;
}

} // namespace

TEST(LaplaceBeltrami, ConstantFunctionVanishes) {
    const auto product = flat_product();
    const auto grid = torus_grid(32);
    const auto field = bump_field(grid, Bump{});
    const std::vector<double> u(grid->size(), 3.7);
    for (double v : laplace_beltrami(u, field, product)) {
        EXPECT_NEAR(v, 0.0, 1e-12);
    }

    const auto sp = sphere_product();
    const auto sg = sphere_grid(16);
    InitialMapSpec spec{.name = "sphere-harmonic", .epsilon = 0.3};
    const auto sfield = initial_map(spec, sg, sp);
    const std::vector<double> w(sg->size(), -1.25);
    for (double v : laplace_beltrami(w, sfield, sp)) {
        EXPECT_NEAR(v, 0.0, 1e-11);
    }
}

TEST(LaplaceBeltrami, FlatEigenfunctionSecondOrder) {
    const auto product = flat_product();
    double previous = 0.0;
    for (int n : {16, 32, 64}) {
        const auto grid = torus_grid(n);
        const auto field = fill(grid, product.sigma2, [](const auto&) { return Eigen::Vector3d(1.0, 2.0, 0.0); });
        std::vector<double> u(grid->size());
        for (std::size_t node = 0; node < grid->size(); ++node) {
            u[node] = std::sin(grid->coordinates(node)[0]);
        }
        const auto lap = laplace_beltrami(u, field, product);
        double worst = 0.0;
        for (std::size_t node = 0; node < grid->size(); ++node) {
            worst = std::max(worst, std::abs(lap[node] + u[node]));
        }
        EXPECT_LT(worst, 0.02);
        if (previous > 0.0) {
            EXPECT_GE(previous / worst, 3.5);
        }
        previous = worst;
    }
}

TEST(LaplaceBeltrami, CurvedGraphMatchesAnalyticOperator) {
    const auto product = flat_product();
    const Bump bump;
    auto u_of = [](double x, double y) { return std::cos(x) + 0.5 * std::sin(2 * y); };
    double previous = 0.0;
    for (int n : {16, 32, 64}) {
        const auto grid = torus_grid(n);
        const auto field = bump_field(grid, bump);
        std::vector<double> u(grid->size());
        for (std::size_t node = 0; node < grid->size(); ++node) {
            const auto x = grid->coordinates(node);
            u[node] = u_of(x[0], x[1]);
        }
        const auto lap = laplace_beltrami(u, field, product);
        double worst = 0.0;
        for (std::size_t node = 0; node < grid->size(); ++node) {
            const auto x = grid->coordinates(node);
            const Eigen::Matrix2d d = bump.df(x[0], x[1]);
            const Eigen::Matrix2d g = Eigen::Matrix2d::Identity() + d.transpose() * d;
            const Eigen::Matrix2d gi = g.inverse();
            const Eigen::Vector2d du(-std::sin(x[0]), std::cos(2 * x[1]));
            Eigen::Matrix2d ddu;
            ddu << -std::cos(x[0]), 0.0, 0.0, -2.0 * std::sin(2 * x[1]);
            // Gamma^k_ij = g^{kl} <d_l f, d_ij f>
            double exact = 0.0;
            for (int i = 0; i < 2; ++i) {
                for (int j = 0; j < 2; ++j) {
                    double term = ddu(i, j);
                    const Eigen::Vector2d fij = bump.second(x[0], x[1], i, j);
                    for (int k = 0; k < 2; ++k) {
                        for (int l = 0; l < 2; ++l) {
                            term -= gi(k, l) * d.col(l).dot(fij) * du[k];
                        }
                    }
                    exact += gi(i, j) * term;
                }
            }
            worst = std::max(worst, std::abs(lap[node] - exact));
        }
        if (previous > 0.0) {
            EXPECT_GE(previous / worst, 3.5) << n;
        }
        previous = worst;
    }
    EXPECT_LT(previous, 1e-2);
}

// Rows next to the poles converge at first order: the colatitude and longitude
// parts of the operator each grow like 1/sin(theta) there and cancel only in
// the exact operator. Away from the poles the order is two.
TEST(LaplaceBeltrami, SphereFirstHarmonic) {
    const auto product = sphere_product();
    double prev_band = 0.0;
    double prev_all = 0.0;
    for (int n : {32, 64, 128}) {
        const auto grid = sphere_grid(n);
        const auto field = initial_map(InitialMapSpec{}, grid, product);
        std::vector<double> u(grid->size());
        for (std::size_t node = 0; node < grid->size(); ++node) {
            const auto x = grid->coordinates(node);
            u[node] = std::sin(x[0]) * std::cos(x[1]) + std::cos(x[0]);
        }
        const auto lap = laplace_beltrami(u, field, product);
        double band = 0.0;
        double all = 0.0;
        for (std::size_t node = 0; node < grid->size(); ++node) {
            const double err = std::abs(lap[node] + 2.0 * u[node]);
            all = std::max(all, err);
            if (std::abs(grid->coordinates(node)[0] - kPi / 2) <= kPi / 3) {
                band = std::max(band, err);
            }
        }
        if (prev_band > 0.0) {
            EXPECT_GE(prev_band / band, 3.5) << n;
            EXPECT_GE(prev_all / all, 1.8) << n;
        }
        prev_band = band;
        prev_all = all;
    }
    EXPECT_LT(prev_band, 5e-4);
    EXPECT_LT(prev_all, 1e-2);
}

TEST(Monitor, ConstantMap) {
    const auto product = flat_product();
    const auto grid = torus_grid(16);
    FlowState state{0.0, initial_map(InitialMapSpec{}, grid, product), 0};
    const auto row = monitor(state, product);
    EXPECT_EQ(row.min_eta, 1.0);
    EXPECT_EQ(row.min_eta1, 1.0);
    EXPECT_EQ(row.max_A_norm_sq, 0.0);
    EXPECT_EQ(row.energy_H, 0.0);
    EXPECT_EQ(row.max_product, 0.0);
    EXPECT_NEAR(row.area, 4 * kPi * kPi, 1e-12);
    EXPECT_FALSE(row.residual_44);
    EXPECT_FALSE(row.residual_49);
}

TEST(Monitor, AffineMapClosedForms) {
    const auto product = flat_product(kPi, kPi);
    const auto grid = torus_grid(16);
    InitialMapSpec spec{.name = "affine", .A = {0.5, 0.0, 0.0, 0.5}};
    FlowState state{0.0, initial_map(spec, grid, product), 0};
    const auto row = monitor(state, product);
    EXPECT_NEAR(row.min_eta1, 0.8, 1e-12);
    EXPECT_NEAR(row.min_eta, 0.6, 1e-12);
    EXPECT_NEAR(row.max_product, 0.25, 1e-12);
    EXPECT_NEAR(row.max_A_norm_sq, 0.0, 1e-20);
    EXPECT_NEAR(row.area, 1.25 * 4 * kPi * kPi, 1e-10);
}

TEST(Monitor, SphereArea) {
    const auto product = sphere_product();
    const auto grid = std::make_shared<const Grid>(product.sigma1, std::vector<int>{128, 256});
    FlowState state{0.0, initial_map(InitialMapSpec{}, grid, product), 0};
    const auto row = monitor(state, product);
    EXPECT_NEAR(row.area, 4 * kPi, 1e-3);
    EXPECT_GT(row.area, 0.0);
}

TEST(Monitor, MaxProductMatchesNodes) {
    const auto product = flat_product();
    const auto grid = torus_grid(24);
    FlowState state{0.0, bump_field(grid, Bump{}), 0};
    const auto analysis = analyze(state.field, product);
    double expected = 0.0;
    double min_eta = 2.0;
    for (const auto& a : analysis.nodes) {
        expected = std::max(expected, a.gf.product);
        min_eta = std::min(min_eta, a.gf.eta);
    }
    const auto row = monitor(state, analysis);
    EXPECT_EQ(row.max_product, expected);
    EXPECT_EQ(row.min_eta, min_eta);
    EXPECT_EQ(analysis.nodes[analysis.argmin_eta].gf.eta, min_eta);
}

TEST(VerifyFlat, StationaryAffineMap) {
    const auto product = flat_product(kPi, 0.6 * kPi);
    const auto grid = torus_grid(32);
    InitialMapSpec spec{.name = "affine", .A = {0.5, 0.0, 0.0, 0.3}, .b = {0.1, 0.2}};
    const auto field = initial_map(spec, grid, product);
    const std::vector<FlowState> states{{0.0, field, 0}, {1e-3, field, 1}, {2e-3, field, 2}};
    const auto report = verify_evolution_flat(states, product);
    EXPECT_LE(report.max_abs_residual, 1e-10);
    EXPECT_EQ(report.residuals.size(), grid->size());
    EXPECT_FALSE(report.order);
    for (int s : report.det_sign) {
        EXPECT_EQ(s, 1);
    }
}

TEST(VerifyFlat, ConstantMap) {
    const auto product = flat_product();
    const auto field = initial_map(InitialMapSpec{}, torus_grid(16), product);
    const std::vector<FlowState> states{{0.0, field, 0}, {0.5, field, 1}, {1.0, field, 2}};
    EXPECT_EQ(verify_evolution_flat(states, product).max_abs_residual, 0.0);
}

TEST(VerifyFlat, RejectsBadInputs) {
    const auto product = flat_product();
    const auto a = initial_map(InitialMapSpec{}, torus_grid(16), product);
    const auto b = initial_map(InitialMapSpec{}, torus_grid(32), product);
    std::vector<FlowState> states{{0.0, a, 0}, {0.5, b, 1}, {1.0, a, 2}};
    EXPECT_THROW(verify_evolution_flat(states, product), ValidationError);
    states = {{0.0, a, 0}, {0.5, a, 1}, {1.2, a, 2}};
    EXPECT_THROW(verify_evolution_flat(states, product), ValidationError);
    states = {{0.0, a, 0}, {0.5, a, 1}};
    EXPECT_THROW(verify_evolution_flat(states, product), ValidationError);
    const auto sp = sphere_product();
    const auto s = initial_map(InitialMapSpec{}, sphere_grid(8), sp);
    const std::vector<FlowState> sphere_states{{0.0, s, 0}, {0.5, s, 1}, {1.0, s, 2}};
    EXPECT_THROW(verify_evolution_flat(sphere_states, sp), ValidationError);
}

TEST(VerifySphere, ConstantMapHasZeroSlack) {
    const auto product = sphere_product();
    const auto field = initial_map(InitialMapSpec{}, sphere_grid(16), product);
    const std::vector<FlowState> states{{0.0, field, 0}, {0.5, field, 1}, {1.0, field, 2}};
    const auto report = verify_inequality_sphere(states, product);
    EXPECT_EQ(report.min_slack, 0.0);
    EXPECT_EQ(report.max_abs_residual, 0.0);
}

// The graph of f(x - c t) is the graph of f translated rigidly by (c t, 0), so
// along the normal flow eta1 changes only through the tangential part V^T of
// V = (c, 0): d/dt eta1 = -<grad eta1, V^T> = -c g^{1k} d_k eta1.
TEST(AdvectionCorrection, RigidlyTranslatedGraph) {
    const auto product = flat_product();
    const Bump bump;
    const double c = 0.7;
    const double tau = 1e-4;
    auto eta1_exact = [&](double x, double y) {
        const Eigen::Matrix2d d = bump.df(x, y);
        return 1.0 / std::sqrt((Eigen::Matrix2d::Identity() + d.transpose() * d).determinant());
    };
    double previous = 0.0;
    double raw_error = 0.0;
    for (int n : {32, 64}) {
        const auto grid = torus_grid(n);
        const FlowState s0{-tau, bump_field(grid, bump, -c * tau), 0};
        const FlowState s1{0.0, bump_field(grid, bump, 0.0), 1};
        const FlowState s2{tau, bump_field(grid, bump, c * tau), 2};
        const auto a0 = analyze(s0.field, product);
        const auto a1 = analyze(s1.field, product);
        const auto a2 = analyze(s2.field, product);
        std::vector<double> e0, e2;
        for (std::size_t node = 0; node < grid->size(); ++node) {
            e0.push_back(a0.nodes[node].gf.eta1);
            e2.push_back(a2.nodes[node].gf.eta1);
        }
        const auto lhs = normal_time_derivative(s0, s1, s2, a1, e0, e2);
        double worst = 0.0;
        raw_error = 0.0;
        for (std::size_t node = 0; node < grid->size(); ++node) {
            const auto x = grid->coordinates(node);
            const Eigen::Matrix2d d = bump.df(x[0], x[1]);
            const Eigen::Matrix2d gi = (Eigen::Matrix2d::Identity() + d.transpose() * d).inverse();
            const double eps = 1e-5;
            const Eigen::Vector2d grad((eta1_exact(x[0] + eps, x[1]) - eta1_exact(x[0] - eps, x[1])) / (2 * eps),
                                       (eta1_exact(x[0], x[1] + eps) - eta1_exact(x[0], x[1] - eps)) / (2 * eps));
            const double expected = -c * gi.row(0).dot(grad);
            worst = std::max(worst, std::abs(lhs[node] - expected));
            raw_error = std::max(raw_error, std::abs((e2[node] - e0[node]) / (2 * tau) - expected));
        }
        if (previous > 0.0) {
            EXPECT_GE(previous / worst, 3.0);
        }
        previous = worst;
    }
    EXPECT_LT(previous, 2e-3);
    // Without the correction the fixed-coordinate derivative does not converge.
    EXPECT_GT(raw_error, 20.0 * previous);
}

TEST(VerifyFlat, ResidualSmallAlongFlow) {
    const auto product = flat_product(kPi, 0.6 * kPi);
    double previous = 0.0;
    std::vector<VerifierReport> reports;
    for (int n : {32, 64}) {
        const auto grid = torus_grid(n);
        InitialMapSpec spec{.name = "perturbed-affine", .A = {0.5, 0.0, 0.0, 0.3}, .epsilon = 0.2};
        FlowState s0{0.0, initial_map(spec, grid, product), 0};
        const double dt = stable_dt(s0, product, 0.25);
        const auto s1 = advance(s0, dt, product);
        const auto s2 = advance(s1, dt, product);
        const std::vector<FlowState> states{s0, s1, s2};
        const auto report = verify_evolution_flat(states, product);
        EXPECT_LT(report.max_abs_residual, residual_tolerance(report.spacing, report.dt) * 10);
        reports.push_back(report);
        previous = report.max_abs_residual;
    }
    EXPECT_GT(previous, 0.0);
    const auto order = measured_order(reports);
    ASSERT_TRUE(order);
    EXPECT_GE(*order, 1.5);
}

TEST(MeasuredOrder, Synthetic) {
    VerifierReport a, b;
    a.spacing = 0.1;
    a.max_abs_residual = 4e-3;
    b.spacing = 0.05;
    b.max_abs_residual = 1e-3;
    const std::vector<VerifierReport> two{a, b};
    EXPECT_NEAR(*measured_order(two), 2.0, 1e-12);
    const std::vector<VerifierReport> one{a};
    EXPECT_FALSE(measured_order(one));
}

TEST(TimeSeries, EmptyIsHeaderOnly) {
    std::ostringstream out;
    emit_timeseries(std::span<const TimeSeriesRow>{}, out);
    EXPECT_EQ(out.str(), std::string(kTimeSeriesHeader) + "\n");
    EXPECT_TRUE(read_timeseries(out.str()).empty());
}

TEST(TimeSeries, SingleRowRoundTrip) {
    TimeSeriesRow row;
    row.time = 0.1 + 0.2;
    row.min_eta = 1.0 / 3.0;
    row.min_eta1 = std::nextafter(1.0, 0.0);
    row.max_product = 1e-300;
    row.max_A_norm_sq = 2.5e-17;
    row.energy_H = 12345.678901234567;
    row.area = 4 * kPi;
    row.residual_44 = -3.0e-9;
    std::ostringstream out;
    const std::vector<TimeSeriesRow> rows{row};
    emit_timeseries(rows, out);
    const std::string text = out.str();
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
    EXPECT_NE(text.find(",-3e-09,\n"), std::string::npos) << text;
    const auto back = read_timeseries(text);
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back[0], row);
    EXPECT_FALSE(back[0].residual_49);
}

TEST(TimeSeries, RejectsMalformedInput) {
    EXPECT_THROW(read_timeseries("time,bogus\n"), FormatError);
    EXPECT_THROW(read_timeseries(""), FormatError);
    const std::string header = std::string(kTimeSeriesHeader) + "\n";
    try {
        read_timeseries(header + "1,2,3\n");
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.offset(), header.size());
    }
    EXPECT_THROW(read_timeseries(header + "1,2,x,4,5,6,7,,\n"), FormatError);
}

TEST(TimeSeries, UnwritableDestination) {
    EXPECT_THROW(emit_timeseries(std::span<const TimeSeriesRow>{}, std::filesystem::path("/nonexistent/dir/ts.csv")),
                 IoError);
}

TEST(Monotone, ViolationMeasure) {
    const std::vector<TimeSeriesRow> up{row_at(0, 0.5), row_at(1, 0.6), row_at(2, 0.7)};
    EXPECT_EQ(monotone_violation(up, [](const auto& r) { return r.min_eta; }, 0.0), 0.0);
    const std::vector<TimeSeriesRow> dip{row_at(0, 0.5), row_at(1, 0.4995), row_at(2, 0.7)};
    EXPECT_NEAR(monotone_violation(dip, [](const auto& r) { return r.min_eta; }, 0.0), 5e-4, 1e-15);
    EXPECT_EQ(monotone_violation(dip, [](const auto& r) { return r.min_eta; }, 1e-3), 0.0);
}

TEST(Monotone, ReactionConstantRecovered) {
    // m' = c m (1 - m^2) has m(t)^2 = 1 / (1 + K e^{-2ct}).
    const double c = 0.8;
    const double K = 1.0 / (0.6 * 0.6) - 1.0;
    std::vector<TimeSeriesRow> rows;
    for (int k = 0; k <= 200; ++k) {
        const double t = 0.01 * k;
        rows.push_back(row_at(t, 1.0 / std::sqrt(1.0 + K * std::exp(-2 * c * t))));
    }
    const auto fitted = fit_reaction_constant(rows);
    ASSERT_TRUE(fitted);
    EXPECT_NEAR(*fitted, c, 1e-3);
    const std::vector<TimeSeriesRow> flat{row_at(0, 1.0), row_at(1, 1.0)};
    EXPECT_FALSE(fit_reaction_constant(flat));
}

TEST(Invariants, FlatRunMonotoneAndEnergyIdentity) {
    const auto product = flat_product(kPi, 0.6 * kPi);
    FlowConfig config;
    config.product = product;
    config.resolution = {48, 48};
    config.t_max = 0.5;
    config.monitor_interval = 20;
    const auto grid = torus_grid(48);
    InitialMapSpec spec{.name = "perturbed-affine", .A = {0.5, 0.0, 0.0, 0.3}, .epsilon = 0.2};
    const auto result = run(config, initial_map(spec, grid, product));
    const auto& rows = result.rows;
    ASSERT_GT(rows.size(), 5u);
    EXPECT_EQ(monotone_violation(rows, [](const auto& r) { return r.min_eta; }, 1e-3), 0.0);
    EXPECT_EQ(monotone_violation(rows, [](const auto& r) { return r.min_eta1; }, 1e-3), 0.0);
    EXPECT_EQ(monotone_violation(rows, [](const auto& r) { return -r.max_product; }, 1e-3), 0.0);
    EXPECT_EQ(monotone_violation(rows, [](const auto& r) { return -r.area; }, 0.0), 0.0);
    EXPECT_GE(rows.back().min_eta, rows.front().min_eta - 1e-3);
    for (std::size_t k = 2; k < rows.size(); ++k) {
        const double slope = (rows[k].area - rows[k - 2].area) / (rows[k].time - rows[k - 2].time);
        EXPECT_NEAR(-slope / rows[k - 1].energy_H, 1.0, 0.05) << rows[k - 1].time;
    }
}
