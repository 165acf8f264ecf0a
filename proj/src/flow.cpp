#include "mcf/flow.hpp"

#include "mcf/error.hpp"
#include "mcf/text.hpp"

#include <Eigen/Eigenvalues>
#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace mcf {

namespace {

const char* kModule = "flow-engine";

std::string where(std::size_t node, double time) {
    return "node " + std::to_string(node) + ", time " + format_double(time);
}

// Largest eigenvalue of a symmetric n x n block (n = 2 or 3).
double largest_eigenvalue(const Eigen::Matrix3d& s, int n) {
    if (n == 2) {
        const double tr = s(0, 0) + s(1, 1);
        const double diff = s(0, 0) - s(1, 1);
        return 0.5 * (tr + std::sqrt(diff * diff + 4.0 * s(0, 1) * s(0, 1)));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es;
    es.computeDirect(s, Eigen::EigenvaluesOnly);
    return es.eigenvalues()[2];
}

double chart_min_spacing(const Grid& grid) {
    return *std::min_element(grid.spacing().begin(), grid.spacing().end());
}

double ring_radius(const Grid& grid, std::size_t ring) {
    const int n = grid.dim();
    const auto x = grid.coordinates(ring * static_cast<std::size_t>(grid.shape()[n - 1]));
    double r = 1.0;
    for (int m = 0; m < n - 1; ++m) {
        r *= std::sin(x[m]);
    }
    return r;
}

struct Evaluation {
    std::vector<double> rhs;
    double dt_bound = std::numeric_limits<double>::infinity();
};

Evaluation evaluate(const MapField& field, const ProductSpec& product, double time, bool filter, bool want_bound) {
    const Grid& grid = *field.grid;
    const int n = grid.dim();
    const int comps = field.components();
    const auto& h = grid.spacing();
    const bool sphere_domain = product.sigma1.is_sphere();
    const bool use_filter = filter && sphere_domain;
    const int lon = grid.longitude_axis();
    const std::size_t ring_size = sphere_domain ? static_cast<std::size_t>(grid.shape()[lon]) : 1;

    Evaluation out;
    out.rhs.assign(field.values.size(), 0.0);
    std::size_t current_ring = std::numeric_limits<std::size_t>::max();
    double lon_sin = 1.0;

    for (std::size_t node = 0; node < grid.size(); ++node) {
        const auto x = grid.coordinates(node);
        const MetricData g1 = geometry_at(product.sigma1, std::span<const double>(x.data(), n));
        DifferentialData d;
        try {
            d = differential_at(field, node);
        } catch (const NumericError& e) {
            throw FlowBreakdown(kModule, std::string(e.what()) + " (" + where(node, time) + ")");
        }

        Eigen::Matrix3d g = g1.g;
        g.topLeftCorner(n, n) += d.df.leftCols(n).transpose() * d.df.leftCols(n);
        Eigen::Matrix3d ginv = Eigen::Matrix3d::Zero();
        double det = 0.0;
        if (n == 2) {
            det = g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0);
            ginv(0, 0) = g(1, 1) / det;
            ginv(1, 1) = g(0, 0) / det;
            ginv(0, 1) = ginv(1, 0) = -g(0, 1) / det;
        } else {
            det = g.determinant();
            ginv = g.inverse();
        }
        if (!(det > 0.0) || !std::isfinite(det) || !(g(0, 0) > 0.0)) {
            throw FlowBreakdown(kModule, "induced metric is not positive definite at " + where(node, time));
        }

        Eigen::Vector2d v = Eigen::Vector2d::Zero();
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                Eigen::Vector2d term = d.second_derivs[i][j];
                if (sphere_domain) {
                    for (int k = 0; k < n; ++k) {
                        term -= g1.christoffel[k](i, j) * d.df.col(k);
                    }
                }
                v += ginv(i, j) * term;
            }
        }
        double* r = out.rhs.data() + node * comps;
        if (comps == 2) {
            r[0] = v[0];
            r[1] = v[1];
        } else {
            const Eigen::Vector3d amb = d.target_basis * v;
            r[0] = amb[0];
            r[1] = amb[1];
            r[2] = amb[2];
        }

        if (want_bound) {
            Eigen::Matrix3d s = Eigen::Matrix3d::Zero();
            Eigen::Vector3d root = Eigen::Vector3d::Zero();
            for (int a = 0; a < n; ++a) {
                root[a] = std::sqrt(g1.g(a, a));
            }
            for (int a = 0; a < n; ++a) {
                for (int b = 0; b < n; ++b) {
                    s(a, b) = root[a] * ginv(a, b) * root[b];
                }
            }
            const double rho = largest_eigenvalue(s, n);
            if (!(rho > 0.0) || !std::isfinite(rho)) {
                throw FlowBreakdown(kModule, "degenerate metric while sizing the step at " + where(node, time));
            }
            if (use_filter) {
                const std::size_t ring = node / ring_size;
                if (ring != current_ring) {
                    current_ring = ring;
                    lon_sin = std::sin(polar_filter_modes(grid, ring) * h[lon] / 2.0);
                }
            }
            double worst = std::numeric_limits<double>::infinity();
            for (int a = 0; a < n; ++a) {
                double phys = h[a] * root[a];
                if (use_filter && a == lon) {
                    phys /= lon_sin;
                }
                worst = std::min(worst, phys * phys);
            }
            out.dt_bound = std::min(out.dt_bound, worst / (2.0 * n * rho));
        }
    }

    if (use_filter) {
        apply_polar_filter(grid, out.rhs, comps);
        if (comps == 3) {
            for (std::size_t node = 0; node < grid.size(); ++node) {
                const auto p = field.at(node);
                const Eigen::Vector3d unit = Eigen::Vector3d(p[0], p[1], p[2]).normalized();
                double* r = out.rhs.data() + node * 3;
                Eigen::Map<Eigen::Vector3d> t(r);
                t -= unit.dot(t) * unit;
            }
        }
    }
    return out;
}

void check_finite(const MapField& field, double time) {
    const int c = field.components();
    for (std::size_t i = 0; i < field.values.size(); ++i) {
        if (!std::isfinite(field.values[i])) {
            throw FlowBreakdown(kModule, "non-finite value after update at " + where(i / c, time));
        }
    }
}

// Midpoint step from a field whose first-stage tendency is already known.
MapField midpoint_step(const MapField& field, const std::vector<double>& k1, double dt, double time,
                       const ProductSpec& product, bool filter) {
    MapField half = field;
    for (std::size_t i = 0; i < half.values.size(); ++i) {
        half.values[i] += 0.5 * dt * k1[i];
    }
    check_finite(half, time);
    try {
        chart_normalize_in_place(half);
    } catch (const NumericError& e) {
        throw FlowBreakdown(kModule, e.what());
    }
    const auto k2 = evaluate(half, product, time + 0.5 * dt, filter, false).rhs;
    MapField next = field;
    for (std::size_t i = 0; i < next.values.size(); ++i) {
        next.values[i] += dt * k2[i];
    }
    check_finite(next, time + dt);
    try {
        chart_normalize_in_place(next);
    } catch (const NumericError& e) {
        throw FlowBreakdown(kModule, e.what());
    }
    return next;
}

} // namespace

void FlowConfig::validate() const {
    product.validate();
    if (!(cfl_safety > 0.0 && cfl_safety <= 1.0)) {
        throw ValidationError(kModule, "cfl_safety must lie in (0, 1]");
    }
    if (!(t_max > 0.0) || !std::isfinite(t_max)) {
        throw ValidationError(kModule, "t_max must be positive");
    }
    if (!(stop_A_norm > 0.0) || !(stop_eta1 > 0.0)) {
        throw ValidationError(kModule, "stop thresholds must be positive");
    }
    if (!(min_eta > 0.0 && min_eta < 1.0)) {
        throw ValidationError(kModule, "min_eta must lie in (0, 1)");
    }
    if (max_steps < 0 || monitor_interval < 1) {
        throw ValidationError(kModule, "max_steps must be >= 0 and monitor_interval >= 1");
    }
    if (verify_flat && !product.flat()) {
        throw ValidationError(kModule, "verify_flat needs flat factors");
    }
    if (verify_sphere && !product.sigma1.is_sphere()) {
        throw ValidationError(kModule, "verify_sphere needs a sphere domain");
    }
    if (verify_every < 0.0) {
        throw ValidationError(kModule, "verify_every must be >= 0");
    }
}

int polar_filter_modes(const Grid& grid, std::size_t ring) {
    const int lon = grid.longitude_axis();
    const int count = grid.shape()[lon];
    const double h = grid.spacing()[lon];
    const double ratio = std::min(1.0, ring_radius(grid, ring) * h / chart_min_spacing(grid));
    const int modes = static_cast<int>(std::floor(2.0 / h * std::asin(ratio) + 1e-9));
    return std::clamp(modes, 1, count / 2);
}

namespace {

// r2c and c2r plans for one ring of interleaved components.
class RingTransform {
public:
    RingTransform(int count, int components)
        : count_(count), components_(components), real_(fftw_alloc_real(static_cast<std::size_t>(count) * components)),
          spectrum_(fftw_alloc_complex(static_cast<std::size_t>(count / 2 + 1) * components)) {
        forward_ = fftw_plan_many_dft_r2c(1, &count_, components, real_, nullptr, components, 1, spectrum_, nullptr,
                                          components, 1, FFTW_ESTIMATE);
        backward_ = fftw_plan_many_dft_c2r(1, &count_, components, spectrum_, nullptr, components, 1, real_, nullptr,
                                           components, 1, FFTW_ESTIMATE);
    }
    RingTransform(const RingTransform&) = delete;
    RingTransform& operator=(const RingTransform&) = delete;
    ~RingTransform() {
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(backward_);
        fftw_free(real_);
        fftw_free(spectrum_);
    }

    // Keep longitude modes 0..keep of one ring in place.
    void low_pass(double* ring, int keep) {
        const std::size_t n = static_cast<std::size_t>(count_) * components_;
        std::copy(ring, ring + n, real_);
        fftw_execute(forward_);
        for (int m = keep + 1; m <= count_ / 2; ++m) {
            for (int c = 0; c < components_; ++c) {
                spectrum_[m * components_ + c][0] = 0.0;
                spectrum_[m * components_ + c][1] = 0.0;
            }
        }
        fftw_execute(backward_);
        for (std::size_t k = 0; k < n; ++k) {
            ring[k] = real_[k] / count_;
        }
    }

private:
    int count_;
    int components_;
    double* real_;
    fftw_complex* spectrum_;
    fftw_plan forward_ = nullptr;
    fftw_plan backward_ = nullptr;
};

} // namespace

void apply_polar_filter(const Grid& grid, std::vector<double>& tendency, int components) {
    const int lon = grid.longitude_axis();
    if (lon < 0) {
        return;
    }
    const int count = grid.shape()[lon];
    const std::size_t rings = grid.size() / count;
    RingTransform transform(count, components);
    for (std::size_t ring = 0; ring < rings; ++ring) {
        const int keep = polar_filter_modes(grid, ring);
        if (keep < count / 2) {
            transform.low_pass(tendency.data() + ring * count * components, keep);
        }
    }
}

std::vector<double> mcf_rhs(const FlowState& state, const ProductSpec& product) {
    return evaluate(state.field, product, state.time, false, false).rhs;
}

double stable_dt(const FlowState& state, const ProductSpec& product, double cfl_safety, bool polar_filter) {
    if (!(cfl_safety > 0.0 && cfl_safety <= 1.0)) {
        throw ValidationError(kModule, "cfl_safety must lie in (0, 1]");
    }
    return cfl_safety * evaluate(state.field, product, state.time, polar_filter, true).dt_bound;
}

FlowState advance(const FlowState& state, double dt, const ProductSpec& product, const StepOptions& options) {
    if (!(dt > 0.0)) {
        throw ValidationError(kModule, "time step must be positive");
    }
    const auto first = evaluate(state.field, product, state.time, options.polar_filter, true);
    const double limit = options.cfl_safety * first.dt_bound;
    if (dt > limit * (1.0 + 1e-12)) {
        throw ValidationError(kModule, "time step " + format_double(dt) + " exceeds the stable step " +
                                           format_double(limit));
    }
    FlowState next;
    next.field = midpoint_step(state.field, first.rhs, dt, state.time, product, options.polar_filter);
    next.time = state.time + dt;
    next.step_index = state.step_index + 1;
    return next;
}

RunResult run(const FlowConfig& config, const MapField& initial, const RunHooks& hooks) {
    config.validate();
    const ProductSpec& product = config.product;
    if (!(initial.grid->spec() == product.sigma1) || !(initial.target == product.sigma2)) {
        throw ValidationError(kModule, "initial field does not match the product specification");
    }

    RunResult result;
    FlowState state;
    state.field = chart_normalize(initial);

    auto emit = [&](const TimeSeriesRow& row) {
        result.rows.push_back(row);
        if (hooks.on_row) {
            hooks.on_row(row);
        }
    };
    auto stop_for = [&](const TimeSeriesRow& row) -> const char* {
        if (row.max_A_norm_sq < config.stop_A_norm) {
            return kStopANorm;
        }
        if (1.0 - row.min_eta1 < config.stop_eta1) {
            return kStopEta1;
        }
        return nullptr;
    };

    const auto first = analyze(state.field, product);
    const auto row0 = monitor(state, first);
    if (!(row0.min_eta >= config.min_eta) || !(row0.max_product < 1.0)) {
        std::ostringstream msg;
        msg << "initial map refused: outside the area-decreasing class, which requires 1 - |lambda1 lambda2| > 0 "
               "with margin min eta >= "
            << config.min_eta << "; found min eta = " << row0.min_eta << " at node " << first.argmin_eta
            << ", max lambda1 lambda2 = " << row0.max_product;
        throw OutOfClassError(kModule, msg.str());
    }
    emit(row0);
    if (const char* reason = stop_for(row0)) {
        result.stop_reason = reason;
        result.final_state = state;
        return result;
    }

    std::vector<double> checkpoints = config.verify_times;
    if ((config.verify_flat || config.verify_sphere) && config.verify_every > 0.0) {
        for (long k = 1; k * config.verify_every < config.t_max * (1.0 - 1e-12); ++k) {
            checkpoints.push_back(k * config.verify_every);
        }
    }
    if (!(config.verify_flat || config.verify_sphere)) {
        checkpoints.clear();
    }
    std::sort(checkpoints.begin(), checkpoints.end());
    std::size_t next_check = 0;

    const double time_eps = 1e-12 * config.t_max;
    bool monitored_last = true;

    // Advance by dt with a known first-stage evaluation; returns false when the
    // run must stop after this step.
    auto step = [&](const Evaluation& eval, double dt) {
        FlowState next;
        try {
            next.field = midpoint_step(state.field, eval.rhs, dt, state.time, product, config.polar_filter);
        } catch (const FlowBreakdown&) {
            if (hooks.on_breakdown) {
                hooks.on_breakdown(state);
            }
            throw;
        }
        next.time = state.time + dt;
        next.step_index = state.step_index + 1;
        state = std::move(next);
        ++result.steps;
        if (hooks.on_step) {
            hooks.on_step(state);
        }
    };
    auto evaluate_or_fail = [&]() {
        try {
            return evaluate(state.field, product, state.time, config.polar_filter, true);
        } catch (const FlowBreakdown&) {
            if (hooks.on_breakdown) {
                hooks.on_breakdown(state);
            }
            throw;
        }
    };
    auto observe = [&]() -> const char* {
        const auto row = monitor(state, analyze(state.field, product));
        emit(row);
        monitored_last = true;
        return stop_for(row);
    };

    while (true) {
        if (config.max_steps > 0 && result.steps >= config.max_steps) {
            result.stop_reason = kStopSteps;
            break;
        }
        if (state.time >= config.t_max - time_eps) {
            result.stop_reason = kStopTime;
            break;
        }
        while (next_check < checkpoints.size() && checkpoints[next_check] <= state.time) {
            ++next_check;
        }
        auto eval = evaluate_or_fail();
        const double bound = config.cfl_safety * eval.dt_bound;
        const char* reason = nullptr;

        if (next_check < checkpoints.size() && state.time + 1.5 * bound >= checkpoints[next_check]) {
            const double tc = checkpoints[next_check++];
            const double dt_v = 0.5 * bound;
            const double land = tc - dt_v - state.time;
            if (land > 1e-3 * bound) {
                step(eval, land);
                eval = evaluate_or_fail();
            }
            std::vector<FlowState> triple{state};
            step(eval, dt_v);
            triple.push_back(state);
            eval = evaluate_or_fail();
            step(eval, dt_v);
            triple.push_back(state);

            VerifierReport report = config.verify_flat ? verify_evolution_flat(triple, product)
                                                       : verify_inequality_sphere(triple, product);
            if (hooks.on_verify) {
                hooks.on_verify(triple[1], report);
            }
            auto row = monitor(triple[1], analyze(triple[1].field, product));
            if (config.verify_flat) {
                row.residual_44 = report.max_abs_residual;
            } else {
                row.residual_49 = report.min_slack;
            }
            emit(row);
            result.verifications.push_back(std::move(report));
            monitored_last = false;
            if (stop_for(row)) {
                // Stop decisions are taken on the current state.
                reason = observe();
            }
        } else {
            const double dt = std::min(bound, config.t_max - state.time);
            step(eval, dt);
            monitored_last = false;
            if (state.step_index % config.monitor_interval == 0) {
                reason = observe();
            }
        }
        if (reason) {
            result.stop_reason = reason;
            break;
        }
    }
    if (!monitored_last) {
        observe();
    }
    result.final_state = state;
    return result;
}

} // namespace mcf
