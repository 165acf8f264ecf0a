#include "mcf/cli.hpp"

#include "mcf/config.hpp"
#include "mcf/error.hpp"
#include "mcf/snapshot.hpp"
#include "mcf/text.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

namespace mcf {

namespace {

const char* kModule = "cli-runner";

struct Options {
    std::string config;
    std::string out_dir;
    long max_steps = -1;
    std::string resolution;
    bool verify = false;
    bool quiet = false;
};

void report(std::ostream& err, const Error& e) { err << "[" << e.module() << "] " << e.what() << "\n"; }

std::string snapshot_name(long step) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "snapshot_%08ld.txt", step);
    return buf;
}

void apply_overrides(const Options& opt, RunConfig& config) {
    if (!opt.out_dir.empty()) {
        config.out_dir = opt.out_dir;
    }
    if (opt.max_steps >= 0) {
        config.flow.max_steps = opt.max_steps;
    }
    if (!opt.resolution.empty()) {
        config.flow.resolution = parse_resolution(opt.resolution, config.flow.product.sigma1);
    }
    if (opt.verify) {
        FlowConfig& f = config.flow;
        if (f.product.flat()) {
            f.verify_flat = true;
        } else if (f.product.sigma1.is_sphere()) {
            f.verify_sphere = true;
        }
        if (f.verify_every == 0.0 && f.verify_times.empty()) {
            f.verify_every = f.t_max / 4.0;
        }
    }
}

struct Summary {
    std::string status;
    std::string message;
    std::string stop_reason;
    long steps = 0;
    std::optional<FlowState> final_state;
    std::optional<TimeSeriesRow> last_row;
    std::vector<std::pair<double, VerifierReport>> verifications;
};

void write_summary(const std::filesystem::path& path, const Summary& s) {
    std::ofstream out(path);
    if (!out) {
        throw IoError(kModule, "cannot write " + path.string());
    }
    out << "status = " << s.status << "\n";
    if (!s.message.empty()) {
        std::string one_line = s.message;
        std::replace(one_line.begin(), one_line.end(), '\n', ' ');
        out << "message = " << one_line << "\n";
    }
    if (!s.stop_reason.empty()) {
        out << "stop_reason = " << s.stop_reason << "\n";
    }
    out << "steps = " << s.steps << "\n";
    if (s.final_state) {
        out << "final_time = " << format_double(s.final_state->time) << "\n";
        out << "final_step = " << s.final_state->step_index << "\n";
    }
    if (s.last_row) {
        const auto& r = *s.last_row;
        out << "\n[final row]\n";
        out << "time = " << format_double(r.time) << "\n";
        out << "min_eta = " << format_double(r.min_eta) << "\n";
        out << "min_eta1 = " << format_double(r.min_eta1) << "\n";
        out << "max_product = " << format_double(r.max_product) << "\n";
        out << "max_A_norm_sq = " << format_double(r.max_A_norm_sq) << "\n";
        out << "energy_H = " << format_double(r.energy_H) << "\n";
        out << "area = " << format_double(r.area) << "\n";
    }
    if (!s.verifications.empty()) {
        out << "\n[verification]\n";
        for (const auto& [time, v] : s.verifications) {
            out << "t = " << format_double(time) << ": max_abs_residual = " << format_double(v.max_abs_residual)
                << ", min_slack = " << format_double(v.min_slack) << ", fitted_c = " << format_double(v.fitted_c)
                << ", tolerance = " << format_double(residual_tolerance(v.spacing, v.dt)) << "\n";
        }
    }
    if (!out) {
        throw IoError(kModule, "failed writing " + path.string());
    }
}

void print_row(std::ostream& out, const TimeSeriesRow& r) {
    std::ostringstream line;
    line << std::setprecision(6) << "t=" << r.time << " min_eta=" << r.min_eta << " min_eta1=" << r.min_eta1
         << " max_l1l2=" << r.max_product << " max|A|^2=" << r.max_A_norm_sq << " area=" << r.area;
    if (r.residual_44) {
        line << " residual=" << *r.residual_44;
    }
    if (r.residual_49) {
        line << " slack=" << *r.residual_49;
    }
    out << line.str() << "\n";
}

int execute(const Options& opt, std::ostream& out, std::ostream& err) {
    RunConfig config;
    try {
        config = load_config(opt.config);
        apply_overrides(opt, config);
        config.flow.validate();
    } catch (const Error& e) {
        report(err, e);
        return kExitConfig;
    }

    MapField initial;
    try {
        const auto grid = std::make_shared<const Grid>(config.flow.product.sigma1, config.flow.resolution);
        initial = initial_map(config.initial, grid, config.flow.product);
        std::filesystem::create_directories(config.out_dir);
    } catch (const Error& e) {
        report(err, e);
        return kExitConfig;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "[" << kModule << "] cannot create output directory: " << e.what() << "\n";
        return kExitConfig;
    }

    const auto dir = config.out_dir;
    std::ofstream csv(dir / "timeseries.csv", std::ios::binary);
    if (!csv) {
        err << "[" << kModule << "] cannot write " << (dir / "timeseries.csv").string() << "\n";
        return kExitConfig;
    }
    csv << kTimeSeriesHeader << '\n';

    Summary summary;
    RunHooks hooks;
    hooks.on_row = [&](const TimeSeriesRow& row) {
        csv << format_row(row) << '\n';
        summary.last_row = row;
        if (!opt.quiet) {
            print_row(out, row);
        }
    };
    hooks.on_step = [&](const FlowState& state) {
        summary.steps = state.step_index;
        if (config.snapshot_interval > 0 && state.step_index % config.snapshot_interval == 0) {
            snapshot_write_file(state, dir / snapshot_name(state.step_index));
        }
    };
    hooks.on_verify = [&](const FlowState& state, const VerifierReport& report) {
        summary.verifications.emplace_back(state.time, report);
    };
    hooks.on_breakdown = [&](const FlowState& last_good) {
        snapshot_write_file(last_good, dir / "last_good_snapshot.txt");
        summary.final_state = last_good;
    };

    auto fail = [&](const Error& e, const char* status, int exit_code) {
        report(err, e);
        summary.status = status;
        summary.message = e.what();
        return exit_code;
    };
    int code = kExitOk;
    try {
        const auto result = run(config.flow, initial, hooks);
        summary.status = "completed";
        summary.stop_reason = result.stop_reason;
        summary.steps = result.steps;
        summary.final_state = result.final_state;
        snapshot_write_file(result.final_state, dir / "final_snapshot.txt");
        if (!opt.quiet) {
            out << "stopped: " << result.stop_reason << " after " << result.steps << " steps at t = "
                << format_double(result.final_state.time) << "\n";
        }
    } catch (const OutOfClassError& e) {
        code = fail(e, "refused", kExitRefused);
    } catch (const FlowBreakdown& e) {
        code = fail(e, "breakdown", kExitBreakdown);
    } catch (const NumericError& e) {
        code = fail(e, "breakdown", kExitBreakdown);
    } catch (const Error& e) {
        code = fail(e, "error", kExitConfig);
    }
    csv.flush();
    try {
        write_summary(dir / "summary.txt", summary);
    } catch (const Error& e) {
        report(err, e);
        return code == kExitOk ? kExitConfig : code;
    }
    if (!csv) {
        err << "[" << kModule << "] failed writing the time series\n";
        return code == kExitOk ? kExitConfig : code;
    }
    return code;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Graphical mean curvature flow of maps between Riemannian manifolds", "mcf_flow"};
    Options opt;
    app.add_option("--config", opt.config, "Run configuration file")->required();
    app.add_option("--out-dir", opt.out_dir, "Output directory (overrides [output] dir)");
    app.add_option("--max-steps", opt.max_steps, "Step limit, 0 for none (overrides [flow] max_steps)")
        ->check(CLI::NonNegativeNumber);
    app.add_option("--resolution", opt.resolution, "Grid resolution N or N1,N2[,N3] (overrides [grid])");
    app.add_flag("--verify", opt.verify, "Run the evolution verifiers at checkpoints");
    app.add_flag("--quiet", opt.quiet, "Suppress progress output");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "[" << kModule << "] " << e.what() << "\n" << app.help();
        return kExitConfig;
    }
    try {
        return execute(opt, out, err);
    } catch (const Error& e) {
        report(err, e);
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "[" << kModule << "] " << e.what() << "\n";
        return kExitConfig;
    }
}

} // namespace mcf
