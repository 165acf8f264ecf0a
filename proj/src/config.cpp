#include "mcf/config.hpp"

#include "mcf/error.hpp"
#include "mcf/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace mcf {

namespace {

const char* kModule = "cli-runner";

const std::vector<std::pair<std::string, std::vector<std::string>>> kLayout = {
    {"manifold", {"domain", "domain_dim", "domain_periods", "k1", "target", "target_periods", "k2"}},
    {"grid", {"resolution"}},
    {"flow",
     {"cfl_safety", "t_max", "stop_A_norm", "stop_eta1", "min_eta", "max_steps", "polar_filter", "monitor_interval",
      "verify_flat", "verify_sphere", "verify_every", "verify_times"}},
    {"initial", {"map", "A", "b", "epsilon", "q0"}},
    {"output", {"dir", "snapshot_interval"}},
};

const std::vector<std::string>* section_keys(const std::string& name) {
    for (const auto& [section, keys] : kLayout) {
        if (section == name) {
            return &keys;
        }
    }
    return nullptr;
}

struct Entry {
    std::string value;
    int line = 0;
};

class Reader {
public:
    explicit Reader(std::string_view text) { scan(text); }

    std::vector<std::string> errors;

    const Entry* find(const std::string& section, const std::string& key) const {
        const auto s = entries_.find(section);
        if (s == entries_.end()) {
            return nullptr;
        }
        const auto e = s->second.find(key);
        return e == s->second.end() ? nullptr : &e->second;
    }

    void fail(const std::string& section, const std::string& key, const std::string& what) {
        const Entry* e = find(section, key);
        std::string msg = e ? "line " + std::to_string(e->line) + ": " : "";
        errors.push_back(msg + "[" + section + "] " + key + ": " + what);
    }

    void fail_section(const std::string& section, const std::string& what) {
        errors.push_back("[" + section + "] " + what);
    }

    bool scalar(const std::string& section, const std::string& key, double& out) {
        const Entry* e = find(section, key);
        if (!e) {
            return false;
        }
        if (const auto v = parse_scalar(e->value)) {
            out = *v;
            return true;
        }
        fail(section, key, "expected a number, got '" + e->value + "'");
        return false;
    }

    bool integer(const std::string& section, const std::string& key, long& out) {
        const Entry* e = find(section, key);
        if (!e) {
            return false;
        }
        if (const auto v = parse_integer(e->value)) {
            out = static_cast<long>(*v);
            return true;
        }
        fail(section, key, "expected an integer, got '" + e->value + "'");
        return false;
    }

    bool boolean(const std::string& section, const std::string& key, bool& out) {
        const Entry* e = find(section, key);
        if (!e) {
            return false;
        }
        if (e->value == "true" || e->value == "false") {
            out = e->value == "true";
            return true;
        }
        fail(section, key, "expected true or false, got '" + e->value + "'");
        return false;
    }

    bool list(const std::string& section, const std::string& key, std::vector<double>& out) {
        const Entry* e = find(section, key);
        if (!e) {
            return false;
        }
        std::vector<double> values;
        for (const auto part : split(e->value, ',')) {
            const auto v = parse_scalar(part);
            if (!v) {
                fail(section, key, "expected a comma-separated list of numbers, got '" + e->value + "'");
                return false;
            }
            values.push_back(*v);
        }
        out = std::move(values);
        return true;
    }

    bool word(const std::string& section, const std::string& key, std::string& out) {
        const Entry* e = find(section, key);
        if (!e) {
            return false;
        }
        out = e->value;
        return true;
    }

private:
    void scan(std::string_view text) {
        std::map<std::string, std::map<std::string, Entry>> seen;
        std::string section;
        int line_no = 0;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            const auto end = text.find('\n', pos);
            std::string_view line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
            pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
            ++line_no;
            if (const auto hash = line.find('#'); hash != std::string_view::npos) {
                line = line.substr(0, hash);
            }
            line = trim(line);
            if (line.empty()) {
                continue;
            }
            const std::string where = "line " + std::to_string(line_no) + ": ";
            if (line.front() == '[') {
                if (line.back() != ']') {
                    errors.push_back(where + "malformed section header '" + std::string(line) + "'");
                    section.clear();
                    continue;
                }
                section = std::string(trim(line.substr(1, line.size() - 2)));
                if (!section_keys(section)) {
                    errors.push_back(where + "unknown section [" + section + "]");
                    section.clear();
                }
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string_view::npos) {
                errors.push_back(where + "expected key = value, got '" + std::string(line) + "'");
                continue;
            }
            const std::string key(trim(line.substr(0, eq)));
            const std::string value(trim(line.substr(eq + 1)));
            if (section.empty()) {
                errors.push_back(where + "key '" + key + "' outside a known section");
                continue;
            }
            const auto* keys = section_keys(section);
            if (std::find(keys->begin(), keys->end(), key) == keys->end()) {
                errors.push_back(where + "unknown key '" + key + "' in [" + section + "]");
                continue;
            }
            if (value.empty()) {
                errors.push_back(where + "key '" + key + "' has an empty value");
                continue;
            }
            auto& slot = seen[section];
            if (const auto prior = slot.find(key); prior != slot.end()) {
                errors.push_back(where + "duplicate key '" + key + "' in [" + section + "] (first set on line " +
                                 std::to_string(prior->second.line) + ")");
                continue;
            }
            slot[key] = Entry{value, line_no};
        }
        entries_ = std::move(seen);
    }

    std::map<std::string, std::map<std::string, Entry>> entries_;
};

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool read_kind(Reader& r, const std::string& key, ManifoldKind& kind) {
    std::string word = "torus";
    r.word("manifold", key, word);
    if (word == "torus") {
        kind = ManifoldKind::FlatTorus;
    } else if (word == "sphere") {
        kind = ManifoldKind::RoundSphere;
    } else {
        r.fail("manifold", key, "expected torus or sphere, got '" + word + "'");
        return false;
    }
    return true;
}

void read_manifold(Reader& r, RunConfig& config, bool& ok) {
    ManifoldKind domain_kind{};
    ManifoldKind target_kind{};
    ok = read_kind(r, "domain", domain_kind) && ok;
    ok = read_kind(r, "target", target_kind) && ok;
    if (!ok) {
        return;
    }

    long dim = 2;
    const bool dim_given = r.integer("manifold", "domain_dim", dim);
    if (dim_given && dim != 2 && dim != 3) {
        r.fail("manifold", "domain_dim", "must be 2 or 3");
        ok = false;
    }
    ManifoldSpec domain;
    if (domain_kind == ManifoldKind::FlatTorus) {
        std::vector<double> periods;
        if (r.list("manifold", "domain_periods", periods)) {
            if (periods.size() != 2 && periods.size() != 3) {
                r.fail("manifold", "domain_periods", "needs 2 or 3 periods");
                ok = false;
            } else if (dim_given && static_cast<long>(periods.size()) != dim) {
                r.fail("manifold", "domain_periods", "count does not match domain_dim");
                ok = false;
            }
        } else {
            periods.assign(static_cast<std::size_t>(dim), kTwoPi);
        }
        if (r.find("manifold", "k1")) {
            r.fail("manifold", "k1", "only applies to a sphere domain");
            ok = false;
        }
        domain = ManifoldSpec::torus(periods);
    } else {
        double k1 = 1.0;
        r.scalar("manifold", "k1", k1);
        if (r.find("manifold", "domain_periods")) {
            r.fail("manifold", "domain_periods", "only applies to a torus domain");
            ok = false;
        }
        domain = ManifoldSpec::sphere(static_cast<int>(dim), k1);
    }

    ManifoldSpec target;
    if (target_kind == ManifoldKind::FlatTorus) {
        std::vector<double> periods{kTwoPi, kTwoPi};
        if (r.list("manifold", "target_periods", periods) && periods.size() != 2) {
            r.fail("manifold", "target_periods", "needs exactly 2 periods");
            ok = false;
        }
        if (r.find("manifold", "k2")) {
            r.fail("manifold", "k2", "only applies to a sphere target");
            ok = false;
        }
        target = ManifoldSpec::torus(periods);
    } else {
        double k2 = 1.0;
        r.scalar("manifold", "k2", k2);
        if (r.find("manifold", "target_periods")) {
            r.fail("manifold", "target_periods", "only applies to a torus target");
            ok = false;
        }
        target = ManifoldSpec::sphere(2, k2);
    }
    config.flow.product = ProductSpec{domain, target};
    if (!ok) {
        return;
    }
    try {
        config.flow.product.validate();
    } catch (const Error& e) {
        r.fail_section("manifold", e.what());
        ok = false;
    }
}

void read_grid(Reader& r, RunConfig& config, bool manifold_ok) {
    std::string text = "64";
    r.word("grid", "resolution", text);
    if (!manifold_ok) {
        return;
    }
    try {
        config.flow.resolution = parse_resolution(text, config.flow.product.sigma1);
    } catch (const Error& e) {
        r.fail("grid", "resolution", e.what());
    }
}

void read_flow(Reader& r, FlowConfig& flow) {
    auto check = [&](const char* key, bool given, bool valid, const char* what) {
        if (given && !valid) {
            r.fail("flow", key, what);
        }
    };
    bool g = r.scalar("flow", "cfl_safety", flow.cfl_safety);
    check("cfl_safety", g, flow.cfl_safety > 0.0 && flow.cfl_safety <= 1.0, "must lie in (0, 1]");
    g = r.scalar("flow", "t_max", flow.t_max);
    check("t_max", g, flow.t_max > 0.0, "must be positive");
    g = r.scalar("flow", "stop_A_norm", flow.stop_A_norm);
    check("stop_A_norm", g, flow.stop_A_norm > 0.0, "must be positive");
    g = r.scalar("flow", "stop_eta1", flow.stop_eta1);
    check("stop_eta1", g, flow.stop_eta1 > 0.0, "must be positive");
    g = r.scalar("flow", "min_eta", flow.min_eta);
    check("min_eta", g, flow.min_eta > 0.0 && flow.min_eta < 1.0, "must lie in (0, 1)");
    g = r.integer("flow", "max_steps", flow.max_steps);
    check("max_steps", g, flow.max_steps >= 0, "must be >= 0");
    long interval = flow.monitor_interval;
    g = r.integer("flow", "monitor_interval", interval);
    check("monitor_interval", g, interval >= 1 && interval <= 1000000, "must lie in [1, 1000000]");
    if (g && interval >= 1 && interval <= 1000000) {
        flow.monitor_interval = static_cast<int>(interval);
    }
    r.boolean("flow", "polar_filter", flow.polar_filter);
    r.boolean("flow", "verify_flat", flow.verify_flat);
    r.boolean("flow", "verify_sphere", flow.verify_sphere);
    g = r.scalar("flow", "verify_every", flow.verify_every);
    check("verify_every", g, flow.verify_every >= 0.0, "must be >= 0");
    g = r.list("flow", "verify_times", flow.verify_times);
    check("verify_times", g,
          std::all_of(flow.verify_times.begin(), flow.verify_times.end(), [](double t) { return t > 0.0; }),
          "times must be positive");
}

void read_initial(Reader& r, RunConfig& config, bool manifold_ok) {
    InitialMapSpec& spec = config.initial;
    r.word("initial", "map", spec.name);
    const auto& names = initial_map_names();
    if (std::find(names.begin(), names.end(), spec.name) == names.end()) {
        std::string known;
        for (const auto& n : names) {
            known += (known.empty() ? "" : ", ") + n;
        }
        r.fail("initial", "map", "unknown map '" + spec.name + "' (known: " + known + ")");
        return;
    }
    const bool lists_ok = (!r.find("initial", "A") || r.list("initial", "A", spec.A)) &
                          (!r.find("initial", "b") || r.list("initial", "b", spec.b)) &
                          (!r.find("initial", "q0") || r.list("initial", "q0", spec.q0));
    const bool eps_ok = !r.find("initial", "epsilon") || r.scalar("initial", "epsilon", spec.epsilon);
    if (!manifold_ok || !lists_ok || !eps_ok) {
        return;
    }
    // Build the map on the coarsest grid to surface parameter errors now.
    try {
        const ManifoldSpec& domain = config.flow.product.sigma1;
        std::vector<int> coarse(static_cast<std::size_t>(domain.dim), 8);
        const auto grid = std::make_shared<const Grid>(domain, coarse);
        initial_map(spec, grid, config.flow.product);
    } catch (const Error& e) {
        r.fail("initial", "map", e.what());
    }
}

void read_output(Reader& r, RunConfig& config) {
    std::string dir;
    if (r.word("output", "dir", dir)) {
        config.out_dir = dir;
    }
    if (r.integer("output", "snapshot_interval", config.snapshot_interval) && config.snapshot_interval < 0) {
        r.fail("output", "snapshot_interval", "must be >= 0");
    }
}

std::string ints(const std::vector<int>& values) {
    std::string out;
    for (std::size_t k = 0; k < values.size(); ++k) {
        out += (k ? "," : "") + std::to_string(values[k]);
    }
    return out;
}

} // namespace

std::optional<double> parse_scalar(std::string_view text) {
    text = trim(text);
    std::optional<double> value;
    if (text.size() >= 2 && text.substr(text.size() - 2) == "pi") {
        std::string_view factor = trim(text.substr(0, text.size() - 2));
        if (!factor.empty() && factor.back() == '*') {
            factor = trim(factor.substr(0, factor.size() - 1));
            if (factor.empty()) {
                return std::nullopt;
            }
        }
        if (factor.empty() || factor == "-" || factor == "+") {
            value = factor == "-" ? -1.0 : 1.0;
        } else {
            value = parse_double(factor);
        }
        if (value) {
            *value *= std::numbers::pi;
        }
    } else {
        value = parse_double(text);
    }
    if (value && !std::isfinite(*value)) {
        return std::nullopt;
    }
    return value;
}

std::vector<int> parse_resolution(std::string_view text, const ManifoldSpec& domain) {
    std::vector<int> counts;
    for (const auto part : split(text, ',')) {
        const auto v = parse_integer(trim(part));
        if (!v || *v < 1 || *v > 1 << 20) {
            throw ConfigError(kModule, "bad resolution '" + std::string(text) + "'");
        }
        counts.push_back(static_cast<int>(*v));
    }
    if (counts.size() == 1) {
        const int n = counts[0];
        counts.assign(static_cast<std::size_t>(domain.dim), n);
        if (domain.is_sphere()) {
            counts.back() = 2 * n;
        }
    }
    Grid(domain, counts);
    return counts;
}

RunConfig parse_config(std::string_view text) {
    Reader r(text);
    RunConfig config;
    bool manifold_ok = true;
    read_manifold(r, config, manifold_ok);
    read_grid(r, config, manifold_ok);
    read_flow(r, config.flow);
    read_initial(r, config, manifold_ok);
    read_output(r, config);
    if (r.errors.empty()) {
        try {
            config.flow.validate();
        } catch (const Error& e) {
            r.errors.push_back(std::string("[flow] ") + e.what());
        }
    }
    if (!r.errors.empty()) {
        std::string msg = std::to_string(r.errors.size()) + " config error(s):";
        for (const auto& e : r.errors) {
            msg += "\n  " + e;
        }
        throw ConfigError(kModule, msg);
    }
    return config;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(kModule, "cannot read config file " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

std::string serialize_config(const RunConfig& config) {
    const FlowConfig& f = config.flow;
    const ManifoldSpec& d = f.product.sigma1;
    const ManifoldSpec& t = f.product.sigma2;
    auto boolean = [](bool b) { return b ? "true" : "false"; };
    std::ostringstream out;
    out << "[manifold]\n";
    out << "domain = " << (d.is_torus() ? "torus" : "sphere") << "\n";
    out << "domain_dim = " << d.dim << "\n";
    if (d.is_torus()) {
        out << "domain_periods = " << join_doubles(d.periods) << "\n";
    } else {
        out << "k1 = " << format_double(d.curvature) << "\n";
    }
    out << "target = " << (t.is_torus() ? "torus" : "sphere") << "\n";
    if (t.is_torus()) {
        out << "target_periods = " << join_doubles(t.periods) << "\n";
    } else {
        out << "k2 = " << format_double(t.curvature) << "\n";
    }
    out << "\n[grid]\nresolution = " << ints(f.resolution) << "\n";
    out << "\n[flow]\n";
    out << "cfl_safety = " << format_double(f.cfl_safety) << "\n";
    out << "t_max = " << format_double(f.t_max) << "\n";
    out << "stop_A_norm = " << format_double(f.stop_A_norm) << "\n";
    out << "stop_eta1 = " << format_double(f.stop_eta1) << "\n";
    out << "min_eta = " << format_double(f.min_eta) << "\n";
    out << "max_steps = " << f.max_steps << "\n";
    out << "polar_filter = " << boolean(f.polar_filter) << "\n";
    out << "monitor_interval = " << f.monitor_interval << "\n";
    out << "verify_flat = " << boolean(f.verify_flat) << "\n";
    out << "verify_sphere = " << boolean(f.verify_sphere) << "\n";
    out << "verify_every = " << format_double(f.verify_every) << "\n";
    if (!f.verify_times.empty()) {
        out << "verify_times = " << join_doubles(f.verify_times) << "\n";
    }
    const InitialMapSpec& s = config.initial;
    out << "\n[initial]\nmap = " << s.name << "\n";
    if (!s.A.empty()) {
        out << "A = " << join_doubles(s.A) << "\n";
    }
    if (!s.b.empty()) {
        out << "b = " << join_doubles(s.b) << "\n";
    }
    out << "epsilon = " << format_double(s.epsilon) << "\n";
    if (!s.q0.empty()) {
        out << "q0 = " << join_doubles(s.q0) << "\n";
    }
    out << "\n[output]\ndir = " << config.out_dir.string() << "\n";
    out << "snapshot_interval = " << config.snapshot_interval << "\n";
    return out.str();
}

} // namespace mcf
