#include "fbmch/config.hpp"

#include "fbmch/csv.hpp"
#include "fbmch/error.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace fbmch {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& s) {
    const std::string t = trim(s);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(t, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("expected a number, got '" + t + "'");
    }
    if (used != t.size()) throw std::invalid_argument("expected a number, got '" + t + "'");
    return v;
}

std::uint64_t to_u64(const std::string& s) {
    const std::string t = trim(s);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
        throw std::invalid_argument("expected a nonnegative integer, got '" + t + "'");
    }
    return v;
}

std::size_t to_size(const std::string& s) { return static_cast<std::size_t>(to_u64(s)); }

bool to_bool(const std::string& s) {
    const std::string t = trim(s);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw std::invalid_argument("expected true or false, got '" + t + "'");
}

std::vector<double> to_list(const std::string& s) {
    std::vector<double> out;
    const std::string t = trim(s);
    if (t.empty()) return out;
    std::stringstream ss(t);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_double(item));
    return out;
}

std::string from_list(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += fmt17(v[i]);
    }
    return out;
}

struct Field {
    ConfigKey key;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <class Get>
Field number_field(std::string name, std::string doc, Get member) {
    return {{std::move(name), std::move(doc)},
            [member](RunConfig& c, const std::string& v) { member(c) = to_double(v); },
            [member](const RunConfig& c) { return fmt17(member(c)); }};
}

template <class Get>
Field size_field(std::string name, std::string doc, Get member) {
    return {{std::move(name), std::move(doc)},
            [member](RunConfig& c, const std::string& v) { member(c) = to_size(v); },
            [member](const RunConfig& c) { return std::to_string(member(c)); }};
}

template <class Get>
Field list_field(std::string name, std::string doc, Get member) {
    return {{std::move(name), std::move(doc)},
            [member](RunConfig& c, const std::string& v) { member(c) = to_list(v); },
            [member](const RunConfig& c) { return from_list(member(c)); }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        std::vector<Field> f;
        f.push_back(number_field("H", "Hurst index in (1/2, 1)", [](auto& c) -> auto& { return c.model.H; }));
        f.push_back(number_field("T", "time horizon", [](auto& c) -> auto& { return c.model.T; }));
        f.push_back(number_field("sigma", "noise amplitude", [](auto& c) -> auto& { return c.model.sigma; }));
        f.push_back({{"f_coeffs", "cubic coefficients c3, c2, c1, c0 of f(u)"},
                     [](RunConfig& c, const std::string& v) {
                         const auto l = to_list(v);
                         if (l.size() != 4) throw std::invalid_argument("f_coeffs needs exactly 4 values");
                         std::copy(l.begin(), l.end(), c.model.f_coeffs.begin());
                     },
                     [](const RunConfig& c) {
                         return from_list({c.model.f_coeffs.begin(), c.model.f_coeffs.end()});
                     }});
        f.push_back({{"cutoff_n", "cutoff level n (positive integer) or none"},
                     [](RunConfig& c, const std::string& v) {
                         const std::string t = trim(v);
                         if (t == "none") {
                             c.model.cutoff_n.reset();
                         } else {
                             const auto n = to_u64(t);
                             if (n > 1000000000ULL) throw std::invalid_argument("cutoff_n is too large");
                             c.model.cutoff_n = static_cast<int>(n);
                         }
                     },
                     [](const RunConfig& c) {
                         return c.model.cutoff_n ? std::to_string(*c.model.cutoff_n) : std::string("none");
                     }});
        f.push_back(list_field("u0", "initial data: empty for 0.1 cos x, one constant, or n_grid samples",
                               [](auto& c) -> auto& { return c.model.u0; }));
        f.push_back(size_field("n_modes", "spectral modes K", [](auto& c) -> auto& { return c.model.n_modes; }));
        f.push_back(size_field("n_grid", "collocation nodes M", [](auto& c) -> auto& { return c.model.n_grid; }));
        f.push_back(size_field("n_time", "time steps on [0, T]", [](auto& c) -> auto& { return c.model.n_time; }));
        f.push_back(size_field("substeps", "white-noise cells per time step",
                               [](auto& c) -> auto& { return c.model.substeps; }));
        f.push_back({{"sampler", "fBm sampler: volterra or cholesky"},
                     [](RunConfig& c, const std::string& v) { c.model.sampler = parse_sampler(trim(v)); },
                     [](const RunConfig& c) { return to_string(c.model.sampler); }});
        f.push_back({{"solver", "path solver: exponential or picard"},
                     [](RunConfig& c, const std::string& v) { c.model.solver = parse_solver(trim(v)); },
                     [](const RunConfig& c) { return to_string(c.model.solver); }});
        f.push_back(size_field("picard_kmax", "maximum Picard iterations",
                               [](auto& c) -> auto& { return c.model.picard_kmax; }));
        f.push_back(number_field("picard_tol", "Picard stopping distance",
                                 [](auto& c) -> auto& { return c.model.picard_tol; }));
        f.push_back({{"allow_nonconforming", "accept f with nonpositive leading coefficient"},
                     [](RunConfig& c, const std::string& v) { c.model.allow_nonconforming = to_bool(v); },
                     [](const RunConfig& c) { return std::string(c.model.allow_nonconforming ? "true" : "false"); }});

        f.push_back({{"seed", "master 64-bit seed"},
                     [](RunConfig& c, const std::string& v) { c.verify.seed = to_u64(v); },
                     [](const RunConfig& c) { return std::to_string(c.verify.seed); }});
        f.push_back(size_field("covariance_samples", "bundles for the noise covariance check",
                               [](auto& c) -> auto& { return c.verify.covariance_samples; }));
        f.push_back(list_field("covariance_hurst", "Hurst indices for the covariance check",
                               [](auto& c) -> auto& { return c.verify.covariance_hurst; }));
        f.push_back(size_field("covariance_n_time", "time steps of the covariance sampler",
                               [](auto& c) -> auto& { return c.verify.covariance_n_time; }));
        f.push_back(size_field("covariance_substeps", "cells per step of the covariance sampler",
                               [](auto& c) -> auto& { return c.verify.covariance_substeps; }));
        f.push_back(size_field("isometry_samples", "bundles for the isometry check",
                               [](auto& c) -> auto& { return c.verify.isometry_samples; }));
        f.push_back(list_field("delta_grid", "window lengths as fractions of scan_t",
                               [](auto& c) -> auto& { return c.verify.delta_grid; }));
        f.push_back(list_field("eps_grid", "restricted windows as fractions of the target time",
                               [](auto& c) -> auto& { return c.verify.eps_grid; }));
        f.push_back(list_field("hurst_grid", "Hurst indices for the deterministic scans",
                               [](auto& c) -> auto& { return c.verify.hurst_grid; }));
        f.push_back(number_field("scan_t", "target time of the deterministic scans",
                                 [](auto& c) -> auto& { return c.verify.scan_t; }));
        f.push_back(size_field("scan_modes", "modes in the deterministic scans",
                               [](auto& c) -> auto& { return c.verify.scan_modes; }));
        f.push_back(size_field("scan_grid", "x nodes in the deterministic scans",
                               [](auto& c) -> auto& { return c.verify.scan_grid; }));
        f.push_back(size_field("first_estimate_samples", "samples for the windowed sup-moment scan",
                               [](auto& c) -> auto& { return c.verify.first_estimate_samples; }));
        f.push_back(number_field("x_star", "target point x*", [](auto& c) -> auto& { return c.verify.x_star; }));
        f.push_back(number_field("t_star", "target time t*", [](auto& c) -> auto& { return c.verify.t_star; }));
        f.push_back(size_field("malliavin_modes", "modes in the Malliavin ensembles",
                               [](auto& c) -> auto& { return c.verify.malliavin_modes; }));
        f.push_back(size_field("malliavin_trajectories", "trajectories in the Malliavin ensembles",
                               [](auto& c) -> auto& { return c.verify.malliavin_trajectories; }));
        f.push_back(number_field("positivity_delta", "positivity threshold on the squared norm",
                                 [](auto& c) -> auto& { return c.verify.positivity_delta; }));
        f.push_back(size_field("fd_pairs", "random (source, target) pairs for finite differences",
                               [](auto& c) -> auto& { return c.verify.fd_pairs; }));
        f.push_back(size_field("density_samples", "samples of u(x*, t*)",
                               [](auto& c) -> auto& { return c.verify.density_samples; }));
        f.push_back(size_field("density_control_samples", "samples in the sigma = 0 density control",
                               [](auto& c) -> auto& { return c.verify.density_control_samples; }));
        f.push_back(size_field("kde_points", "points on the density curve",
                               [](auto& c) -> auto& { return c.verify.kde_points; }));
        f.push_back(size_field("localization_trajectories", "trajectories in the localization check",
                               [](auto& c) -> auto& { return c.verify.localization_trajectories; }));
        f.push_back(number_field("localization_sigma", "noise amplitude of the localization ensemble",
                                 [](auto& c) -> auto& { return c.verify.localization_sigma; }));
        f.push_back(list_field("cutoff_levels", "cutoff levels n for the localization check",
                               [](auto& c) -> auto& { return c.verify.cutoff_levels; }));
        return f;
    }();
    return table;
}

std::vector<std::string> settings_violations(const VerifySettings& v) {
    std::vector<std::string> out;
    auto positive_fractions = [&](const std::vector<double>& g, const char* name) {
        for (double x : g) {
            if (!(x > 0.0 && x <= 1.0)) {
                out.push_back(std::string(name) + " entries must lie in (0, 1]");
                return;
            }
        }
    };
    positive_fractions(v.delta_grid, "delta_grid");
    positive_fractions(v.eps_grid, "eps_grid");
    for (double h : v.hurst_grid) {
        if (!(h > 0.5 && h < 1.0)) out.push_back("hurst_grid entries must lie in (1/2, 1)");
    }
    for (double h : v.covariance_hurst) {
        if (!(h > 0.5 && h < 1.0)) out.push_back("covariance_hurst entries must lie in (1/2, 1)");
    }
    if (!(v.scan_t > 0.0)) out.push_back("scan_t must be positive");
    if (!(v.t_star > 0.0)) out.push_back("t_star must be positive");
    if (!(v.x_star >= 0.0 && v.x_star <= kPi)) out.push_back("x_star must lie in [0, pi]");
    if (v.scan_grid < v.scan_modes) out.push_back("scan_grid must be at least scan_modes");
    if (v.covariance_n_time % 4 != 0) out.push_back("covariance_n_time must be a multiple of 4");
    for (double n : v.cutoff_levels) {
        if (!(n >= 1.0) || n != static_cast<double>(static_cast<long long>(n))) {
            out.push_back("cutoff_levels entries must be positive integers");
            break;
        }
    }
    return out;
}

}  // namespace

bool RunConfig::operator==(const RunConfig& other) const { return effective_config(*this) == effective_config(other); }

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> k;
        for (const auto& f : fields()) k.push_back(f.key);
        return k;
    }();
    return keys;
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::vector<std::string> errors;
    std::set<std::string> seen;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = origin + ":" + std::to_string(lineno) + ": ";
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            errors.push_back(where + "expected 'key = value'");
            continue;
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto& table = fields();
        const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.key.name == key; });
        if (it == table.end()) {
            errors.push_back(where + "unknown key '" + key + "'");
            continue;
        }
        if (!seen.insert(key).second) {
            errors.push_back(where + "duplicate key '" + key + "'");
            continue;
        }
        try {
            it->set(cfg, value);
        } catch (const std::exception& e) {
            errors.push_back(where + key + ": " + e.what());
        }
    }
    for (const auto& v : cfg.model.violations()) errors.push_back(origin + ": " + v);
    for (const auto& v : settings_violations(cfg.verify)) errors.push_back(origin + ": " + v);
    if (!errors.empty()) {
        std::ostringstream os;
        os << "invalid configuration (" << errors.size() << " problem" << (errors.size() == 1 ? "" : "s") << "):";
        for (const auto& e : errors) os << "\n  - " << e;
        throw ConfigError(os.str());
    }
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

std::string effective_config(const RunConfig& config) {
    std::ostringstream os;
    for (const auto& f : fields()) os << f.key.name << " = " << f.get(config) << '\n';
    return os.str();
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t config_hash(const RunConfig& config) { return fnv1a64(effective_config(config)); }

}  // namespace fbmch
