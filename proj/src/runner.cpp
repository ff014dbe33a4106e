#include "fbmch/runner.hpp"

#include "fbmch/csv.hpp"
#include "fbmch/error.hpp"

#include "json.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

namespace fbmch {

namespace {

namespace fs = std::filesystem;

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

class OutputDir {
public:
    explicit OutputDir(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

    const fs::path& root() const { return root_; }

    void write(const std::string& name, const std::string& content) {
        std::ofstream out(root_ / name, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + (root_ / name).string());
        out << content;
        files_.push_back({name, hex64(fnv1a64(content))});
    }

    // Registers a file written by another routine.
    void adopt(const std::string& name) {
        std::ifstream in(root_ / name, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        files_.push_back({name, hex64(fnv1a64(ss.str()))});
    }

    const std::vector<EmittedFile>& files() const { return files_; }

private:
    fs::path root_;
    std::vector<EmittedFile> files_;
};

struct Context {
    const RunConfig& cfg;
    const RunOptions& opts;
    std::ostream& log;
    OutputDir& out;
    std::vector<ScanReport>& reports;

    VerifySettings settings() const {
        VerifySettings s = cfg.verify;
        s.workers = opts.workers;
        return s;
    }

    void emit(ScanReport rep) {
        std::ostringstream csv, json;
        rep.write_csv(csv);
        rep.write_summary(json);
        out.write(rep.name + ".csv", csv.str());
        out.write(rep.name + ".json", json.str());
        log << rep.one_line() << '\n';
        reports.push_back(std::move(rep));
    }
};

std::string fbm_paths_csv(const NoiseBundle& b) {
    std::ostringstream os;
    os << 't';
    for (std::size_t k = 0; k < b.n_modes; ++k) os << ",k" << k;
    os << '\n';
    for (std::size_t m = 0; m < b.time_grid.size(); ++m) {
        os << fmt17(b.time_grid[m]);
        for (std::size_t k = 0; k < b.n_modes; ++k) {
            os << ',' << fmt17(b.fbm_paths(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m)));
        }
        os << '\n';
    }
    return os.str();
}

std::string index_name(const char* stem, std::size_t i, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%06zu.%s", stem, i, ext);
    return buf;
}

void cmd_noise_sample(Context& c) {
    const NoiseSampler sampler(c.cfg.model.noise());
    const std::size_t n = c.opts.samples.value_or(1);
    for (std::size_t i = 0; i < n; ++i) {
        const NoiseBundle b = sampler.sample_bundle(c.cfg.verify.seed, i);
        const std::string bin = index_name("bundle", i, "bin");
        write_bundle(b, (c.out.root() / bin).string());
        c.out.adopt(bin);
        c.out.write(index_name("fbm_paths", i, "csv"), fbm_paths_csv(b));
    }
    c.log << "wrote " << n << " noise bundle(s)\n";
}

void write_trajectory(Context& c, const Solver& solver, const TrajectoryRecord& rec, const std::string& stem) {
    std::ostringstream grid, coeffs;
    write_trajectory_grid_csv(solver, rec, grid);
    write_trajectory_coeff_csv(rec, coeffs);
    c.out.write(stem + "_grid.csv", grid.str());
    c.out.write(stem + "_coeffs.csv", coeffs.str());
}

void cmd_solve(Context& c) {
    const Solver solver(c.cfg.model);
    const NoiseBundle b = NoiseSampler(c.cfg.model.noise()).sample_bundle(c.cfg.verify.seed, 0);
    const TrajectoryRecord rec =
        c.cfg.model.solver == SolverKind::picard ? solver.picard(b).record : solver.solve(b);
    write_trajectory(c, solver, rec, "trajectory");
    ScanReport rep;
    rep.name = "solve";
    rep.samples = 1;
    rep.metrics["sup_norm"] = rec.sup_norm;
    rep.metrics["omega_level"] = rec.omega_level;
    rep.metrics["in_omega"] = rec.omega_n_flag ? 1.0 : 0.0;
    rep.add_check("trajectory finite", std::isfinite(rec.sup_norm));
    c.emit(std::move(rep));
}

void cmd_picard(Context& c) {
    const Solver solver(c.cfg.model);
    const NoiseBundle b = NoiseSampler(c.cfg.model.noise()).sample_bundle(c.cfg.verify.seed, 0);
    write_trajectory(c, solver, solver.picard(b).record, "picard");
    c.emit(check_picard_decay(c.cfg.model, b));
}

void cmd_malliavin(Context& c) {
    const VerifySettings s = c.settings();
    const ModelConfig mc = malliavin_config(c.cfg.model, s);
    const Solver solver(mc);
    MalliavinOptions o;
    o.eps_fractions = s.eps_grid;
    const MalliavinEngine engine(solver, o);
    const TrajectoryRecord rec = solver.solve(NoiseSampler(mc.noise()).sample_bundle(s.seed, 0));
    const MalliavinGrid g = engine.norm_at(rec, s.x_star, s.t_star);
    std::ostringstream os;
    g.write_csv(os);
    c.out.write("malliavin_grid.csv", os.str());
    c.emit(check_malliavin_engine(c.cfg.model, s));
}

void run_isometry(Context& c) {
    const VerifySettings s = c.settings();
    for (double H : s.covariance_hurst) c.emit(verify_covariance(c.cfg.model, s, H));
    c.emit(verify_isometry(c.cfg.model, s));
}

void run_second_estimates(Context& c) {
    const VerifySettings s = c.settings();
    for (double H : s.hurst_grid) {
        c.emit(scan_second_estimate(H, s.scan_t, s.delta_grid, s.scan_modes, s.scan_grid));
    }
}

void run_first_estimates(Context& c) {
    const VerifySettings s = c.settings();
    c.emit(scan_first_estimate(c.cfg.model, s, 2));
    c.emit(scan_first_estimate(c.cfg.model, s, 4));
}

void run_lower_bound(Context& c) {
    const VerifySettings s = c.settings();
    for (double H : s.hurst_grid) c.emit(check_lower_bound(H, s.scan_t, s.eps_grid, s.scan_modes, c.cfg.model.sigma));
}

void run_malliavin_ensembles(Context& c, bool positivity, bool restricted) {
    const VerifySettings s = c.settings();
    const MalliavinEnsemble ens = run_malliavin_ensemble(c.cfg.model, s);
    if (positivity) c.emit(check_positivity(ens, s.positivity_delta));
    if (restricted) c.emit(scan_restricted_malliavin(ens));
}

void run_density(Context& c) {
    const VerifySettings s = c.settings();
    DensityCurve curve;
    ScanReport rep = density_report(c.cfg.model, s, &curve);
    if (!curve.x.empty()) {
        std::ostringstream os;
        curve.write_csv(os);
        c.out.write("density_curve.csv", os.str());
    }
    c.emit(std::move(rep));

    // The degenerate sigma = 0 ensemble must be rejected by the same atom test.
    ModelConfig zero = c.cfg.model;
    zero.sigma = 0.0;
    VerifySettings cs = s;
    cs.density_samples = s.density_control_samples;
    ScanReport control = density_from_samples(sample_point_values(zero, cs), s.kde_points);
    control.name = "density_control_sigma0";
    bool rejected = false;
    for (auto& ch : control.checks) {
        if (ch.name.rfind("largest atom weight", 0) == 0) rejected = !ch.pass;
        ch.asserted = false;
    }
    control.add_check("sigma = 0 control rejected by the atom test", rejected);
    c.emit(std::move(control));
}

void run_localization(Context& c) {
    ModelConfig m = c.cfg.model;
    m.sigma = c.cfg.verify.localization_sigma;
    c.emit(check_localization(m, c.settings()));
}

void run_picard_check(Context& c) {
    const NoiseBundle b = NoiseSampler(c.cfg.model.noise()).sample_bundle(c.cfg.verify.seed, 0);
    c.emit(check_picard_decay(c.cfg.model, b));
}

const std::map<std::string, std::function<void(Context&)>>& command_table() {
    static const std::map<std::string, std::function<void(Context&)>> table{
        {"noise-sample", cmd_noise_sample},
        {"solve", cmd_solve},
        {"picard", cmd_picard},
        {"malliavin", cmd_malliavin},
        {"verify-isometry", run_isometry},
        {"verify-exponents",
         [](Context& c) {
             run_second_estimates(c);
             run_first_estimates(c);
             run_malliavin_ensembles(c, false, true);
         }},
        {"verify-lower-bound", run_lower_bound},
        {"verify-positivity",
         [](Context& c) {
             run_malliavin_ensembles(c, true, false);
             c.emit(check_malliavin_engine(c.cfg.model, c.settings()));
         }},
        {"density", run_density},
        {"verify-all",
         [](Context& c) {
             run_isometry(c);
             run_second_estimates(c);
             run_first_estimates(c);
             run_lower_bound(c);
             run_malliavin_ensembles(c, true, true);
             c.emit(check_malliavin_engine(c.cfg.model, c.settings()));
             run_picard_check(c);
             run_localization(c);
             run_density(c);
         }},
    };
    return table;
}

}  // namespace

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"noise-sample",       "solve",           "picard",
                                                "malliavin",          "verify-isometry", "verify-exponents",
                                                "verify-lower-bound", "verify-positivity", "density",
                                                "verify-all"};
    return names;
}

std::string usage_text() {
    std::ostringstream os;
    os << "usage: fbmch <command> [--config PATH] [--seed U64] [--workers N] [--out DIR]\n"
          "             [--H h] [--sigma s] [--n-modes K] [--n-time N] [--samples N]\n"
          "commands:";
    for (const auto& n : command_names()) os << ' ' << n;
    os << '\n';
    return os.str();
}

void apply_sample_override(RunConfig& config, std::size_t samples) {
    VerifySettings& v = config.verify;
    v.covariance_samples = samples;
    v.isometry_samples = samples;
    v.first_estimate_samples = samples;
    v.malliavin_trajectories = samples;
    v.density_samples = samples;
    v.localization_trajectories = samples;
}

RunResult dispatch(const std::string& command, const RunConfig& config, const RunOptions& options, std::ostream& log) {
    RunResult result;
    const auto& table = command_table();
    const auto it = table.find(command);
    if (it == table.end()) {
        log << "unknown command '" << command << "'\n" << usage_text();
        result.exit_code = 2;
        return result;
    }
    const std::string started = utc_now();
    const std::string hash = hex64(config_hash(config));
    const fs::path dir = fs::path(options.out_dir) / (hash + "-" + std::to_string(config.verify.seed)) / command;
    OutputDir out(dir);
    out.write("effective_config.txt", effective_config(config));

    Context ctx{config, options, log, out, result.reports};
    it->second(ctx);

    bool pass = true;
    nlohmann::ordered_json summary = nlohmann::ordered_json::array();
    for (const auto& r : result.reports) {
        pass = pass && r.pass();
        summary.push_back({{"name", r.name}, {"pass", r.pass()}});
    }
    nlohmann::ordered_json sj{{"command", command}, {"pass", pass}, {"reports", summary}};
    out.write("summary.json", sj.dump(2) + "\n");
    result.exit_code = pass ? 0 : 1;

    nlohmann::ordered_json manifest;
    manifest["tool"] = "fbmch";
    manifest["version"] = kToolVersion;
    manifest["command"] = command;
    manifest["command_line"] = options.command_line;
    manifest["seed"] = config.verify.seed;
    manifest["workers"] = options.workers;
    manifest["config_hash"] = hash;
    manifest["effective_config"] = effective_config(config);
    manifest["started"] = started;
    manifest["finished"] = utc_now();
    manifest["pass"] = pass;
    manifest["exit_code"] = result.exit_code;
    nlohmann::ordered_json files = nlohmann::ordered_json::array();
    for (const auto& f : out.files()) files.push_back({{"name", f.name}, {"fnv1a64", f.checksum}});
    manifest["files"] = files;
    std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';

    result.files = out.files();
    result.run_dir = dir.string();
    log << (pass ? "all asserted checks passed" : "some asserted checks failed") << " -> " << dir.string() << '\n';
    return result;
}

}  // namespace fbmch
