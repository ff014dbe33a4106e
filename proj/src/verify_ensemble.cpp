#include "fbmch/csv.hpp"
#include "fbmch/error.hpp"
#include "fbmch/kernel.hpp"
#include "fbmch/parallel.hpp"
#include "fbmch/verify.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <sstream>

namespace fbmch {

namespace {

constexpr std::uint64_t kFiniteDifferenceStream = 0xfd00'0001ULL;

std::string fmt_short(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

std::size_t steps_to(double t, double dt) {
    const double n = t / dt;
    const auto r = static_cast<std::size_t>(std::llround(n));
    if (r == 0 || std::abs(n - static_cast<double>(r)) > 1e-9 * n) {
        throw DomainError("target time " + fmt_short(t) + " is not on the time grid");
    }
    return r;
}

ModelConfig truncated_horizon(const ModelConfig& config, double t_star) {
    ModelConfig c = config;
    c.n_time = steps_to(t_star, config.dt());
    c.T = t_star;
    return c;
}

}  // namespace

ModelConfig malliavin_config(const ModelConfig& config, const VerifySettings& settings) {
    ModelConfig c = truncated_horizon(config, settings.t_star);
    if (settings.malliavin_modes > 0 && settings.malliavin_modes != c.n_modes) {
        if (c.u0.size() > 1) throw ConfigError("sampled u0 cannot be reused with a different mode count");
        c.n_modes = settings.malliavin_modes;
        c.n_grid = 2 * settings.malliavin_modes;
    }
    return c;
}

MalliavinEnsemble run_malliavin_ensemble(const ModelConfig& config, const VerifySettings& settings) {
    MalliavinEnsemble ens;
    ens.config = malliavin_config(config, settings);
    ens.x_star = settings.x_star;
    ens.t_star = settings.t_star;
    const Solver solver(ens.config);
    MalliavinOptions opts;
    opts.eps_fractions = settings.eps_grid;
    const MalliavinEngine engine(solver, opts);
    const SourcePlan plan = engine.plan(settings.t_star);
    ens.eps = plan.eps;
    const NoiseSampler sampler(ens.config.noise());

    struct Row {
        double norm = 0.0;
        std::vector<double> restricted;
    };
    const auto rows = parallel_map<Row>(settings.malliavin_trajectories, settings.workers, [&](std::size_t n) {
        const TrajectoryRecord tr = solver.solve(sampler.sample_bundle(settings.seed, n));
        const MalliavinGrid g = engine.norm_at(tr, settings.x_star, plan);
        Row r;
        r.norm = g.squared_norm;
        for (Eigen::Index e = 0; e < g.restricted_profile.rows(); ++e) {
            r.restricted.push_back(g.restricted_profile.row(e).maxCoeff());
        }
        return r;
    });
    for (const auto& r : rows) {
        ens.squared_norms.push_back(r.norm);
        ens.restricted_sup.push_back(r.restricted);
    }
    return ens;
}

ScanReport check_positivity(const MalliavinEnsemble& ensemble, double delta) {
    ScanReport rep;
    rep.name = "positivity";
    rep.abscissa_name = "threshold";
    const std::size_t N = ensemble.squared_norms.size();
    rep.samples = N;
    auto fraction = [&](double d) {
        std::size_t above = 0;
        for (double v : ensemble.squared_norms) above += v > d ? 1 : 0;
        return N ? static_cast<double>(above) / static_cast<double>(N) : 0.0;
    };
    for (double d : {1e-14, 1e-12, 1e-10, 1e-8}) {
        rep.abscissae.push_back(d);
        rep.values.push_back(fraction(d));
        rep.std_errors.push_back(0.0);
    }
    const double frac = fraction(delta);
    rep.metrics["fraction"] = frac;
    rep.metrics["threshold"] = delta;
    if (N) {
        rep.metrics["min_squared_norm"] = *std::min_element(ensemble.squared_norms.begin(), ensemble.squared_norms.end());
        rep.metrics["max_squared_norm"] = *std::max_element(ensemble.squared_norms.begin(), ensemble.squared_norms.end());
    }
    rep.add_check("every trajectory has squared Malliavin norm above the threshold", N > 0 && frac == 1.0,
                  "fraction " + fmt_short(frac) + " over " + std::to_string(N) + " trajectories");
    rep.add_check("fraction unchanged for thresholds in [1e-14, 1e-8]", fraction(1e-14) == fraction(1e-8), {}, false);
    return rep;
}

ScanReport scan_restricted_malliavin(const MalliavinEnsemble& ensemble) {
    const double H = ensemble.config.H;
    ScanReport rep;
    rep.name = "restricted_malliavin";
    rep.abscissa_name = "eps";
    rep.samples = ensemble.squared_norms.size();
    bool all_zero = true;
    for (std::size_t e = 0; e < ensemble.eps.size(); ++e) {
        RunningStats st;
        for (const auto& r : ensemble.restricted_sup) st.add(r[e]);
        rep.abscissae.push_back(ensemble.eps[e]);
        rep.values.push_back(st.mean());
        rep.std_errors.push_back(st.std_error());
        if (st.mean() != 0.0) all_zero = false;
    }
    bool monotone = true;
    for (std::size_t i = 0; i + 1 < rep.values.size(); ++i) {
        if ((rep.abscissae[i] - rep.abscissae[i + 1]) * (rep.values[i] - rep.values[i + 1]) < 0.0) monotone = false;
    }
    rep.add_check("restricted norm nondecreasing in eps", monotone);
    rep.reference_exponent = (4.0 * H - 1.0) / 2.0;
    rep.reference_tag = "window exponent (4H-1)/2";
    if (all_zero || rep.values.empty()) {
        rep.add_check("slope fit", true, "all values are zero; no fit attempted", false);
        return rep;
    }
    auto bound = [&](double e) { return std::pow(e, rep.reference_exponent) * std::exp(4.0 / 3.0 * std::pow(e, 0.75)); };
    std::size_t largest = 0;
    for (std::size_t i = 0; i < rep.abscissae.size(); ++i) {
        if (rep.abscissae[i] > rep.abscissae[largest]) largest = i;
    }
    const double c = rep.values[largest] / bound(rep.abscissae[largest]);
    std::size_t violations = 0;
    for (std::size_t i = 0; i < rep.values.size(); ++i) {
        if (rep.values[i] - 3.0 * rep.std_errors[i] > c * bound(rep.abscissae[i]) * (1.0 + 1e-12)) ++violations;
    }
    rep.metrics["fitted_constant"] = c;
    rep.add_check("values bounded by the fitted window bound at every eps", violations == 0,
                  std::to_string(violations) + " violations");
    rep.fit_slope();
    return rep;
}

ScanReport check_malliavin_engine(const ModelConfig& config, const VerifySettings& settings) {
    const ModelConfig mc = malliavin_config(config, settings);
    const HurstParams params(mc.H);
    const std::size_t K = mc.n_modes;
    const std::size_t N = mc.n_time;
    const Solver solver(mc);
    const MalliavinEngine engine(solver);
    const SourcePlan plan = engine.plan(settings.t_star);
    const NoiseSampler sampler(mc.noise());
    const NoiseBundle bundle = sampler.sample_bundle(settings.seed, 0);
    const TrajectoryRecord traj = solver.solve(bundle);

    ScanReport rep;
    rep.name = "malliavin_engine";
    rep.abscissa_name = "pair";

    {
        ModelConfig c0 = mc;
        c0.sigma = 0.0;
        const Solver s0(c0);
        const MalliavinEngine e0(s0);
        const MalliavinGrid g = e0.norm_at(s0.solve(bundle), settings.x_star, plan);
        const bool zero = (g.values.array() == 0.0).all() && g.squared_norm == 0.0;
        rep.add_check("sigma = 0 gives an identically zero grid", zero);
    }
    {
        ModelConfig c3 = mc;
        c3.sigma = 3.0 * mc.sigma;
        const Solver s3(c3);
        const MalliavinEngine e3(s3);
        const MalliavinGrid g1 = engine.norm_at(traj, settings.x_star, plan);
        const MalliavinGrid g3 = e3.norm_at(traj, settings.x_star, plan);
        const double scale = g1.values.cwiseAbs().maxCoeff();
        const double err = scale > 0.0 ? (g3.values - 3.0 * g1.values).cwiseAbs().maxCoeff() / scale : 0.0;
        rep.metrics["sigma_linearity_error"] = err;
        rep.add_check("grid linear in sigma to 1e-12", scale > 0.0 && err <= 1e-12, "relative error " + fmt_short(err));
    }
    {
        auto rng = substream(settings.seed, 0, kFiniteDifferenceStream);
        const std::size_t cells = sampler.n_cells();
        const std::size_t per_step = cells / N;
        const CosineTransform& tr = solver.transform();
        std::uniform_int_distribution<std::size_t> mode_pick(0, std::min<std::size_t>(K, 5) - 1);
        std::uniform_int_distribution<std::size_t> node_pick(0, tr.n_grid() - 1);
        const double h = 1e-4;
        double worst = 0.0;
        std::size_t done = 0;
        for (std::size_t attempt = 0; done < settings.fd_pairs && attempt < 20 * settings.fd_pairs + 20; ++attempt) {
            // Source cell at least four steps before the target.
            std::uniform_int_distribution<std::size_t> target_pick(5, N);
            const std::size_t target = target_pick(rng);
            std::uniform_int_distribution<std::size_t> cell_pick(0, (target - 4) * per_step - 1);
            const std::size_t cell = cell_pick(rng);
            const std::size_t j = mode_pick(rng);
            const double x = tr.node(node_pick(rng));
            const double s = (static_cast<double>(cell) + 0.5) * sampler.cell_width();
            const MalliavinSlice slice = engine.solve(traj, s, target);
            double analytic = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                analytic += basis_eval(k, x) * slice.psi(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
            }
            if (std::abs(analytic) < 1e-8) continue;
            auto bumped = [&](double amount) {
                NoiseBundle b = bundle;
                b.white_cells(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(cell)) += amount;
                sampler.rebuild_mode(b, j);
                return solver.solve(b).state(target).evaluate(x);
            };
            const double fd = (bumped(h) - bumped(-h)) / (2.0 * h);
            const double rel = std::abs(fd - analytic) / std::abs(analytic);
            worst = std::max(worst, rel);
            rep.abscissae.push_back(static_cast<double>(done));
            rep.values.push_back(rel);
            rep.std_errors.push_back(0.0);
            ++done;
        }
        rep.metrics["fd_max_relative_error"] = worst;
        rep.add_check("finite differences agree within 5% on random (source, target) pairs",
                      done == settings.fd_pairs && worst <= 0.05,
                      std::to_string(done) + " pairs, worst " + fmt_short(worst));
    }
    {
        ModelConfig cl = mc;
        cl.f_coeffs = {0.0, 0.0, 0.0, 0.0};
        cl.allow_nonconforming = true;
        const Solver sl(cl);
        const MalliavinEngine el(sl);
        const TrajectoryRecord tl = sl.solve(bundle);
        const double t = settings.t_star;
        double worst = 0.0;
        for (double sf : {0.037, 0.29, 0.61, 0.93, 0.995}) {
            const double s = sf * t;
            const MalliavinSlice slice = el.solve(tl, s, N);
            for (double x : {0.0, 0.7, kPi / 2.0}) {
                for (double y : {0.0, 1.3, 2.9}) {
                    Eigen::VectorXd ax(static_cast<Eigen::Index>(K)), ay(static_cast<Eigen::Index>(K));
                    for (std::size_t k = 0; k < K; ++k) {
                        ax[static_cast<Eigen::Index>(k)] = basis_eval(k, x);
                        ay[static_cast<Eigen::Index>(k)] = basis_eval(k, y);
                    }
                    const double engine_value = ax.dot(slice.psi * ay);
                    const double ref = cl.sigma * khstar_source(x, t, 0.0, y, s, params, K);
                    worst = std::max(worst, std::abs(engine_value - ref) / std::max(std::abs(ref), 1e-300));
                }
            }
        }
        rep.metrics["linear_closed_form_error"] = worst;
        rep.add_check("zero nonlinearity matches the closed-form source kernel to 1e-8", worst <= 1e-8,
                      "relative error " + fmt_short(worst));
    }
    rep.samples = settings.fd_pairs;
    return rep;
}

std::vector<double> sample_point_values(const ModelConfig& config, const VerifySettings& settings) {
    const ModelConfig c = truncated_horizon(config, settings.t_star);
    const Solver solver(c);
    const NoiseSampler sampler(c.noise());
    const std::size_t N = c.n_time;
    return parallel_map<double>(settings.density_samples, settings.workers, [&](std::size_t n) {
        return solver.solve(sampler.sample_bundle(settings.seed, n)).state(N).evaluate(settings.x_star);
    });
}

double max_atom_weight(std::vector<double> samples, double resolution) {
    if (samples.empty()) return 0.0;
    std::sort(samples.begin(), samples.end());
    std::size_t best = 1, run = 1;
    for (std::size_t i = 1; i < samples.size(); ++i) {
        run = samples[i] - samples[i - 1] <= resolution ? run + 1 : 1;
        best = std::max(best, run);
    }
    return static_cast<double>(best) / static_cast<double>(samples.size());
}

double max_cdf_jump(std::vector<double> samples) {
    return max_atom_weight(std::move(samples), 0.0);
}

void DensityCurve::write_csv(std::ostream& os) const {
    os << "x,density\n";
    for (std::size_t i = 0; i < x.size(); ++i) os << fmt17(x[i]) << ',' << fmt17(density[i]) << '\n';
}

ScanReport density_from_samples(std::vector<double> samples, std::size_t kde_points, DensityCurve* curve) {
    ScanReport rep;
    rep.name = "density";
    rep.abscissa_name = "x";
    const std::size_t N = samples.size();
    rep.samples = N;
    if (N < 2) throw DomainError("density report needs at least two samples");
    const double limit = 3.0 / std::sqrt(static_cast<double>(N));
    const double atom = max_atom_weight(samples);
    const double jump = max_cdf_jump(samples);
    rep.metrics["atom_weight"] = atom;
    rep.metrics["max_cdf_jump"] = jump;
    rep.metrics["limit"] = limit;
    rep.add_check("largest atom weight <= 3/sqrt(N)", atom <= limit, "atom " + fmt_short(atom));
    rep.add_check("largest CDF jump <= 3/sqrt(N)", jump <= limit, "jump " + fmt_short(jump));

    std::sort(samples.begin(), samples.end());
    RunningStats st;
    for (double v : samples) st.add(v);
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(N - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, N - 1);
        return samples[lo] + (pos - static_cast<double>(lo)) * (samples[hi] - samples[lo]);
    };
    const double sd = std::sqrt(st.variance());
    const double iqr = quantile(0.75) - quantile(0.25);
    const double bw = 0.9 * std::min(sd, iqr / 1.34) * std::pow(static_cast<double>(N), -0.2);
    rep.metrics["mean"] = st.mean();
    rep.metrics["std"] = sd;
    rep.metrics["bandwidth"] = bw;
    if (!(bw > 0.0) || kde_points < 2) {
        rep.add_check("kernel density estimate", false, "zero bandwidth; no curve", false);
        return rep;
    }
    DensityCurve kde;
    kde.bandwidth = bw;
    const double lo = samples.front() - 5.0 * bw;
    const double hi = samples.back() + 5.0 * bw;
    const double norm = 1.0 / (static_cast<double>(N) * bw * std::sqrt(2.0 * kPi));
    for (std::size_t i = 0; i < kde_points; ++i) {
        const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(kde_points - 1);
        double sum = 0.0;
        // Samples beyond 8 bandwidths contribute below 1e-14.
        const auto first = std::lower_bound(samples.begin(), samples.end(), x - 8.0 * bw);
        const auto last = std::upper_bound(samples.begin(), samples.end(), x + 8.0 * bw);
        for (auto it = first; it != last; ++it) {
            const double z = (x - *it) / bw;
            sum += std::exp(-0.5 * z * z);
        }
        kde.x.push_back(x);
        kde.density.push_back(norm * sum);
    }
    double integral = 0.0;
    for (std::size_t i = 0; i + 1 < kde.x.size(); ++i) {
        integral += 0.5 * (kde.x[i + 1] - kde.x[i]) * (kde.density[i] + kde.density[i + 1]);
    }
    rep.metrics["kde_integral"] = integral;
    rep.add_check("density estimate integrates to 1 within 1e-3", std::abs(integral - 1.0) <= 1e-3,
                  "integral " + fmt_short(integral));
    rep.abscissae = kde.x;
    rep.values = kde.density;
    rep.std_errors.assign(kde.x.size(), 0.0);
    if (curve) *curve = std::move(kde);
    return rep;
}

ScanReport density_report(const ModelConfig& config, const VerifySettings& settings, DensityCurve* curve) {
    ScanReport rep = density_from_samples(sample_point_values(config, settings), settings.kde_points, curve);
    rep.metrics["x_star"] = settings.x_star;
    rep.metrics["t_star"] = settings.t_star;
    return rep;
}

namespace {

// Least squares of y_k = a + b k over the positive entries with k >= 1.
DecayFit fit_linear(const std::vector<double>& d, bool factorial) {
    std::vector<double> ks, ys;
    for (std::size_t k = 1; k < d.size(); ++k) {
        if (!(d[k] > 0.0)) continue;
        ks.push_back(static_cast<double>(k));
        ys.push_back(std::log(d[k]) + (factorial ? std::lgamma(static_cast<double>(k) + 1.0) : 0.0));
    }
    DecayFit fit;
    const std::size_t n = ks.size();
    if (n < 2) return fit;
    double mk = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mk += ks[i];
        my += ys[i];
    }
    mk /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double skk = 0.0, sky = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        skk += (ks[i] - mk) * (ks[i] - mk);
        sky += (ks[i] - mk) * (ys[i] - my);
    }
    fit.log_rate = sky / skk;
    fit.log_scale = my - fit.log_rate * mk;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = ys[i] - fit.log_scale - fit.log_rate * ks[i];
        fit.residual += r * r;
    }
    return fit;
}

}  // namespace

DecayFit fit_geometric(const std::vector<double>& d) { return fit_linear(d, false); }
DecayFit fit_factorial(const std::vector<double>& d) { return fit_linear(d, true); }

ScanReport check_picard_decay(const ModelConfig& config, const NoiseBundle& bundle) {
    const Solver solver(config);
    const PicardResult pr = solver.picard(bundle);
    const TrajectoryRecord ex = solver.solve(bundle);
    const std::vector<double>& d = pr.distances;

    ScanReport rep;
    rep.name = "picard_decay";
    rep.abscissa_name = "k";
    for (std::size_t k = 0; k < d.size(); ++k) {
        rep.abscissae.push_back(static_cast<double>(k));
        rep.values.push_back(d[k]);
        rep.std_errors.push_back(0.0);
    }
    bool monotone = true;
    for (std::size_t k = 2; k + 1 < d.size(); ++k) {
        if (!(d[k + 1] < d[k])) monotone = false;
    }
    rep.add_check("d_k strictly decreasing for k >= 2", monotone);

    std::size_t usable = 0;
    for (std::size_t k = 1; k < d.size(); ++k) usable += d[k] > 0.0 ? 1 : 0;
    const DecayFit geo = fit_geometric(d);
    const DecayFit fac = fit_factorial(d);
    rep.metrics["geometric_rate"] = std::exp(geo.log_rate);
    rep.metrics["geometric_residual"] = geo.residual;
    rep.metrics["factorial_constant"] = std::exp(fac.log_rate);
    rep.metrics["factorial_residual"] = fac.residual;
    rep.metrics["iterations"] = static_cast<double>(d.size());
    rep.metrics["fixed_point_residual"] = pr.fixed_point_residual;
    if (usable < 3) {
        rep.add_check("factorial model fits better than geometric", true, "fewer than three nonzero distances", true);
    } else {
        rep.add_check("factorial model fits better than geometric", fac.residual < geo.residual,
                      "residuals factorial " + fmt_short(fac.residual) + ", geometric " + fmt_short(geo.residual));
    }
    const Eigen::MatrixXd diff = solver.grid_values(pr.record) - solver.grid_values(ex);
    const double gap = diff.cwiseAbs().maxCoeff();
    rep.metrics["sup_gap_to_exponential"] = gap;
    rep.add_check("fixed point within 5e-3 of the exponential-integrator path", gap <= 5e-3,
                  "sup gap " + fmt_short(gap));
    rep.samples = 1;
    return rep;
}

ScanReport check_localization(const ModelConfig& config, const VerifySettings& settings) {
    ModelConfig raw_cfg = config;
    raw_cfg.cutoff_n.reset();
    const Solver raw(raw_cfg);
    std::vector<Solver> cut;
    for (double n : settings.cutoff_levels) {
        if (!(n >= 1.0) || n != std::floor(n)) throw DomainError("cutoff levels must be positive integers");
        ModelConfig c = config;
        c.cutoff_n = static_cast<int>(n);
        cut.emplace_back(c);
    }
    const NoiseSampler sampler(config.noise());
    const std::size_t L = cut.size();

    struct Row {
        double sup = 0.0;
        std::vector<char> in_omega;
        std::vector<char> equal;
    };
    const auto rows = parallel_map<Row>(settings.localization_trajectories, settings.workers, [&](std::size_t n) {
        const NoiseBundle b = sampler.sample_bundle(settings.seed, n);
        Row r;
        r.in_omega.assign(L, 0);
        r.equal.assign(L, 0);
        TrajectoryRecord rt;
        try {
            rt = raw.solve(b);
            r.sup = rt.sup_norm;
        } catch (const BlowUpError&) {
            r.sup = std::numeric_limits<double>::infinity();
        }
        for (std::size_t l = 0; l < L; ++l) {
            const TrajectoryRecord ct = cut[l].solve(b);
            r.in_omega[l] = r.sup < settings.cutoff_levels[l];
            if (std::isfinite(r.sup)) r.equal[l] = (ct.states.array() == rt.states.array()).all();
        }
        return r;
    });

    ScanReport rep;
    rep.name = "localization";
    rep.abscissa_name = "n";
    const std::size_t N = rows.size();
    rep.samples = N;
    std::size_t mismatches = 0;
    double max_sup = 0.0;
    for (const auto& r : rows) max_sup = std::max(max_sup, r.sup);
    for (std::size_t l = 0; l < L; ++l) {
        std::size_t inside = 0, differ_outside = 0;
        for (const auto& r : rows) {
            if (r.in_omega[l]) {
                ++inside;
                if (!r.equal[l]) ++mismatches;
            } else if (!r.equal[l]) {
                ++differ_outside;
            }
        }
        const double p = N ? static_cast<double>(inside) / static_cast<double>(N) : 0.0;
        rep.abscissae.push_back(settings.cutoff_levels[l]);
        rep.values.push_back(p);
        rep.std_errors.push_back(N ? std::sqrt(p * (1.0 - p) / static_cast<double>(N)) : 0.0);
        rep.metrics["differ_outside_n" + fmt_short(settings.cutoff_levels[l])] = static_cast<double>(differ_outside);
    }
    rep.metrics["max_raw_sup"] = max_sup;
    rep.add_check("cutoff and raw paths bit-identical on every trajectory inside the level set", mismatches == 0,
                  std::to_string(mismatches) + " mismatches");
    bool nondecreasing = true;
    std::vector<std::size_t> order(L);
    for (std::size_t i = 0; i < L; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return settings.cutoff_levels[a] < settings.cutoff_levels[b]; });
    for (std::size_t i = 0; i + 1 < L; ++i) {
        if (rep.values[order[i + 1]] < rep.values[order[i]]) nondecreasing = false;
    }
    rep.add_check("empirical probability of the level set nondecreasing in n", nondecreasing);
    return rep;
}

}  // namespace fbmch
