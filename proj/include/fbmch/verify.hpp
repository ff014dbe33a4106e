#pragma once

#include "fbmch/malliavin.hpp"
#include "fbmch/model.hpp"
#include "fbmch/noise.hpp"
#include "fbmch/solver.hpp"
#include "fbmch/spectral.hpp"
#include "fbmch/stats.hpp"

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace fbmch {

// Reference value of Lambda(0.75, 1, 0.5) from a 50-digit evaluation of the closed form.
inline constexpr double kLambdaReference = 0.0265734734829742742;

struct Check {
    std::string name;
    bool pass = false;
    bool asserted = true;  // false for report-only comparisons
    std::string detail;
};

struct ScanReport {
    std::string name;
    std::string abscissa_name = "x";
    std::vector<double> abscissae;
    std::vector<double> values;
    std::vector<double> std_errors;  // zero for deterministic quantities
    bool fitted = false;
    LogLogFit fit;
    double reference_exponent = std::numeric_limits<double>::quiet_NaN();
    std::string reference_tag;
    double band_lo = std::numeric_limits<double>::quiet_NaN();
    double band_hi = std::numeric_limits<double>::quiet_NaN();
    std::size_t samples = 0;
    std::vector<Check> checks;
    std::map<std::string, double> metrics;

    // True when every asserted check passes.
    bool pass() const;
    void add_check(std::string check_name, bool ok, std::string detail = {}, bool asserted = true);
    // Fits the log-log slope of values against abscissae.
    void fit_slope();

    void write_csv(std::ostream& os) const;
    void write_summary(std::ostream& os) const;  // one JSON object
    std::string one_line() const;
};

// Sizes, grids, and seeds for every verification path.
struct VerifySettings {
    std::uint64_t seed = 20240917;
    std::size_t workers = 1;

    std::size_t covariance_samples = 20000;
    std::vector<double> covariance_hurst{0.6, 0.75};
    std::size_t covariance_n_time = 16;
    std::size_t covariance_substeps = 8;

    std::size_t isometry_samples = 10000;

    // Scan grids hold fractions of the scan time.
    std::vector<double> delta_grid{0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625, 0.001953125};
    std::vector<double> eps_grid{0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625, 0.001953125};
    std::vector<double> hurst_grid{0.6, 0.75, 0.9};
    double scan_t = 1.0;
    std::size_t scan_modes = 48;
    std::size_t scan_grid = 96;
    std::size_t first_estimate_samples = 10000;

    double x_star = kPi / 2.0;
    double t_star = 0.5;
    std::size_t malliavin_modes = 32;
    std::size_t malliavin_trajectories = 500;
    double positivity_delta = 1e-12;
    std::size_t fd_pairs = 10;

    std::size_t density_samples = 50000;
    std::size_t kde_points = 512;

    std::size_t density_control_samples = 2000;

    std::size_t localization_trajectories = 500;
    // Noise level for the localization ensemble, large enough that some paths leave the level sets.
    double localization_sigma = 2.0;
    std::vector<double> cutoff_levels{2.0, 4.0, 8.0, 16.0};
};

// Noise field covariance E[W(x,t) W(y,s)] against min(x,y) R(t,s): the 4 x 4 matrix over
// the points (k pi/4, k/4), k = 1..4.
ScanReport verify_covariance(const ModelConfig& config, const VerifySettings& settings, double H);

// Monte-Carlo variance of the stochastic convolution against the H-norm quadrature.
ScanReport verify_isometry(const ModelConfig& config, const VerifySettings& settings);

// Q(delta) on the delta grid; slope band [(4H-1)/2 - 0.1, (4H-1)/2 + 0.25].
ScanReport scan_second_estimate(double H, double t, const std::vector<double>& delta_fractions, std::size_t n_modes,
                                std::size_t n_grid, double sigma = 1.0);

// Monte-Carlo E sup_x |windowed convolution|^p, p in {2, 4}.
ScanReport scan_first_estimate(const ModelConfig& config, const VerifySettings& settings, int p);

// L(eps) >= c2 Lambda(H, t, eps) at x in {0, pi/4, pi/2}, the Lambda reference value,
// and the decay of eps^{2H+1/4} / Lambda between eps = 1e-1 and 1e-4.
ScanReport check_lower_bound(double H, double t, const std::vector<double>& eps_fractions, std::size_t n_modes,
                             double sigma = 1.0);

// Squared restricted norms L(eps) at x over the eps grid, per mode reduction.
std::vector<double> lower_bound_values(double H, double t, const std::vector<double>& eps, double x,
                                       std::size_t n_modes);

// Malliavin ensemble shared by the positivity and restricted-window scans.
struct MalliavinEnsemble {
    ModelConfig config;
    double x_star = 0.0;
    double t_star = 0.0;
    std::vector<double> eps;
    std::vector<double> squared_norms;           // per trajectory
    std::vector<std::vector<double>> restricted_sup;  // per trajectory, per eps: max over the x grid
};

// Config used for the Malliavin ensembles: time horizon t*, fixed step, reduced modes.
ModelConfig malliavin_config(const ModelConfig& config, const VerifySettings& settings);

MalliavinEnsemble run_malliavin_ensemble(const ModelConfig& config, const VerifySettings& settings);
ScanReport check_positivity(const MalliavinEnsemble& ensemble, double delta);
ScanReport scan_restricted_malliavin(const MalliavinEnsemble& ensemble);

// Engine self-checks: sigma = 0, sigma linearity, finite differences, and the G = 0 closed form.
ScanReport check_malliavin_engine(const ModelConfig& config, const VerifySettings& settings);

struct DensityCurve {
    std::vector<double> x;
    std::vector<double> density;
    double bandwidth = 0.0;
    void write_csv(std::ostream& os) const;
};

// Samples of u(x*, t*) across the ensemble, in trajectory order.
std::vector<double> sample_point_values(const ModelConfig& config, const VerifySettings& settings);
ScanReport density_from_samples(std::vector<double> samples, std::size_t kde_points, DensityCurve* curve = nullptr);
ScanReport density_report(const ModelConfig& config, const VerifySettings& settings, DensityCurve* curve = nullptr);

// Largest fraction of samples sharing a value up to the given resolution.
double max_atom_weight(std::vector<double> samples, double resolution = 1e-9);
// Largest jump of the empirical CDF.
double max_cdf_jump(std::vector<double> samples);

struct DecayFit {
    double log_scale = 0.0;
    double log_rate = 0.0;
    double residual = 0.0;
};
// log d_k = a + k log rho  and  log d_k = a + k log c - log k!, over positive d_k, k = 1, 2, ...
DecayFit fit_geometric(const std::vector<double>& d);
DecayFit fit_factorial(const std::vector<double>& d);

ScanReport check_picard_decay(const ModelConfig& config, const NoiseBundle& bundle);
ScanReport check_localization(const ModelConfig& config, const VerifySettings& settings);

}  // namespace fbmch
