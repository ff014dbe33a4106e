#pragma once

#include "fbmch/noise.hpp"
#include "fbmch/spectral.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace fbmch {

enum class SolverKind { exponential, picard };

std::string to_string(SolverKind kind);
SolverKind parse_solver(const std::string& name);

inline constexpr int kDefaultCutoff = 10;

struct ModelConfig {
    // f(u) = c3 u^3 + c2 u^2 + c1 u + c0, stored as (c3, c2, c1, c0).
    std::array<double, 4> f_coeffs{1.0, 0.0, -1.0, 0.0};
    double sigma = 0.1;
    std::optional<int> cutoff_n = kDefaultCutoff;
    // Initial data on the collocation grid: empty selects 0.1 cos(x), one value a constant.
    std::vector<double> u0;
    double H = 0.75;
    double T = 1.0;
    std::size_t n_modes = kDefaultModes;
    std::size_t n_grid = kDefaultGrid;
    std::size_t n_time = 256;
    std::size_t substeps = 8;
    SamplerKind sampler = SamplerKind::volterra;
    SolverKind solver = SolverKind::exponential;
    std::size_t picard_kmax = 30;
    double picard_tol = 1e-10;
    // Permits c3 <= 0 (degenerate or test nonlinearities).
    bool allow_nonconforming = false;

    NoiseConfig noise() const;
    double dt() const { return T / static_cast<double>(n_time); }
    // Every violated constraint, one per entry.
    std::vector<std::string> violations() const;
    // Throws ConfigError listing all violations.
    void validate() const;
};

// C^1 ramp: 1 on [0, n], 1 - 3 rho^2 + 2 rho^3 on (n, n+1), 0 beyond.
double cutoff_eval(double n, double r, double* derivative = nullptr);

struct NonlinearValue {
    double f;
    double df;
};

NonlinearValue nonlinearity_eval(const ModelConfig& config, double u);

// f_n applied pointwise; the raw and cutoff paths share this code so that the
// plateau reproduces raw results bit for bit.
void apply_nonlinearity(const ModelConfig& config, const double* u, double* f, std::size_t n);
void apply_nonlinearity_derivative(const ModelConfig& config, const double* u, double* df, std::size_t n);

Eigen::VectorXd initial_grid_values(const ModelConfig& config, const CosineTransform& transform);

}  // namespace fbmch
