#pragma once

#include "fbmch/kernel.hpp"
#include "fbmch/spectral.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace fbmch {

enum class SamplerKind { volterra, cholesky };

std::string to_string(SamplerKind kind);
SamplerKind parse_sampler(const std::string& name);

struct NoiseConfig {
    double H = 0.75;
    double T = 1.0;
    std::size_t n_time = 256;
    std::size_t n_modes = kDefaultModes;
    std::size_t substeps = 8;
    SamplerKind sampler = SamplerKind::volterra;
};

// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

// Independent generator for one (seed, trajectory, stream) triple.
std::mt19937_64 substream(std::uint64_t seed, std::uint64_t trajectory_index, std::uint64_t stream);

struct NoiseBundle {
    double H = 0.75;
    double T = 1.0;
    std::vector<double> time_grid;
    std::size_t n_modes = 0;
    std::size_t substeps = 1;
    Eigen::MatrixXd white_cells;  // mode x cell, N(0,1) * sqrt(cell width)
    Eigen::MatrixXd fbm_paths;    // mode x time, column 0 is zero
    std::uint64_t seed = 0;
    std::uint64_t trajectory_index = 0;
    SamplerKind sampler_tag = SamplerKind::volterra;

    std::size_t n_time() const { return time_grid.empty() ? 0 : time_grid.size() - 1; }
    double dt() const { return T / static_cast<double>(n_time()); }
    // Index m with time_grid[m] == t up to rounding; throws DomainError otherwise.
    std::size_t grid_index(double t) const;
};

class NoiseSampler {
public:
    explicit NoiseSampler(const NoiseConfig& config);

    const NoiseConfig& config() const { return config_; }
    const std::vector<double>& time_grid() const { return time_grid_; }
    std::size_t n_cells() const;
    double cell_width() const;

    // One scalar path on the time grid from the given stream; also returns the white cells used.
    Eigen::VectorXd sample_fbm(std::mt19937_64& rng, Eigen::VectorXd* cells = nullptr) const;

    NoiseBundle sample_bundle(std::uint64_t seed, std::uint64_t trajectory_index) const;

    // Recompute fbm_paths of the given mode (or all modes) from white_cells.
    void rebuild_paths(NoiseBundle& bundle) const;
    void rebuild_mode(NoiseBundle& bundle, std::size_t mode) const;

    // Row i holds the weights mapping white cells to beta(t_i).
    const Eigen::MatrixXd& path_matrix() const { return *path_matrix_; }

private:
    NoiseConfig config_;
    std::vector<double> time_grid_;
    std::shared_ptr<const Eigen::MatrixXd> path_matrix_;
};

std::vector<double> uniform_grid(double T, std::size_t n);

double field_value(const NoiseBundle& bundle, double x, double t);

// Per-mode discrete convolution sum_j exp(-k^4 (t - midpoint_j)) (beta(t_{j+1}) - beta(t_j)).
SpectralField stochastic_convolution(const NoiseBundle& bundle, double t);

void write_bundle(const NoiseBundle& bundle, const std::string& path);
NoiseBundle read_bundle(const std::string& path);

}  // namespace fbmch
