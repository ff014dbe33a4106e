#pragma once

#include "fbmch/model.hpp"
#include "fbmch/noise.hpp"
#include "fbmch/spectral.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace fbmch {

// phi_1(z) = (e^z - 1) / z with phi_1(0) = 1.
double phi1(double z);

struct TrajectoryRecord {
    std::vector<double> time_grid;
    Eigen::MatrixXd states;  // time x mode coefficients
    double sup_norm = 0.0;
    double omega_level = kDefaultCutoff;
    bool omega_n_flag = false;
    std::uint64_t noise_seed = 0;
    std::uint64_t noise_index = 0;
    std::string method;
    std::size_t steps = 0;
    std::vector<double> residuals;

    SpectralField state(std::size_t m) const { return SpectralField(Eigen::VectorXd(states.row(static_cast<Eigen::Index>(m)).transpose())); }
    std::size_t n_modes() const { return static_cast<std::size_t>(states.cols()); }
    bool in_omega(double n) const { return sup_norm < n; }
};

struct PicardResult {
    TrajectoryRecord record;
    std::vector<double> distances;  // d_k = sup |u_{k+1} - u_k|
    double fixed_point_residual = 0.0;
};

class Solver {
public:
    explicit Solver(ModelConfig config);

    const ModelConfig& config() const { return config_; }
    const CosineTransform& transform() const { return transform_; }

    SpectralField initial_state() const;

    // One exponential-integrator step from t_m to t_{m+1}.
    SpectralField step(const SpectralField& state, const NoiseBundle& bundle, std::size_t m) const;

    TrajectoryRecord solve(const NoiseBundle& bundle) const;
    PicardResult picard(const NoiseBundle& bundle) const;

    // Grid values of every stored state, time x node.
    Eigen::MatrixXd grid_values(const TrajectoryRecord& record) const;

private:
    void check_bundle(const NoiseBundle& bundle) const;
    Eigen::VectorXd forcing(const Eigen::VectorXd& coeffs) const;
    Eigen::VectorXd noise_increment(const NoiseBundle& bundle, std::size_t m) const;

    ModelConfig config_;
    CosineTransform transform_;
    Eigen::VectorXd decay_;        // exp(-k^4 dt)
    Eigen::VectorXd drift_weight_; // k^2 phi_1(-k^4 dt) dt
    Eigen::VectorXd noise_weight_; // exp(-k^4 dt / 2)
};

TrajectoryRecord solve_trajectory(const ModelConfig& config, const NoiseBundle& bundle);
PicardResult picard_solve(const ModelConfig& config, const NoiseBundle& bundle);

// CSV exports: (t, x_0..x_{M-1}) and (t, k_0..k_{K-1}).
void write_trajectory_grid_csv(const Solver& solver, const TrajectoryRecord& record, std::ostream& os);
void write_trajectory_coeff_csv(const TrajectoryRecord& record, std::ostream& os);

}  // namespace fbmch
