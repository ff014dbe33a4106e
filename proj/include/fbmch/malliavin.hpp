#pragma once

#include "fbmch/kernel.hpp"
#include "fbmch/solver.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <vector>

namespace fbmch {

enum class ForcingRule {
    exact,              // exp-weighted integral of dK/dr over each step
    solver_consistent,  // midpoint rule matching the discrete noise increments
};

struct MalliavinOptions {
    ForcingRule forcing = ForcingRule::exact;
    double quad_tol = 1e-10;
    // Restricted windows as fractions of t*.
    std::vector<double> eps_fractions{0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625, 0.001953125};
    // Gauss panels on each end interval of the source-time quadrature.
    std::size_t end_panels = 2;
};

// Psi(t*; s): rows are x-modes k, columns source modes j, so that
// D_{y,s} u(x, t*) = sum_{k,j} a_k(x) Psi_{kj} a_j(y).
struct MalliavinSlice {
    double s = 0.0;
    std::size_t target_step = 0;
    Eigen::MatrixXd psi;
    std::vector<Eigen::MatrixXd> history;  // Psi at t_{m0+1} .. t_target when requested
};

struct MalliavinGrid {
    double x_star = 0.0;
    double t_star = 0.0;
    std::vector<double> s_nodes;
    std::vector<double> s_weights;
    Eigen::MatrixXd coeffs;         // s-node x source mode: sum_k a_k(x*) Psi_kj
    Eigen::MatrixXd values;         // s-node x y collocation node
    double squared_norm = 0.0;
    std::vector<double> eps;        // absolute window lengths
    std::vector<double> restricted; // squared norm over s in [t* - eps, t*]
    Eigen::MatrixXd restricted_profile;  // eps x x-node, same norm at every collocation node
    Eigen::VectorXd norm_profile;        // full squared norm at every collocation node
    Eigen::MatrixXd gcal;                // frozen G_n on the time x node grid

    void write_csv(std::ostream& os) const;
};

// Source-time quadrature for a target t*: nodes and weights on [0, t*],
// with breakpoints at t* - eps and endpoint substitutions absorbing the
// singular behavior at s = 0 and s = t*.
struct SourcePlan {
    double t_star = 0.0;
    std::size_t target_step = 0;
    std::vector<double> nodes;
    std::vector<double> weights;
    std::vector<double> eps;
    std::vector<std::size_t> window_start;  // first node index inside [t* - eps_i, t*]
    std::vector<Eigen::MatrixXd> forcing;   // per node: step x mode forcing weights
    std::vector<std::size_t> first_step;    // per node: step whose interval contains s
};

class MalliavinEngine {
public:
    MalliavinEngine(const Solver& solver, MalliavinOptions options = {});

    const MalliavinOptions& options() const { return options_; }

    // f_n'(u) on the time x collocation grid.
    Eigen::MatrixXd gcal_eval(const TrajectoryRecord& trajectory) const;

    // Forcing weights for source time s over steps m0..target-1 (row m - m0).
    Eigen::MatrixXd forcing_weights(double s, std::size_t target_step) const;

    MalliavinSlice solve(const TrajectoryRecord& trajectory, double s, std::size_t target_step,
                         bool keep_history = false) const;

    SourcePlan plan(double t_star) const;
    MalliavinGrid norm_at(const TrajectoryRecord& trajectory, double x_star, const SourcePlan& plan) const;
    MalliavinGrid norm_at(const TrajectoryRecord& trajectory, double x_star, double t_star) const;

private:
    MalliavinSlice march(const std::vector<Eigen::MatrixXd>& galerkin, double s, std::size_t first_step,
                         const Eigen::MatrixXd& forcing, std::size_t target_step, bool keep_history) const;
    std::vector<Eigen::MatrixXd> galerkin_matrices(const TrajectoryRecord& trajectory, std::size_t target_step) const;
    std::size_t step_of(double t) const;

    const Solver& solver_;
    MalliavinOptions options_;
    HurstParams params_;
    Eigen::VectorXd decay_;
    Eigen::VectorXd drift_weight_;
    Eigen::VectorXd half_decay_;
};

}  // namespace fbmch
