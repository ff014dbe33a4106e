#include "fbmch/malliavin.hpp"

#include "fbmch/csv.hpp"
#include "fbmch/error.hpp"
#include "fbmch/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace fbmch {

MalliavinEngine::MalliavinEngine(const Solver& solver, MalliavinOptions options)
    : solver_(solver), options_(std::move(options)), params_(solver.config().H) {
    const auto K = static_cast<Eigen::Index>(solver_.config().n_modes);
    const double dt = solver_.config().dt();
    decay_.resize(K);
    drift_weight_.resize(K);
    half_decay_.resize(K);
    for (Eigen::Index k = 0; k < K; ++k) {
        const double lambda = eigenvalue(static_cast<std::size_t>(k));
        const double kk = static_cast<double>(k);
        decay_[k] = std::exp(-lambda * dt);
        drift_weight_[k] = kk * kk * phi1(-lambda * dt) * dt;
        half_decay_[k] = std::exp(-0.5 * lambda * dt);
    }
}

std::size_t MalliavinEngine::step_of(double t) const {
    const ModelConfig& c = solver_.config();
    const double pos = t / c.dt();
    const double nearest = std::round(pos);
    if (nearest < 0.0 || nearest > static_cast<double>(c.n_time) || std::abs(pos - nearest) > 1e-9) {
        throw DomainError("target time is not on the solver grid");
    }
    return static_cast<std::size_t>(nearest);
}

Eigen::MatrixXd MalliavinEngine::gcal_eval(const TrajectoryRecord& trajectory) const {
    const Eigen::MatrixXd grid = solver_.grid_values(trajectory);
    Eigen::MatrixXd out(grid.rows(), grid.cols());
    for (Eigen::Index m = 0; m < grid.rows(); ++m) {
        for (Eigen::Index j = 0; j < grid.cols(); ++j) {
            out(m, j) = nonlinearity_eval(solver_.config(), grid(m, j)).df;
        }
    }
    return out;
}

std::vector<Eigen::MatrixXd> MalliavinEngine::galerkin_matrices(const TrajectoryRecord& trajectory,
                                                                std::size_t target_step) const {
    const Eigen::MatrixXd g = gcal_eval(trajectory);
    const Eigen::MatrixXd& S = solver_.transform().synthesis();
    const Eigen::MatrixXd& A = solver_.transform().analysis();
    std::vector<Eigen::MatrixXd> out(target_step);
    for (std::size_t m = 0; m < target_step; ++m) {
        out[m] = A * (g.row(static_cast<Eigen::Index>(m)).transpose().asDiagonal() * S);
    }
    return out;
}

Eigen::MatrixXd MalliavinEngine::forcing_weights(double s, std::size_t target_step) const {
    const ModelConfig& c = solver_.config();
    const double dt = c.dt();
    const auto K = static_cast<Eigen::Index>(c.n_modes);
    if (!(s > 0.0)) throw DomainError("source time must be positive");
    const double t_target = static_cast<double>(target_step) * dt;
    if (s >= t_target) return Eigen::MatrixXd(0, K);
    const auto first = static_cast<std::size_t>(std::floor(s / dt));
    Eigen::MatrixXd F(static_cast<Eigen::Index>(target_step - first), K);
    double k_prev = 0.0;
    for (std::size_t m = first; m < target_step; ++m) {
        const auto row = static_cast<Eigen::Index>(m - first);
        const double lo = std::max(s, static_cast<double>(m) * dt);
        const double hi = static_cast<double>(m + 1) * dt;
        if (options_.forcing == ForcingRule::exact) {
            for (Eigen::Index k = 0; k < K; ++k) {
                F(row, k) = dK_exp_integral(eigenvalue(static_cast<std::size_t>(k)), s, lo, hi, params_,
                                            options_.quad_tol);
            }
        } else {
            const double k_next = k_prev + dK_exp_integral(0.0, s, lo, hi, params_, options_.quad_tol);
            F.row(row) = half_decay_.transpose() * (k_next - k_prev);
            k_prev = k_next;
        }
    }
    return F;
}

MalliavinSlice MalliavinEngine::march(const std::vector<Eigen::MatrixXd>& galerkin, double s, std::size_t first_step,
                                      const Eigen::MatrixXd& forcing, std::size_t target_step,
                                      bool keep_history) const {
    const auto K = static_cast<Eigen::Index>(solver_.config().n_modes);
    const double sigma = solver_.config().sigma;
    MalliavinSlice slice;
    slice.s = s;
    slice.target_step = target_step;
    Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(K, K);
    for (std::size_t m = first_step; m < target_step; ++m) {
        const auto row = static_cast<Eigen::Index>(m - first_step);
        Eigen::MatrixXd next = decay_.asDiagonal() * psi;
        if (m > first_step) next.noalias() -= drift_weight_.asDiagonal() * (galerkin[m] * psi);
        next.diagonal() += sigma * forcing.row(row).transpose();
        psi = std::move(next);
        if (keep_history) slice.history.push_back(psi);
    }
    slice.psi = std::move(psi);
    return slice;
}

MalliavinSlice MalliavinEngine::solve(const TrajectoryRecord& trajectory, double s, std::size_t target_step,
                                      bool keep_history) const {
    const auto K = static_cast<Eigen::Index>(solver_.config().n_modes);
    const double dt = solver_.config().dt();
    if (target_step > solver_.config().n_time) throw DomainError("target step beyond the time grid");
    if (s >= static_cast<double>(target_step) * dt) {
        MalliavinSlice empty;
        empty.s = s;
        empty.target_step = target_step;
        empty.psi = Eigen::MatrixXd::Zero(K, K);
        return empty;
    }
    const auto galerkin = galerkin_matrices(trajectory, target_step);
    const auto first = static_cast<std::size_t>(std::floor(s / dt));
    return march(galerkin, s, first, forcing_weights(s, target_step), target_step, keep_history);
}

SourcePlan MalliavinEngine::plan(double t_star) const {
    SourcePlan p;
    p.t_star = t_star;
    p.target_step = step_of(t_star);
    if (p.target_step == 0) throw DomainError("Malliavin norm needs t* > 0");
    const double H = params_.H();
    std::vector<double> eps;
    for (double f : options_.eps_fractions) {
        if (!(f > 0.0 && f < 1.0)) throw DomainError("restricted window fractions must lie in (0, 1)");
        eps.push_back(f * t_star);
    }
    std::sort(eps.begin(), eps.end(), std::greater<>());
    eps.erase(std::unique(eps.begin(), eps.end()), eps.end());
    std::vector<double> breaks{0.0};
    for (double e : eps) breaks.push_back(t_star - e);
    if (eps.empty()) breaks.push_back(0.5 * t_star);
    breaks.push_back(t_star);

    const GaussRule& rule = gauss16();
    const std::size_t panels = std::max<std::size_t>(1, options_.end_panels);
    std::vector<std::pair<double, double>> nodes;
    auto add_mapped = [&](auto&& map) {
        for (std::size_t q = 0; q < panels; ++q) {
            const double lo = static_cast<double>(q) / static_cast<double>(panels);
            const double half = 0.5 / static_cast<double>(panels);
            for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
                const double w = lo + half * (1.0 + rule.nodes[i]);
                const auto [s, jac] = map(w);
                nodes.emplace_back(s, rule.weights[i] * half * jac);
            }
        }
    };
    // s = b1 w^q absorbs s^{1-2H} at the origin.
    const double b1 = breaks[1];
    const double q0 = 1.0 / (2.0 - 2.0 * H);
    add_mapped([&](double w) { return std::pair{b1 * std::pow(w, q0), b1 * q0 * std::pow(w, q0 - 1.0)}; });
    for (std::size_t i = 1; i + 2 < breaks.size(); ++i) {
        const double a = breaks[i];
        const double b = breaks[i + 1];
        for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
            nodes.emplace_back(0.5 * (a + b) + 0.5 * (b - a) * rule.nodes[j], 0.5 * (b - a) * rule.weights[j]);
        }
    }
    // s = t* - e w^4 clusters nodes at the target.
    const double e_last = t_star - breaks[breaks.size() - 2];
    add_mapped([&](double w) { return std::pair{t_star - e_last * w * w * w * w, 4.0 * e_last * w * w * w}; });
    std::sort(nodes.begin(), nodes.end());

    const double dt = solver_.config().dt();
    for (const auto& [s, w] : nodes) {
        p.nodes.push_back(s);
        p.weights.push_back(w);
        p.forcing.push_back(forcing_weights(s, p.target_step));
        p.first_step.push_back(static_cast<std::size_t>(std::floor(s / dt)));
    }
    p.eps = eps;
    for (double e : eps) {
        const double start = t_star - e;
        const auto it = std::lower_bound(p.nodes.begin(), p.nodes.end(), start);
        p.window_start.push_back(static_cast<std::size_t>(it - p.nodes.begin()));
    }
    return p;
}

MalliavinGrid MalliavinEngine::norm_at(const TrajectoryRecord& trajectory, double x_star, const SourcePlan& plan) const {
    const auto K = static_cast<Eigen::Index>(solver_.config().n_modes);
    const CosineTransform& tr = solver_.transform();
    const auto M = static_cast<Eigen::Index>(tr.n_grid());
    Eigen::VectorXd ax(K);
    for (Eigen::Index k = 0; k < K; ++k) ax[k] = basis_eval(static_cast<std::size_t>(k), x_star);

    MalliavinGrid g;
    g.x_star = x_star;
    g.t_star = plan.t_star;
    g.s_nodes = plan.nodes;
    g.s_weights = plan.weights;
    g.eps = plan.eps;
    g.gcal = gcal_eval(trajectory);
    const auto galerkin = galerkin_matrices(trajectory, plan.target_step);
    const auto n = static_cast<Eigen::Index>(plan.nodes.size());
    g.coeffs.resize(n, K);
    Eigen::MatrixXd density(n, M);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        const MalliavinSlice slice =
            march(galerkin, plan.nodes[ii], plan.first_step[ii], plan.forcing[ii], plan.target_step, false);
        g.coeffs.row(i) = ax.transpose() * slice.psi;
        density.row(i) = (tr.synthesis() * slice.psi).rowwise().squaredNorm().transpose();
    }
    g.values = g.coeffs * tr.synthesis().transpose();
    const Eigen::Map<const Eigen::VectorXd> w(plan.weights.data(), n);
    const Eigen::VectorXd pointwise = g.coeffs.rowwise().squaredNorm();
    g.squared_norm = w.dot(pointwise);
    g.norm_profile = density.transpose() * w;
    g.restricted_profile.resize(static_cast<Eigen::Index>(plan.eps.size()), M);
    for (std::size_t e = 0; e < plan.eps.size(); ++e) {
        const auto start = static_cast<Eigen::Index>(plan.window_start[e]);
        const Eigen::Index len = n - start;
        g.restricted.push_back(w.tail(len).dot(pointwise.tail(len)));
        g.restricted_profile.row(static_cast<Eigen::Index>(e)) =
            (density.bottomRows(len).transpose() * w.tail(len)).transpose();
    }
    return g;
}

MalliavinGrid MalliavinEngine::norm_at(const TrajectoryRecord& trajectory, double x_star, double t_star) const {
    return norm_at(trajectory, x_star, plan(t_star));
}

void MalliavinGrid::write_csv(std::ostream& os) const {
    os << "# x_star=" << fmt17(x_star) << " t_star=" << fmt17(t_star) << " squared_norm=" << fmt17(squared_norm);
    for (std::size_t e = 0; e < eps.size(); ++e) os << " restricted[" << fmt17(eps[e]) << "]=" << fmt17(restricted[e]);
    os << "\ns,y_index,value\n";
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        for (Eigen::Index j = 0; j < values.cols(); ++j) {
            os << fmt17(s_nodes[static_cast<std::size_t>(i)]) << ',' << j << ',' << fmt17(values(i, j)) << '\n';
        }
    }
}

}  // namespace fbmch
