#include "fbmch/solver.hpp"

#include "fbmch/csv.hpp"
#include "fbmch/error.hpp"

#include <cmath>
#include <ostream>

namespace fbmch {

double phi1(double z) {
    if (z == 0.0) return 1.0;
    return std::expm1(z) / z;
}

namespace {

// (1 - (1 + z) e^{-z}) / z^2, the weight of the left endpoint in the product trapezoid.
double psi_left(double z) {
    if (z < 0.05) {
        double term = 0.5;
        double sum = 0.0;
        double fact = 2.0;
        double power = 1.0;
        for (int n = 0; n < 20; ++n) {
            term = ((n % 2) ? -1.0 : 1.0) * (n + 1.0) * power / fact;
            sum += term;
            power *= z;
            fact *= (n + 3.0);
        }
        return sum;
    }
    return (1.0 - (1.0 + z) * std::exp(-z)) / (z * z);
}

constexpr double kBlowUpLevel = 1e100;

}  // namespace

Solver::Solver(ModelConfig config) : config_(std::move(config)), transform_(config_.n_grid, config_.n_modes) {
    config_.validate();
    const auto K = static_cast<Eigen::Index>(config_.n_modes);
    const double dt = config_.dt();
    decay_.resize(K);
    drift_weight_.resize(K);
    noise_weight_.resize(K);
    for (Eigen::Index k = 0; k < K; ++k) {
        const double lambda = eigenvalue(static_cast<std::size_t>(k));
        const double kk = static_cast<double>(k);
        decay_[k] = std::exp(-lambda * dt);
        drift_weight_[k] = kk * kk * phi1(-lambda * dt) * dt;
        noise_weight_[k] = std::exp(-0.5 * lambda * dt);
    }
}

SpectralField Solver::initial_state() const {
    return transform_.analyze(initial_grid_values(config_, transform_));
}

void Solver::check_bundle(const NoiseBundle& bundle) const {
    if (bundle.n_time() != config_.n_time || std::abs(bundle.T - config_.T) > 1e-14 * config_.T) {
        throw DomainError("noise bundle time grid does not match the solver grid");
    }
    if (bundle.n_modes < config_.n_modes) throw DomainError("noise bundle has fewer modes than the solver");
}

Eigen::VectorXd Solver::forcing(const Eigen::VectorXd& coeffs) const {
    const Eigen::VectorXd grid = transform_.to_grid(coeffs);
    Eigen::VectorXd f(grid.size());
    apply_nonlinearity(config_, grid.data(), f.data(), static_cast<std::size_t>(grid.size()));
    return transform_.to_coeffs(f);
}

Eigen::VectorXd Solver::noise_increment(const NoiseBundle& bundle, std::size_t m) const {
    const auto K = static_cast<Eigen::Index>(config_.n_modes);
    const auto mm = static_cast<Eigen::Index>(m);
    return bundle.fbm_paths.block(0, mm + 1, K, 1) - bundle.fbm_paths.block(0, mm, K, 1);
}

SpectralField Solver::step(const SpectralField& state, const NoiseBundle& bundle, std::size_t m) const {
    check_bundle(bundle);
    if (m >= config_.n_time) throw DomainError("step index beyond the time grid");
    const Eigen::VectorXd& u = state.coeffs();
    Eigen::VectorXd next = decay_.cwiseProduct(u) - drift_weight_.cwiseProduct(forcing(u)) +
                           config_.sigma * noise_weight_.cwiseProduct(noise_increment(bundle, m));
    return SpectralField(std::move(next));
}

TrajectoryRecord Solver::solve(const NoiseBundle& bundle) const {
    check_bundle(bundle);
    const std::size_t N = config_.n_time;
    const auto K = static_cast<Eigen::Index>(config_.n_modes);
    TrajectoryRecord rec;
    rec.time_grid = uniform_grid(config_.T, N);
    rec.states.resize(static_cast<Eigen::Index>(N + 1), K);
    rec.noise_seed = bundle.seed;
    rec.noise_index = bundle.trajectory_index;
    rec.method = "exponential";
    rec.steps = N;
    rec.omega_level = config_.cutoff_n ? *config_.cutoff_n : kDefaultCutoff;

    Eigen::VectorXd u = initial_state().coeffs();
    Eigen::VectorXd f(static_cast<Eigen::Index>(transform_.n_grid()));
    double sup = 0.0;
    for (std::size_t m = 0;; ++m) {
        rec.states.row(static_cast<Eigen::Index>(m)) = u.transpose();
        const Eigen::VectorXd grid = transform_.to_grid(u);
        const double level = grid.cwiseAbs().maxCoeff();
        if (!std::isfinite(level) || level > kBlowUpLevel) throw BlowUpError(m);
        sup = std::max(sup, level);
        if (m == N) break;
        apply_nonlinearity(config_, grid.data(), f.data(), static_cast<std::size_t>(f.size()));
        const Eigen::VectorXd F = transform_.to_coeffs(f);
        u = decay_.cwiseProduct(u) - drift_weight_.cwiseProduct(F) +
            config_.sigma * noise_weight_.cwiseProduct(noise_increment(bundle, m));
    }
    rec.sup_norm = sup;
    rec.omega_n_flag = sup < rec.omega_level;
    return rec;
}

PicardResult Solver::picard(const NoiseBundle& bundle) const {
    check_bundle(bundle);
    if (!config_.cutoff_n) throw DomainError("Picard iteration requires a cutoff level n");
    const std::size_t N = config_.n_time;
    const auto rows = static_cast<Eigen::Index>(N + 1);
    const auto K = static_cast<Eigen::Index>(config_.n_modes);
    const double dt = config_.dt();

    Eigen::VectorXd w_left(K), w_right(K);
    for (Eigen::Index k = 0; k < K; ++k) {
        const double z = eigenvalue(static_cast<std::size_t>(k)) * dt;
        const double kk = static_cast<double>(k);
        const double left = dt * psi_left(z);
        w_left[k] = kk * kk * left;
        w_right[k] = kk * kk * (dt * phi1(-z) - left);
    }

    // Free evolution of the initial data and the noise term, sharing the solver's recursion.
    Eigen::MatrixXd linear(rows, K);
    Eigen::MatrixXd base(rows, K);
    Eigen::VectorXd lin = initial_state().coeffs();
    Eigen::VectorXd conv = Eigen::VectorXd::Zero(K);
    for (std::size_t m = 0; m <= N; ++m) {
        const auto mm = static_cast<Eigen::Index>(m);
        linear.row(mm) = lin.transpose();
        base.row(mm) = (lin + config_.sigma * conv).transpose();
        if (m == N) break;
        lin = decay_.cwiseProduct(lin);
        conv = decay_.cwiseProduct(conv) + noise_weight_.cwiseProduct(noise_increment(bundle, m));
    }

    const Eigen::MatrixXd& S = transform_.synthesis();
    const Eigen::MatrixXd& A = transform_.analysis();
    auto apply_map = [&](const Eigen::MatrixXd& U) {
        Eigen::MatrixXd grid = U * S.transpose();
        Eigen::MatrixXd fgrid(grid.rows(), grid.cols());
        for (Eigen::Index m = 0; m < rows; ++m) {
            Eigen::VectorXd g = grid.row(m).transpose();
            Eigen::VectorXd f(g.size());
            apply_nonlinearity(config_, g.data(), f.data(), static_cast<std::size_t>(g.size()));
            fgrid.row(m) = f.transpose();
        }
        const Eigen::MatrixXd F = fgrid * A.transpose();
        Eigen::MatrixXd out = base;
        Eigen::VectorXd D = Eigen::VectorXd::Zero(K);
        for (std::size_t m = 0; m < N; ++m) {
            const auto mm = static_cast<Eigen::Index>(m);
            D = decay_.cwiseProduct(D) - w_left.cwiseProduct(F.row(mm).transpose()) -
                w_right.cwiseProduct(F.row(mm + 1).transpose());
            out.row(mm + 1) += D.transpose();
        }
        return out;
    };
    auto sup_distance = [&](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
        return ((a - b) * S.transpose()).cwiseAbs().maxCoeff();
    };

    PicardResult result;
    Eigen::MatrixXd U = linear;
    int non_decreasing = 0;
    for (std::size_t j = 0; j < config_.picard_kmax; ++j) {
        Eigen::MatrixXd next = apply_map(U);
        const double d = sup_distance(next, U);
        if (!std::isfinite(d)) throw BlowUpError(j);
        if (!result.distances.empty() && d >= result.distances.back()) {
            if (++non_decreasing >= 3) {
                throw DivergenceError("Picard distances failed to decrease for 3 consecutive iterations");
            }
        } else {
            non_decreasing = 0;
        }
        result.distances.push_back(d);
        U = std::move(next);
        if (d < config_.picard_tol) break;
    }
    result.fixed_point_residual = sup_distance(apply_map(U), U);

    TrajectoryRecord& rec = result.record;
    rec.time_grid = uniform_grid(config_.T, N);
    rec.states = U;
    rec.noise_seed = bundle.seed;
    rec.noise_index = bundle.trajectory_index;
    rec.method = "picard";
    rec.steps = result.distances.size();
    rec.residuals = result.distances;
    rec.omega_level = *config_.cutoff_n;
    rec.sup_norm = (U * S.transpose()).cwiseAbs().maxCoeff();
    rec.omega_n_flag = rec.sup_norm < rec.omega_level;
    return result;
}

Eigen::MatrixXd Solver::grid_values(const TrajectoryRecord& record) const {
    return record.states * transform_.synthesis().transpose();
}

TrajectoryRecord solve_trajectory(const ModelConfig& config, const NoiseBundle& bundle) {
    return Solver(config).solve(bundle);
}

PicardResult picard_solve(const ModelConfig& config, const NoiseBundle& bundle) {
    return Solver(config).picard(bundle);
}

void write_trajectory_grid_csv(const Solver& solver, const TrajectoryRecord& record, std::ostream& os) {
    const Eigen::MatrixXd grid = solver.grid_values(record);
    os << 't';
    for (Eigen::Index j = 0; j < grid.cols(); ++j) os << ",x" << j;
    os << '\n';
    for (Eigen::Index m = 0; m < grid.rows(); ++m) {
        os << fmt17(record.time_grid[static_cast<std::size_t>(m)]);
        for (Eigen::Index j = 0; j < grid.cols(); ++j) os << ',' << fmt17(grid(m, j));
        os << '\n';
    }
}

void write_trajectory_coeff_csv(const TrajectoryRecord& record, std::ostream& os) {
    os << 't';
    for (Eigen::Index k = 0; k < record.states.cols(); ++k) os << ",k" << k;
    os << '\n';
    for (Eigen::Index m = 0; m < record.states.rows(); ++m) {
        os << fmt17(record.time_grid[static_cast<std::size_t>(m)]);
        for (Eigen::Index k = 0; k < record.states.cols(); ++k) os << ',' << fmt17(record.states(m, k));
        os << '\n';
    }
}

}  // namespace fbmch
