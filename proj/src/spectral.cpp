#include "fbmch/spectral.hpp"

#include "fbmch/error.hpp"

#include <cmath>
#include <iostream>
#include <mutex>
#include <string>

namespace fbmch {

namespace {

const double kInvSqrtPi = 1.0 / std::sqrt(kPi);
const double kSqrt2OverPi = std::sqrt(2.0 / kPi);

void require_in_domain(double x) {
    if (!(x >= 0.0 && x <= kPi)) {
        throw DomainError("point " + std::to_string(x) + " lies outside [0, pi]");
    }
}

void require_positive_time(double t) {
    if (!(t > 0.0)) {
        throw DomainError("Green's function requires t > 0, got " + std::to_string(t));
    }
}

void check_truncation(double t, std::size_t n_modes) {
    if (t < 1e-4 && std::exp(-eigenvalue(n_modes) * t) >= 1e-14) {
        warn("Green series truncated at K=" + std::to_string(n_modes) + " is under-resolved at t=" +
             std::to_string(t));
    }
}

}  // namespace

void warn(const std::string& message) {
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    std::cerr << "warning: " << message << '\n';
}

double basis_eval(std::size_t k, double x) {
    require_in_domain(x);
    if (k == 0) return kInvSqrtPi;
    return kSqrt2OverPi * std::cos(static_cast<double>(k) * x);
}

double basis_primitive(std::size_t k, double x) {
    require_in_domain(x);
    if (k == 0) return kInvSqrtPi * x;
    const double kk = static_cast<double>(k);
    return kSqrt2OverPi * std::sin(kk * x) / kk;
}

double green_truncation_bound(double t, std::size_t n_modes) {
    require_positive_time(t);
    double sum = 0.0;
    for (std::size_t k = n_modes;; ++k) {
        const double term = std::exp(-eigenvalue(k) * t);
        sum += term;
        if (term < 1e-18 * sum || term == 0.0) break;
    }
    return 2.0 / kPi * sum;
}

double green_eval(double x, double y, double t, std::size_t n_modes) {
    require_in_domain(x);
    require_in_domain(y);
    require_positive_time(t);
    check_truncation(t, n_modes);
    double sum = 0.0;
    for (std::size_t k = 0; k < n_modes; ++k) {
        sum += std::exp(-eigenvalue(k) * t) * basis_eval(k, x) * basis_eval(k, y);
    }
    return sum;
}

double green_yy_eval(double x, double y, double t, std::size_t n_modes) {
    require_in_domain(x);
    require_in_domain(y);
    require_positive_time(t);
    check_truncation(t, n_modes);
    double sum = 0.0;
    for (std::size_t k = 1; k < n_modes; ++k) {
        const double kk = static_cast<double>(k);
        sum -= kk * kk * std::exp(-eigenvalue(k) * t) * basis_eval(k, x) * basis_eval(k, y);
    }
    return sum;
}

double SpectralField::evaluate(double x) const {
    double sum = 0.0;
    for (std::size_t k = 0; k < n_modes(); ++k) sum += (*this)[k] * basis_eval(k, x);
    return sum;
}

SpectralField semigroup_apply(const SpectralField& field, double t) {
    if (t < 0.0) throw DomainError("semigroup time must be nonnegative");
    SpectralField out = field;
    if (t == 0.0) return out;
    for (std::size_t k = 1; k < out.n_modes(); ++k) out[k] *= std::exp(-eigenvalue(k) * t);
    return out;
}

CosineTransform::CosineTransform(std::size_t n_grid, std::size_t n_modes)
    : n_grid_(n_grid), n_modes_(n_modes) {
    if (n_modes == 0) throw DomainError("transform needs at least one mode");
    if (n_grid < n_modes) {
        throw DomainError("collocation grid of " + std::to_string(n_grid) + " points cannot resolve " +
                          std::to_string(n_modes) + " modes");
    }
    const auto M = static_cast<Eigen::Index>(n_grid);
    const auto K = static_cast<Eigen::Index>(n_modes);
    nodes_.resize(M);
    synthesis_.resize(M, K);
    for (Eigen::Index j = 0; j < M; ++j) {
        nodes_[j] = kPi * (static_cast<double>(j) + 0.5) / static_cast<double>(n_grid);
        for (Eigen::Index k = 0; k < K; ++k) {
            synthesis_(j, k) = basis_eval(static_cast<std::size_t>(k), nodes_[j]);
        }
    }
    analysis_ = synthesis_.transpose() * (kPi / static_cast<double>(n_grid));
}

double CosineTransform::integrate(const Eigen::VectorXd& values) const {
    return values.sum() * kPi / static_cast<double>(n_grid_);
}

}  // namespace fbmch
