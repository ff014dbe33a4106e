#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <numbers>

namespace fbmch {

inline constexpr double kPi = std::numbers::pi;
inline constexpr std::size_t kDefaultModes = 64;
inline constexpr std::size_t kDefaultGrid = 128;

// a_k(x) on [0, pi]; throws DomainError outside the interval.
double basis_eval(std::size_t k, double x);

// Integral of a_k over [0, x].
double basis_primitive(std::size_t k, double x);

inline double eigenvalue(std::size_t k) {
    const double kk = static_cast<double>(k);
    return kk * kk * kk * kk;
}

// (2/pi) * sum_{k >= K} exp(-k^4 t).
double green_truncation_bound(double t, std::size_t n_modes);

double green_eval(double x, double y, double t, std::size_t n_modes = kDefaultModes);
double green_yy_eval(double x, double y, double t, std::size_t n_modes = kDefaultModes);

class SpectralField {
public:
    SpectralField() = default;
    explicit SpectralField(std::size_t n_modes) : coeffs_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_modes))) {}
    explicit SpectralField(Eigen::VectorXd coeffs) : coeffs_(std::move(coeffs)) {}

    std::size_t n_modes() const { return static_cast<std::size_t>(coeffs_.size()); }
    static constexpr double domain_length() { return kPi; }

    const Eigen::VectorXd& coeffs() const { return coeffs_; }
    Eigen::VectorXd& coeffs() { return coeffs_; }
    double operator[](std::size_t k) const { return coeffs_[static_cast<Eigen::Index>(k)]; }
    double& operator[](std::size_t k) { return coeffs_[static_cast<Eigen::Index>(k)]; }

    double evaluate(double x) const;

    bool operator==(const SpectralField& other) const {
        return coeffs_.size() == other.coeffs_.size() && (coeffs_.array() == other.coeffs_.array()).all();
    }

private:
    Eigen::VectorXd coeffs_;
};

// Multiplies coefficient k by exp(-k^4 t).
SpectralField semigroup_apply(const SpectralField& field, double t);

// Midpoint cosine collocation grid x_j = pi (j + 1/2) / M with the matching
// analysis/synthesis pair. Analysis uses the rule (pi/M) sum_j, which is exact
// on products of basis functions with indices below M.
class CosineTransform {
public:
    CosineTransform(std::size_t n_grid, std::size_t n_modes);

    std::size_t n_grid() const { return n_grid_; }
    std::size_t n_modes() const { return n_modes_; }
    double node(std::size_t j) const { return nodes_[static_cast<Eigen::Index>(j)]; }
    const Eigen::VectorXd& nodes() const { return nodes_; }

    Eigen::VectorXd to_grid(const Eigen::VectorXd& coeffs) const { return synthesis_ * coeffs; }
    Eigen::VectorXd to_coeffs(const Eigen::VectorXd& values) const { return analysis_ * values; }
    SpectralField analyze(const Eigen::VectorXd& values) const { return SpectralField(to_coeffs(values)); }
    Eigen::VectorXd synthesize(const SpectralField& field) const { return to_grid(field.coeffs()); }

    // M x K and K x M matrices.
    const Eigen::MatrixXd& synthesis() const { return synthesis_; }
    const Eigen::MatrixXd& analysis() const { return analysis_; }

    // Exact integral over D of a function sampled on the grid, for band-limited data.
    double integrate(const Eigen::VectorXd& values) const;

private:
    std::size_t n_grid_;
    std::size_t n_modes_;
    Eigen::VectorXd nodes_;
    Eigen::MatrixXd synthesis_;
    Eigen::MatrixXd analysis_;
};

}  // namespace fbmch
