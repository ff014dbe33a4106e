#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

namespace fbmch {

inline constexpr double kDefaultQuadTol = 1e-10;

double gamma_fn(double z);
// B(a, b) through log-gamma.
double beta_fn(double a, double b);

class HurstParams {
public:
    explicit HurstParams(double H);

    double H() const { return H_; }
    double c1() const { return c1_; }
    double c2() const { return c2_; }

    // Exponent of the v-substitution r = s + v^p that removes (r - s)^{H - 3/2}.
    double subst_power() const { return 1.0 / (H_ - 0.5); }

private:
    double H_;
    double c1_;
    double c2_;
};

double hurst_c1(double H);
double hurst_c2(double H);

double covariance_R(double t, double s, const HurstParams& params);

double kernel_K(double t, double s, const HurstParams& params, double tol = kDefaultQuadTol);
// Same kernel through the c2 representation, integrated on a different mesh.
double kernel_K_c2form(double t, double s, const HurstParams& params, double tol = kDefaultQuadTol);
double kernel_dK_dt(double t, double s, const HurstParams& params);

// Integral over [lo, hi] of exp(-lambda (hi - r)) dK/dr(r, s), for 0 < s <= lo < hi.
double dK_exp_integral(double lambda, double s, double lo, double hi, const HurstParams& params,
                       double tol = kDefaultQuadTol);

// Per-mode source integral over [max(s, zeta), t] of exp(-k^4 (t - r)) dK/dr(r, s).
// Accepts s < zeta; returns 0 for s >= t.
double khstar_mode_integral(std::size_t k, double t, double zeta, double s, const HurstParams& params,
                            double tol = kDefaultQuadTol);

double khstar_source(double x, double t, double zeta, double y, double s, const HurstParams& params,
                     std::size_t n_modes, double tol = kDefaultQuadTol);

// Per-mode H-norm of exp(-k^4 (t - r)) on a window of length delta.
double hnorm_mode(std::size_t k, double delta, const HurstParams& params, double tol = kDefaultQuadTol);

double hnorm_green(double x, double t, double zeta, const HurstParams& params, std::size_t n_modes,
                   double tol = kDefaultQuadTol);

double lambda_lower(double t, double eps, const HurstParams& params);

// Thread-safe memo of khstar_mode_integral values.
class KhstarCache {
public:
    double get_or_compute(std::size_t k, double t, double zeta, double s, const HurstParams& params, double tol);
    std::size_t size() const;
    void clear();

private:
    struct Key {
        std::uint64_t k, t, zeta, s, H, tol;
        bool operator==(const Key&) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& key) const;
    };
    mutable std::shared_mutex mu_;
    std::unordered_map<Key, double, KeyHash> map_;
};

KhstarCache& khstar_cache();

struct KernelTable {
    double H = 0.75;
    std::vector<double> t_grid;
    std::vector<double> s_grid;
    Eigen::MatrixXd K_values;   // rows t, columns s; zero where s >= t
    Eigen::MatrixXd dK_values;  // same layout
    double quad_tol = kDefaultQuadTol;

    static KernelTable build(const HurstParams& params, std::vector<double> t_grid, std::vector<double> s_grid,
                             double tol = kDefaultQuadTol);

    void write_csv(std::ostream& os) const;
    static KernelTable read_csv(std::istream& is);
};

}  // namespace fbmch
