#include "fbmch/kernel.hpp"

#include "fbmch/error.hpp"
#include "fbmch/quadrature.hpp"
#include "fbmch/spectral.hpp"

#include <bit>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <algorithm>
#include <mutex>
#include <ostream>
#include <sstream>

namespace fbmch {

double gamma_fn(double z) {
    if (!(z > 0.0)) throw DomainError("gamma_fn requires z > 0");
    return std::tgamma(z);
}

double beta_fn(double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) throw DomainError("beta_fn requires positive arguments");
    return std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
}

double hurst_c1(double H) {
    return std::sqrt(H * (2.0 * H - 1.0) / beta_fn(2.0 - 2.0 * H, H - 0.5));
}

double hurst_c2(double H) {
    const double log_ratio = std::lgamma(1.5 - H) - std::lgamma(H + 0.5) - std::lgamma(2.0 - 2.0 * H);
    return std::sqrt(2.0 * H * std::exp(log_ratio));
}

HurstParams::HurstParams(double H) : H_(H) {
    if (!(H > 0.5 && H < 1.0)) {
        throw DomainError("Hurst exponent must lie in (1/2, 1), got " + std::to_string(H));
    }
    c1_ = hurst_c1(H);
    c2_ = hurst_c2(H);
}

double covariance_R(double t, double s, const HurstParams& params) {
    if (t < 0.0 || s < 0.0) throw DomainError("covariance_R requires nonnegative times");
    const double h2 = 2.0 * params.H();
    return 0.5 * (std::pow(t, h2) + std::pow(s, h2) - std::pow(std::abs(t - s), h2));
}

namespace {

// c1 * integral over v in [va, vb] of (1 + v^p / s)^{H - 1/2} exp(-lambda (hi - s - v^p)), times p.
double substituted_integral(double lambda, double s, double lo, double hi, const HurstParams& params,
                            double tol) {
    const double H = params.H();
    const double p = params.subst_power();
    const double inv_p = H - 0.5;
    const double va = std::pow(lo - s, inv_p);
    const double vb = std::pow(hi - s, inv_p);
    const double vs = std::pow(s, inv_p);
    double lo_scale = 0.0;
    if (vs > va && vs < 0.25 * (vb - va)) lo_scale = 0.5 * (vs - va);
    double hi_scale = 0.0;
    if (lambda > 0.0) hi_scale = (0.25 / lambda) / (p * std::pow(vb, p - 1.0));
    // Integrate in w = vb - v so that hi - r is formed without cancellation near r = hi.
    const double span = hi - s;
    auto f = [&](double w) {
        const double ratio = std::log1p(-w / vb);
        const double r_minus_s = span * std::exp(p * ratio);
        const double weight = std::pow(1.0 + r_minus_s / s, H - 0.5);
        if (lambda == 0.0) return weight;
        const double gap = -span * std::expm1(p * ratio);
        return weight * std::exp(-lambda * gap);
    };
    const QuadResult res = integrate_graded(f, 0.0, vb - va, hi_scale, lo_scale, tol);
    return params.c1() * p * res.value;
}

}  // namespace

double kernel_K(double t, double s, const HurstParams& params, double tol) {
    if (!(s > 0.0)) throw DomainError("kernel_K requires s > 0");
    if (!(s < t)) throw DomainError("kernel_K requires s < t");
    return substituted_integral(0.0, s, s, t, params, tol);
}

double kernel_K_c2form(double t, double s, const HurstParams& params, double tol) {
    if (!(s > 0.0)) throw DomainError("kernel_K requires s > 0");
    if (!(s < t)) throw DomainError("kernel_K requires s < t");
    const double a = params.H() - 0.5;
    auto f = [&](double u) {
        const double d = u - s;
        if (d <= 0.0) return 0.0;
        return std::pow(d, a - 1.0) * std::expm1(a * std::log1p(d / s));
    };
    const QuadResult res = integrate_graded(f, s, t, 1e-13 * (t - s), 0.0, tol);
    return params.c2() * (std::pow(t - s, a) + a * res.value);
}

double kernel_dK_dt(double t, double s, const HurstParams& params) {
    if (!(s > 0.0)) throw DomainError("kernel_dK_dt requires s > 0");
    if (!(s < t)) throw DomainError("kernel_dK_dt requires s < t");
    const double H = params.H();
    return params.c1() * std::pow(t / s, H - 0.5) * std::pow(t - s, H - 1.5);
}

double dK_exp_integral(double lambda, double s, double lo, double hi, const HurstParams& params, double tol) {
    if (!(s > 0.0)) throw DomainError("source time must be positive");
    if (lo < s) throw DomainError("integration window starts before the source time");
    if (!(hi > lo)) return 0.0;
    return substituted_integral(lambda, s, lo, hi, params, tol);
}

double khstar_mode_integral(std::size_t k, double t, double zeta, double s, const HurstParams& params, double tol) {
    if (s >= t) return 0.0;
    const double lo = std::max(s, zeta);
    if (lo >= t) return 0.0;
    return dK_exp_integral(eigenvalue(k), s, lo, t, params, tol);
}

double khstar_source(double x, double t, double zeta, double y, double s, const HurstParams& params,
                     std::size_t n_modes, double tol) {
    if (s >= t) return 0.0;
    if (s < zeta) throw DomainError("khstar_source requires s >= window start");
    KhstarCache& cache = khstar_cache();
    double sum = 0.0;
    for (std::size_t k = 0; k < n_modes; ++k) {
        sum += basis_eval(k, x) * basis_eval(k, y) * cache.get_or_compute(k, t, zeta, s, params, tol);
    }
    return sum;
}

double hnorm_mode(std::size_t k, double delta, const HurstParams& params, double tol) {
    if (!(delta > 0.0)) throw DomainError("hnorm window must have positive length");
    const double H = params.H();
    const double lambda = eigenvalue(k);
    if (k == 0) return std::pow(delta, 2.0 * H);
    // z = w^q with q = 1/(2H-1) absorbs z^{2H-2}.
    const double q = 1.0 / (2.0 * H - 1.0);
    const double wb = std::pow(delta, 2.0 * H - 1.0);
    auto f = [&](double w) {
        const double z = std::pow(w, q);
        const double rest = std::max(0.0, delta - z);
        return std::exp(-lambda * z) * (-std::expm1(-2.0 * lambda * rest)) / (2.0 * lambda);
    };
    const double lo_scale = 0.25 * std::pow(lambda, 1.0 - 2.0 * H);
    const QuadResult res = integrate_graded(f, 0.0, wb, lo_scale, 0.0, tol);
    return 2.0 * H * res.value;
}

double hnorm_green(double x, double t, double zeta, const HurstParams& params, std::size_t n_modes, double tol) {
    if (!(zeta >= 0.0 && zeta < t)) throw DomainError("hnorm_green requires 0 <= zeta < t");
    double sum = 0.0;
    for (std::size_t k = 0; k < n_modes; ++k) {
        const double a = basis_eval(k, x);
        sum += a * a * hnorm_mode(k, t - zeta, params, tol);
    }
    return sum;
}

double lambda_lower(double t, double eps, const HurstParams& params) {
    if (!(eps > 0.0) || eps > t) throw DomainError("lambda_lower requires 0 < eps <= t");
    const double H = params.H();
    const double a = t - eps;
    if (a <= 0.0) return 0.0;
    const double c4 = 4.0 - 2.0 * H;
    const double c3 = 3.0 - 2.0 * H;
    const double c2 = 2.0 - 2.0 * H;
    const double e = eps / a;
    double bracket = 0.0;
    if (e < 0.1) {
        // The three terms cancel through second order in e; sum the binomial tail directly.
        double coeff = c4 * (c4 - 1.0) * (c4 - 2.0) / 6.0;
        double power = e * e * e;
        double tail = 0.0;
        for (int n = 3; n < 200; ++n) {
            const double term = coeff * power;
            tail += term;
            if (std::abs(term) <= 1e-18 * std::abs(tail)) break;
            coeff *= (c4 - n) / (n + 1.0);
            power *= e;
        }
        bracket = std::pow(a, c4) / (c4 * c3) * tail;
    } else {
        bracket = (std::pow(t, c4) - std::pow(a, c4)) / (c4 * c3) - std::pow(a, c2) * (t * t - a * a) / 2.0 +
                  c2 * std::pow(a, c3) * eps / c3;
    }
    return std::pow(a, 2.0 * H - 1.0) / std::pow(eps, c3) * bracket;
}

std::size_t KhstarCache::KeyHash::operator()(const Key& key) const {
    std::uint64_t h = 1469598103934665603ULL;
    for (std::uint64_t part : {key.k, key.t, key.zeta, key.s, key.H, key.tol}) {
        h ^= part + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
}

double KhstarCache::get_or_compute(std::size_t k, double t, double zeta, double s, const HurstParams& params,
                                   double tol) {
    const Key key{k,
                  std::bit_cast<std::uint64_t>(t),
                  std::bit_cast<std::uint64_t>(zeta),
                  std::bit_cast<std::uint64_t>(s),
                  std::bit_cast<std::uint64_t>(params.H()),
                  std::bit_cast<std::uint64_t>(tol)};
    {
        std::shared_lock lock(mu_);
        auto it = map_.find(key);
        if (it != map_.end()) return it->second;
    }
    const double value = khstar_mode_integral(k, t, zeta, s, params, tol);
    std::unique_lock lock(mu_);
    if (map_.size() > 4'000'000) map_.clear();
    map_.emplace(key, value);
    return value;
}

std::size_t KhstarCache::size() const {
    std::shared_lock lock(mu_);
    return map_.size();
}

void KhstarCache::clear() {
    std::unique_lock lock(mu_);
    map_.clear();
}

KhstarCache& khstar_cache() {
    static KhstarCache cache;
    return cache;
}

KernelTable KernelTable::build(const HurstParams& params, std::vector<double> t_grid, std::vector<double> s_grid,
                               double tol) {
    KernelTable table;
    table.H = params.H();
    table.quad_tol = tol;
    table.t_grid = std::move(t_grid);
    table.s_grid = std::move(s_grid);
    const auto nt = static_cast<Eigen::Index>(table.t_grid.size());
    const auto ns = static_cast<Eigen::Index>(table.s_grid.size());
    table.K_values = Eigen::MatrixXd::Zero(nt, ns);
    table.dK_values = Eigen::MatrixXd::Zero(nt, ns);
    for (Eigen::Index j = 0; j < ns; ++j) {
        const double s = table.s_grid[static_cast<std::size_t>(j)];
        double acc = 0.0;
        double prev = s;
        for (Eigen::Index i = 0; i < nt; ++i) {
            const double t = table.t_grid[static_cast<std::size_t>(i)];
            if (t <= s) continue;
            // K(t, s) accumulated from increments of dK/dr between consecutive grid times.
            acc += substituted_integral(0.0, s, prev, t, params, tol);
            prev = t;
            table.K_values(i, j) = acc;
            table.dK_values(i, j) = kernel_dK_dt(t, s, params);
        }
    }
    return table;
}

void KernelTable::write_csv(std::ostream& os) const {
    os << "# H=" << std::setprecision(17) << H << " quad_tol=" << quad_tol << '\n';
    os << "# t_grid";
    for (double t : t_grid) os << ' ' << t;
    os << "\n# s_grid";
    for (double s : s_grid) os << ' ' << s;
    os << "\nt,s,K,dKdt\n";
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        for (std::size_t j = 0; j < s_grid.size(); ++j) {
            if (s_grid[j] >= t_grid[i]) continue;
            const auto ii = static_cast<Eigen::Index>(i);
            const auto jj = static_cast<Eigen::Index>(j);
            os << t_grid[i] << ',' << s_grid[j] << ',' << K_values(ii, jj) << ',' << dK_values(ii, jj) << '\n';
        }
    }
}

KernelTable KernelTable::read_csv(std::istream& is) {
    KernelTable table;
    std::string line;
    if (!std::getline(is, line) || line.rfind("# H=", 0) != 0) {
        throw std::invalid_argument("kernel table CSV lacks its metadata line");
    }
    {
        std::istringstream meta(line.substr(4));
        std::string tol_field;
        meta >> table.H >> tol_field;
        if (tol_field.rfind("quad_tol=", 0) == 0) table.quad_tol = std::stod(tol_field.substr(9));
    }
    auto read_grid = [&](const std::string& tag, std::vector<double>& grid) {
        if (!std::getline(is, line) || line.rfind(tag, 0) != 0) {
            throw std::invalid_argument("kernel table CSV lacks its " + tag.substr(2) + " line");
        }
        std::istringstream values(line.substr(tag.size()));
        for (double v; values >> v;) grid.push_back(v);
    };
    read_grid("# t_grid", table.t_grid);
    read_grid("# s_grid", table.s_grid);
    if (!std::getline(is, line) || line != "t,s,K,dKdt") {
        throw std::invalid_argument("kernel table CSV header must be t,s,K,dKdt");
    }
    auto index_of = [](const std::vector<double>& grid, double v) {
        auto it = std::lower_bound(grid.begin(), grid.end(), v);
        if (it == grid.end() || *it != v) throw std::invalid_argument("kernel table row is off its grid");
        return static_cast<Eigen::Index>(it - grid.begin());
    };
    table.K_values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(table.t_grid.size()),
                                           static_cast<Eigen::Index>(table.s_grid.size()));
    table.dK_values = table.K_values;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream fields(line);
        double t = 0, s = 0, K = 0, dK = 0;
        char c1 = 0, c2 = 0, c3 = 0;
        fields >> t >> c1 >> s >> c2 >> K >> c3 >> dK;
        if (!fields || c1 != ',' || c2 != ',' || c3 != ',') {
            throw std::invalid_argument("malformed kernel table row: " + line);
        }
        const Eigen::Index i = index_of(table.t_grid, t);
        const Eigen::Index j = index_of(table.s_grid, s);
        table.K_values(i, j) = K;
        table.dK_values(i, j) = dK;
    }
    return table;
}

}  // namespace fbmch
