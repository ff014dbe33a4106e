#include "fbmch/model.hpp"

#include "fbmch/error.hpp"

#include <cmath>
#include <sstream>

namespace fbmch {

std::string to_string(SolverKind kind) {
    return kind == SolverKind::exponential ? "exponential" : "picard";
}

SolverKind parse_solver(const std::string& name) {
    if (name == "exponential") return SolverKind::exponential;
    if (name == "picard") return SolverKind::picard;
    throw std::invalid_argument("unknown solver '" + name + "' (expected exponential or picard)");
}

NoiseConfig ModelConfig::noise() const {
    NoiseConfig c;
    c.H = H;
    c.T = T;
    c.n_time = n_time;
    c.n_modes = n_modes;
    c.substeps = substeps;
    c.sampler = sampler;
    return c;
}

std::vector<std::string> ModelConfig::violations() const {
    std::vector<std::string> out;
    if (!(H > 0.5 && H < 1.0)) out.push_back("H must lie in the open interval (1/2, 1)");
    if (!(T > 0.0)) out.push_back("T must be positive");
    if (!std::isfinite(sigma)) out.push_back("sigma must be finite");
    if (!(f_coeffs[0] > 0.0) && !allow_nonconforming) {
        out.push_back("leading coefficient of f must be positive (set allow_nonconforming to override)");
    }
    if (cutoff_n && *cutoff_n < 1) out.push_back("cutoff_n must be a positive integer or none");
    if (n_modes == 0) out.push_back("n_modes must be positive");
    if (n_grid < n_modes) out.push_back("n_grid must be at least n_modes");
    if (n_time == 0) out.push_back("n_time must be positive");
    if (substeps == 0) out.push_back("substeps must be positive");
    if (picard_kmax == 0) out.push_back("picard_kmax must be positive");
    if (!(picard_tol > 0.0)) out.push_back("picard_tol must be positive");
    if (!u0.empty() && u0.size() != 1 && u0.size() != n_grid) {
        out.push_back("u0 needs one value or n_grid samples");
    }
    for (double v : u0) {
        if (!std::isfinite(v)) {
            out.push_back("u0 samples must be finite");
            break;
        }
    }
    return out;
}

void ModelConfig::validate() const {
    const auto errs = violations();
    if (errs.empty()) return;
    std::ostringstream os;
    os << "invalid model configuration:";
    for (const auto& e : errs) os << "\n  - " << e;
    throw ConfigError(os.str());
}

double cutoff_eval(double n, double r, double* derivative) {
    if (r <= n) {
        if (derivative) *derivative = 0.0;
        return 1.0;
    }
    if (r >= n + 1.0) {
        if (derivative) *derivative = 0.0;
        return 0.0;
    }
    const double rho = r - n;
    if (derivative) *derivative = 6.0 * rho * (rho - 1.0);
    return 1.0 - 3.0 * rho * rho + 2.0 * rho * rho * rho;
}

namespace {

inline double poly(const std::array<double, 4>& c, double u) {
    return ((c[0] * u + c[1]) * u + c[2]) * u + c[3];
}

inline double poly_prime(const std::array<double, 4>& c, double u) {
    return (3.0 * c[0] * u + 2.0 * c[1]) * u + c[2];
}

}  // namespace

NonlinearValue nonlinearity_eval(const ModelConfig& config, double u) {
    const double f = poly(config.f_coeffs, u);
    const double df = poly_prime(config.f_coeffs, u);
    if (!config.cutoff_n) return {f, df};
    double dh = 0.0;
    const double h = cutoff_eval(*config.cutoff_n, std::abs(u), &dh);
    const double sgn = (u > 0.0) - (u < 0.0);
    return {h * f, h * df + dh * sgn * f};
}

void apply_nonlinearity(const ModelConfig& config, const double* u, double* f, std::size_t n) {
    const auto& c = config.f_coeffs;
    if (!config.cutoff_n) {
        for (std::size_t i = 0; i < n; ++i) f[i] = poly(c, u[i]);
        return;
    }
    const double cut = *config.cutoff_n;
    for (std::size_t i = 0; i < n; ++i) f[i] = cutoff_eval(cut, std::abs(u[i])) * poly(c, u[i]);
}

void apply_nonlinearity_derivative(const ModelConfig& config, const double* u, double* df, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) df[i] = nonlinearity_eval(config, u[i]).df;
}

Eigen::VectorXd initial_grid_values(const ModelConfig& config, const CosineTransform& transform) {
    const auto M = static_cast<Eigen::Index>(transform.n_grid());
    if (config.u0.empty()) return 0.1 * transform.nodes().array().cos();
    if (config.u0.size() == 1) return Eigen::VectorXd::Constant(M, config.u0[0]);
    if (config.u0.size() != transform.n_grid()) throw ConfigError("u0 sample count does not match n_grid");
    return Eigen::Map<const Eigen::VectorXd>(config.u0.data(), M);
}

}  // namespace fbmch
