#include "fbmch/error.hpp"
#include "fbmch/kernel.hpp"
#include "fbmch/quadrature.hpp"
#include "fbmch/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

namespace fbmch {

namespace {

std::string fmt_short(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

// Nodes and weights of GL16 on breakpoints graded toward both ends.
void graded_nodes(double a, double b, double ratio, std::vector<double>& s, std::vector<double>& w) {
    const GaussRule& rule = gauss16();
    const auto br = graded_breaks(a, b, ratio * (b - a), ratio * (b - a));
    for (std::size_t p = 0; p + 1 < br.size(); ++p) {
        const double half = 0.5 * (br[p + 1] - br[p]);
        const double mid = br[p] + half;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            s.push_back(mid + half * rule.nodes[i]);
            w.push_back(half * rule.weights[i]);
        }
    }
}

// Vector-valued composite Gauss rule, halving panels until the largest change is
// below tol times the total.
Eigen::VectorXd integrate_vector(const std::function<Eigen::VectorXd(double)>& f, const std::vector<double>& breaks,
                                 Eigen::Index dim, double tol) {
    const GaussRule& rule = gauss16();
    auto pass = [&](std::size_t split) {
        Eigen::VectorXd total = Eigen::VectorXd::Zero(dim);
        for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
            const double width = (breaks[p + 1] - breaks[p]) / static_cast<double>(split);
            for (std::size_t q = 0; q < split; ++q) {
                const double half = 0.5 * width;
                const double mid = breaks[p] + width * static_cast<double>(q) + half;
                for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
                    total += (half * rule.weights[i]) * f(mid + half * rule.nodes[i]);
                }
            }
        }
        return total;
    };
    const std::size_t base = breaks.size() - 1;
    Eigen::VectorXd prev = pass(1);
    for (std::size_t split = 2; base * split <= 4096; split *= 2) {
        Eigen::VectorXd cur = pass(split);
        const double diff = (cur - prev).cwiseAbs().maxCoeff();
        if (diff <= tol * cur.cwiseAbs().sum()) return cur;
        prev = std::move(cur);
    }
    throw NumericError("per-mode window integral did not converge", (prev).cwiseAbs().sum());
}

// Per-mode integrals over s in [t - eps_i, t] of I_k(s)^2 with I_k the
// source integral from s to t; rows follow the eps order given.
Eigen::MatrixXd restricted_mode_integrals(const HurstParams& params, double t, const std::vector<double>& eps,
                                          std::size_t K) {
    std::vector<std::size_t> order(eps.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return eps[a] > eps[b]; });
    const auto dim = static_cast<Eigen::Index>(K);
    auto f = [&](double s) {
        Eigen::VectorXd v(dim);
        for (std::size_t k = 0; k < K; ++k) {
            const double I = khstar_mode_integral(k, t, s, s, params, 1e-12);
            v[static_cast<Eigen::Index>(k)] = I * I;
        }
        return v;
    };
    Eigen::MatrixXd out(static_cast<Eigen::Index>(eps.size()), dim);
    Eigen::VectorXd cum = Eigen::VectorXd::Zero(dim);
    for (std::size_t j = order.size(); j-- > 0;) {
        const double e = eps[order[j]];
        if (!(e > 0.0 && e <= t)) throw DomainError("restricted windows must satisfy 0 < eps <= t");
        const double lo = t - e;
        const double hi = j + 1 < order.size() ? t - eps[order[j + 1]] : t;
        if (hi > lo) {
            const bool last = j + 1 == order.size();
            // Grading toward t resolves both the (t - s)^{2H-1} endpoint and the 1/k^4 layers.
            const auto br = graded_breaks(lo, hi, -1.0, last ? 1e-10 * (hi - lo) : 1e-6 * (hi - lo));
            cum += integrate_vector(f, br, dim, 1e-9);
        }
        out.row(static_cast<Eigen::Index>(order[j])) = cum.transpose();
    }
    return out;
}

}  // namespace

ScanReport scan_second_estimate(double H, double t, const std::vector<double>& delta_fractions, std::size_t n_modes,
                                std::size_t n_grid, double sigma) {
    const HurstParams params(H);
    const CosineTransform tr(n_grid, n_modes);
    const Eigen::MatrixXd& S = tr.synthesis();
    const auto K = static_cast<Eigen::Index>(n_modes);
    const double dy = kPi / static_cast<double>(n_grid);

    ScanReport rep;
    rep.name = "second_estimate_H" + fmt_short(H);
    rep.abscissa_name = "delta";
    for (double f : delta_fractions) {
        const double delta = f * t;
        if (!(delta > 0.0 && delta <= t)) throw DomainError("window lengths must lie in (0, t]");
        const double zeta = t - delta;
        std::vector<double> s, w;
        if (zeta > 0.0) graded_nodes(0.0, zeta, 1e-6, s, w);
        graded_nodes(zeta, t, 1e-6, s, w);
        double total = 0.0;
        Eigen::VectorXd I(K);
        for (std::size_t i = 0; i < s.size(); ++i) {
            for (Eigen::Index k = 0; k < K; ++k) {
                I[k] = khstar_mode_integral(static_cast<std::size_t>(k), t, zeta, s[i], params, 1e-10);
            }
            // F(x, y) = sum_k a_k(x) a_k(y) I_k; sup over x for every y.
            const Eigen::MatrixXd F = S * I.asDiagonal() * S.transpose();
            const double inner = F.cwiseAbs2().colwise().maxCoeff().sum() * dy;
            total += w[i] * inner;
        }
        rep.abscissae.push_back(delta);
        rep.values.push_back(sigma * sigma * total);
        rep.std_errors.push_back(0.0);
    }
    bool monotone = true;
    for (std::size_t i = 0; i + 1 < rep.values.size(); ++i) {
        if ((rep.abscissae[i] - rep.abscissae[i + 1]) * (rep.values[i] - rep.values[i + 1]) <= 0.0) monotone = false;
    }
    rep.add_check("Q increasing in delta", monotone);
    rep.fit_slope();
    rep.reference_exponent = (4.0 * H - 1.0) / 2.0;
    rep.reference_tag = "bound exponent (4H-1)/2";
    rep.band_lo = rep.reference_exponent - 0.1;
    rep.band_hi = rep.reference_exponent + 0.25;
    rep.add_check("slope within band", rep.fit.slope >= rep.band_lo && rep.fit.slope <= rep.band_hi,
                  "slope " + fmt_short(rep.fit.slope));
    return rep;
}

std::vector<double> lower_bound_values(double H, double t, const std::vector<double>& eps, double x,
                                       std::size_t n_modes) {
    const HurstParams params(H);
    const Eigen::MatrixXd modes = restricted_mode_integrals(params, t, eps, n_modes);
    std::vector<double> out(eps.size());
    for (std::size_t i = 0; i < eps.size(); ++i) {
        double sum = 0.0;
        for (std::size_t k = 0; k < n_modes; ++k) {
            const double a = basis_eval(k, x);
            sum += a * a * modes(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
        }
        out[i] = sum;
    }
    return out;
}

ScanReport check_lower_bound(double H, double t, const std::vector<double>& eps_fractions, std::size_t n_modes,
                             double sigma) {
    const HurstParams params(H);
    std::vector<double> eps;
    for (double f : eps_fractions) eps.push_back(f * t);
    const Eigen::MatrixXd modes = restricted_mode_integrals(params, t, eps, n_modes);
    const std::vector<double> xs{0.0, kPi / 4.0, kPi / 2.0};

    Eigen::MatrixXd L(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(eps.size()));
    for (std::size_t xi = 0; xi < xs.size(); ++xi) {
        for (std::size_t i = 0; i < eps.size(); ++i) {
            double sum = 0.0;
            for (std::size_t k = 0; k < n_modes; ++k) {
                const double a = basis_eval(k, xs[xi]);
                sum += a * a * modes(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
            }
            L(static_cast<Eigen::Index>(xi), static_cast<Eigen::Index>(i)) = sigma * sigma * sum;
        }
    }

    ScanReport rep;
    rep.name = "lower_bound_H" + fmt_short(H);
    rep.abscissa_name = "eps";
    std::vector<double> lam(eps.size());
    std::size_t largest = 0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        lam[i] = lambda_lower(t, eps[i], params);
        if (eps[i] > eps[largest]) largest = i;
    }
    bool positive = true;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        const double lmin = L.col(static_cast<Eigen::Index>(i)).minCoeff();
        if (!(lmin > 0.0)) positive = false;
        rep.abscissae.push_back(eps[i]);
        rep.values.push_back(lmin);
        rep.std_errors.push_back(0.0);
    }
    rep.add_check("L(eps) > 0 at every eps and x", positive);

    // One constant, fitted where the window is widest, must hold everywhere.
    double c2 = std::numeric_limits<double>::infinity();
    for (std::size_t xi = 0; xi < xs.size(); ++xi) {
        c2 = std::min(c2, L(static_cast<Eigen::Index>(xi), static_cast<Eigen::Index>(largest)) / lam[largest]);
    }
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t xi = 0; xi < xs.size(); ++xi) {
        for (std::size_t i = 0; i < eps.size(); ++i) {
            if (lam[i] <= 0.0) continue;
            worst = std::min(worst, L(static_cast<Eigen::Index>(xi), static_cast<Eigen::Index>(i)) / (c2 * lam[i]));
        }
    }
    rep.metrics["c2"] = c2;
    rep.metrics["min_ratio_over_fitted_bound"] = worst;
    rep.add_check("L(eps) >= c2 Lambda(H,t,eps) with c2 fitted at the largest eps", c2 > 0.0 && worst >= 1.0 - 1e-12,
                  "c2 " + fmt_short(c2) + ", min L/(c2 Lambda) " + fmt_short(worst));

    const double lam_ref = lambda_lower(1.0, 0.5, HurstParams(0.75));
    const double lam_err = std::abs(lam_ref - kLambdaReference) / kLambdaReference;
    rep.metrics["lambda_reference_relative_error"] = lam_err;
    rep.add_check("Lambda(0.75, 1, 0.5) matches the high-precision value to 1e-9", lam_err <= 1e-9,
                  "relative error " + fmt_short(lam_err));

    auto ratio = [&](double e) { return std::pow(e, 2.0 * H + 0.25) / lambda_lower(t, e, params); };
    const double drop = ratio(1e-1 * t) / ratio(1e-4 * t);
    rep.metrics["upper_over_lower_drop_1e-1_to_1e-4"] = drop;
    rep.add_check("eps^{2H+1/4}/Lambda drops at least 10x from eps = 1e-1 to 1e-4", drop >= 10.0,
                  "drop factor " + fmt_short(drop));

    std::vector<double> lam_pos, eps_pos;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        if (lam[i] > 0.0) {
            lam_pos.push_back(lam[i]);
            eps_pos.push_back(eps[i]);
        }
    }
    if (eps_pos.size() >= 2) {
        rep.reference_exponent = loglog_fit(eps_pos, lam_pos).slope;
        rep.reference_tag = "fitted slope of Lambda(H,t,eps)";
    }
    rep.fit_slope();
    return rep;
}

}  // namespace fbmch
