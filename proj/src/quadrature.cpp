#include "fbmch/quadrature.hpp"

#include "fbmch/spectral.hpp"

namespace fbmch {

GaussRule gauss_legendre(std::size_t n) {
    if (n == 0) throw DomainError("Gauss rule needs at least one node");
    GaussRule rule;
    if (n == 1) return {{0.0}, {2.0}};
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const double nn = static_cast<double>(n);
    for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(kPi * (static_cast<double>(i) + 0.75) / (nn + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = x;
            for (std::size_t j = 2; j <= n; ++j) {
                const double jj = static_cast<double>(j);
                const double p2 = ((2.0 * jj - 1.0) * x * p1 - (jj - 1.0) * p0) / jj;
                p0 = p1;
                p1 = p2;
            }
            dp = nn * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        // Recompute the derivative at the converged node.
        double p0 = 1.0;
        double p1 = x;
        for (std::size_t j = 2; j <= n; ++j) {
            const double jj = static_cast<double>(j);
            const double p2 = ((2.0 * jj - 1.0) * x * p1 - (jj - 1.0) * p0) / jj;
            p0 = p1;
            p1 = p2;
        }
        dp = nn * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return rule;
}

const GaussRule& gauss16() {
    static const GaussRule rule = gauss_legendre(16);
    return rule;
}

std::vector<double> graded_breaks(double a, double b, double lo_scale, double hi_scale) {
    const double len = b - a;
    std::vector<double> lo_side;
    std::vector<double> hi_side;
    const bool grade_lo = lo_scale > 0.0 && lo_scale < 0.25 * len;
    const bool grade_hi = hi_scale > 0.0 && hi_scale < 0.25 * len;
    const double span_lo = (grade_lo && grade_hi) ? 0.5 * len : len;
    const double span_hi = span_lo;
    if (grade_lo) {
        for (double w = 0.5 * span_lo; w > lo_scale; w *= 0.5) lo_side.push_back(a + w);
    }
    if (grade_hi) {
        for (double w = 0.5 * span_hi; w > hi_scale; w *= 0.5) hi_side.push_back(b - w);
    }
    std::vector<double> out;
    out.reserve(lo_side.size() + hi_side.size() + 3);
    out.push_back(a);
    out.insert(out.end(), lo_side.begin(), lo_side.end());
    if (grade_lo && grade_hi) out.push_back(a + 0.5 * len);
    out.insert(out.end(), hi_side.begin(), hi_side.end());
    out.push_back(b);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end(),
                          [len](double x, double y) { return std::abs(x - y) <= 1e-15 * len; }),
              out.end());
    return out;
}

}  // namespace fbmch
