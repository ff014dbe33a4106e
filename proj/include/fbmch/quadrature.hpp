#pragma once

#include "fbmch/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace fbmch {

struct GaussRule {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;
};

// n-point Gauss-Legendre rule by Newton iteration on the three-term recurrence.
GaussRule gauss_legendre(std::size_t n);

// Shared 16-point rule used by every composite integrator.
const GaussRule& gauss16();

struct QuadResult {
    double value = 0.0;
    double residual = 0.0;
    std::size_t panels = 0;
};

inline constexpr std::size_t kMaxPanels = std::size_t{1} << 16;

// Breakpoints on [a, b] refined geometrically (ratio 2) toward a until the
// panel next to a is narrower than lo_scale, and likewise toward b with
// hi_scale. A nonpositive scale disables grading on that side.
std::vector<double> graded_breaks(double a, double b, double lo_scale, double hi_scale);

template <class F>
double gauss_on_panels(F&& f, const std::vector<double>& breaks, std::size_t split, double* abs_sum = nullptr) {
    const GaussRule& rule = gauss16();
    double total = 0.0;
    double total_abs = 0.0;
    for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
        const double width = (breaks[p + 1] - breaks[p]) / static_cast<double>(split);
        for (std::size_t q = 0; q < split; ++q) {
            const double lo = breaks[p] + width * static_cast<double>(q);
            const double half = 0.5 * width;
            const double mid = lo + half;
            double panel = 0.0;
            double panel_abs = 0.0;
            for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
                const double v = f(mid + half * rule.nodes[i]);
                panel += rule.weights[i] * v;
                panel_abs += rule.weights[i] * std::abs(v);
            }
            total += half * panel;
            total_abs += half * panel_abs;
        }
    }
    if (abs_sum) *abs_sum = total_abs;
    return total;
}

// Composite Gauss-Legendre on the given breakpoints, halving every panel until
// two successive estimates agree to tol relative to the integral of |f|.
template <class F>
QuadResult integrate_panels(F&& f, const std::vector<double>& breaks, double tol,
                            std::size_t max_panels = kMaxPanels) {
    if (breaks.size() < 2) return {};
    const std::size_t base = breaks.size() - 1;
    double scale = 0.0;
    double prev = gauss_on_panels(f, breaks, 1, &scale);
    for (std::size_t split = 2; base * split <= max_panels; split *= 2) {
        const double cur = gauss_on_panels(f, breaks, split, &scale);
        const double diff = std::abs(cur - prev);
        if (diff <= tol * scale || scale == 0.0) return {cur, diff, base * split};
        prev = cur;
        if (base * split * 2 > max_panels) {
            throw NumericError("composite quadrature did not converge within " + std::to_string(max_panels) +
                                   " panels",
                               diff / scale);
        }
    }
    throw NumericError("composite quadrature mesh exceeds panel cap", 1.0);
}

template <class F>
QuadResult integrate_graded(F&& f, double a, double b, double lo_scale, double hi_scale, double tol) {
    if (!(b > a)) return {};
    return integrate_panels(f, graded_breaks(a, b, lo_scale, hi_scale), tol);
}

}  // namespace fbmch
