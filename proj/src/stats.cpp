#include "fbmch/stats.hpp"

#include "fbmch/error.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace fbmch {

void RunningStats::add(double v) {
    if (n == 0) {
        min = max = v;
    } else {
        min = std::min(min, v);
        max = std::max(max, v);
    }
    ++n;
    sum += v;
    sum_sq += v * v;
}

void RunningStats::merge(const RunningStats& other) {
    if (other.n == 0) return;
    if (n == 0) {
        *this = other;
        return;
    }
    n += other.n;
    sum += other.sum;
    sum_sq += other.sum_sq;
    min = std::min(min, other.min);
    max = std::max(max, other.max);
}

double RunningStats::mean() const { return n ? sum / static_cast<double>(n) : 0.0; }

double RunningStats::variance() const {
    if (n < 2) return 0.0;
    const double nn = static_cast<double>(n);
    const double m = sum / nn;
    return std::max(0.0, (sum_sq - nn * m * m) / (nn - 1.0));
}

double RunningStats::std_error() const { return n ? std::sqrt(variance() / static_cast<double>(n)) : 0.0; }

double student_t95(std::size_t dof) {
    if (dof == 0) return std::numeric_limits<double>::infinity();
    boost::math::students_t dist(static_cast<double>(dof));
    return boost::math::quantile(dist, 0.975);
}

LogLogFit loglog_fit(const std::vector<double>& xs, const std::vector<double>& ys, const std::vector<double>& weights) {
    if (xs.size() != ys.size()) throw DomainError("loglog_fit: xs and ys differ in length");
    if (!weights.empty() && weights.size() != xs.size()) throw DomainError("loglog_fit: weights length mismatch");
    if (xs.size() < 2) throw DomainError("loglog_fit: need at least two points");
    const std::size_t n = xs.size();
    std::vector<double> lx(n), ly(n), w(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) throw DomainError("loglog_fit: data must be positive");
        lx[i] = std::log(xs[i]);
        ly[i] = std::log(ys[i]);
        if (!weights.empty()) {
            if (!(weights[i] > 0.0)) throw DomainError("loglog_fit: weights must be positive");
            w[i] = weights[i];
        }
    }
    double sw = 0.0, sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sw += w[i];
        sx += w[i] * lx[i];
        sy += w[i] * ly[i];
    }
    const double mx = sx / sw, my = sy / sw;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += w[i] * (lx[i] - mx) * (lx[i] - mx);
        sxy += w[i] * (lx[i] - mx) * (ly[i] - my);
    }
    if (!(sxx > 0.0)) throw DomainError("loglog_fit: abscissae are all equal");
    LogLogFit fit;
    fit.n = n;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = ly[i] - fit.intercept - fit.slope * lx[i];
        rss += w[i] * r * r;
    }
    fit.residual = rss;
    if (n > 2) {
        // Weights are treated as relative: the scale comes from the residuals.
        const double s2 = rss / static_cast<double>(n - 2);
        fit.half_width = student_t95(n - 2) * std::sqrt(s2 / sxx);
    }
    return fit;
}

}  // namespace fbmch
