#pragma once

#include <cstddef>
#include <vector>

namespace fbmch {

// Mergeable first and second moments plus extrema. Merging is exact in the
// sense that the same partition merged in the same order gives the same bits.
struct RunningStats {
    std::size_t n = 0;
    double sum = 0.0;
    double sum_sq = 0.0;
    double min = 0.0;
    double max = 0.0;

    void add(double v);
    void merge(const RunningStats& other);
    double mean() const;
    double variance() const;  // unbiased
    double std_error() const;
};

struct LogLogFit {
    double slope = 0.0;
    double intercept = 0.0;
    double half_width = 0.0;  // 95% confidence half-width of the slope
    double residual = 0.0;    // weighted residual sum of squares
    std::size_t n = 0;
};

// Weighted least squares of log ys against log xs. Empty weights means unit weights.
LogLogFit loglog_fit(const std::vector<double>& xs, const std::vector<double>& ys,
                     const std::vector<double>& weights = {});

// Two-sided 95% Student-t quantile with the given degrees of freedom.
double student_t95(std::size_t dof);

}  // namespace fbmch
