#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace bbf {

// Inverse standard normal CDF (Acklam's rational approximation, ~1e-9).
double inverse_normal_cdf(double p);

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
};

// Wilson score interval; well behaved at small hit counts.
Interval wilson_interval(int64_t hits, int64_t trials, double confidence);

// Kolmogorov-Smirnov statistic sup|F_hat - F| against a reference CDF.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);

// Least-squares slope of ln(y) against ln(x).
double fit_log_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace bbf
