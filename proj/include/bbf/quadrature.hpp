#pragma once

#include <functional>

namespace bbf {

struct QuadResult {
    double value = 0.0;
    double error = 0.0;  // estimated absolute error
    long evaluations = 0;
    bool converged = true;
};

// Adaptive Gauss-Kronrod 7/15 on [a, b]. Splits the worst interval until the
// summed error estimate meets abs_tol + rel_tol*|integral|.
QuadResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                              double rel_tol = 1e-10, double abs_tol = 0.0,
                              int max_intervals = 4000);

// Composite Gauss-Legendre with a fixed panel count; an independent rule used
// for cross-checking the adaptive result.
double integrate_panels(const std::function<double(double)>& f, double a, double b, int panels);

}  // namespace bbf
