#pragma once

#include <complex>
#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "bbf/embedding.hpp"
#include "bbf/feedback.hpp"

namespace bbf {

// psi_n(t): characteristic function of the clock difference
// Delta_n = sum_{j=x}^{n-1} X(1,j) - sum_{l=y}^{n-1} X(2,l), for y <= x <= n:
//   prod_{l=y}^{x-1} (1 + i t / f(l))^{-1} * prod_{j=x}^{n-1} (1 + t^2/f(j)^2)^{-1}
std::complex<double> psi(const FeedbackFunction& fb, int64_t x, int64_t y, int64_t n, double t);

struct AsymptoticConstant {
    double c = 0.0;
    double error_bound = 0.0;        // certified absolute error (quadrature + truncation + tail)
    int64_t truncation_index = 0;    // largest product index evaluated explicitly
    double imaginary_residual = 0.0; // |(1/pi) integral of Im psi|; 0 by symmetry when x == y
};

// c = (1/pi) integral of psi_inf over the real line (Fourier inversion of the
// density of Delta_inf at the origin). The infinite product is evaluated
// explicitly while factors are far from 1 and closed by the exact bound
// log prod_{j>=J} (1+t^2/f^2)^{-1} in [-t^2 S_2(J), 0].
AsymptoticConstant limit_constant_c(const FeedbackFunction& fb, int64_t x, int64_t y,
                                    double rel_tol = 1e-7);

// Finite-n analogue c_n = (1/pi) integral of psi_n.
AsymptoticConstant constant_cn(const FeedbackFunction& fb, int64_t x, int64_t y, int64_t n,
                               double rel_tol = 1e-7);

// Monte Carlo estimates of Pr[|Delta_n| <= eps] / eps for each eps; Delta_n is
// a finite sum of exponentials and is sampled exactly.
std::vector<double> density_slope_cn(const FeedbackFunction& fb, int64_t x, int64_t y, int64_t n,
                                     const std::vector<double>& eps_list, int64_t samples,
                                     uint64_t seed);

// Caches the limit constant per initial state and serves the tail-law
// predictors that reuse it.
class Analytics {
public:
    explicit Analytics(FeedbackFunction fb, double rel_tol = 1e-7);

    const AsymptoticConstant& constant(int64_t x, int64_t y);

    // Pr[L > n] ~ c * S_1(n)
    double predict_tail_L(int64_t x, int64_t y, int64_t n);
    // Pr[LoserHasMoreThan(alpha, n)] ~ c * S_1(ceil(alpha n), n - ceil(alpha n))
    double predict_loser_fraction(int64_t x, int64_t y, double alpha, int64_t n);
    // Pr[|I_1 - I_2| <= q at total n] ~ c * S_1(ceil((n-q)/2), floor((n+q)/2));
    // numerically prechecks S_1^2 >> n^gamma S_2 (gamma = 0.1) and warns.
    double predict_window(int64_t x, int64_t y, int64_t q, int64_t n,
                          std::vector<std::string>* warnings = nullptr);

    const FeedbackFunction& feedback() const { return fb_; }
    SumTable& s1() { return s1_; }
    SumTable& s2() { return s2_; }
    double rel_tol() const { return rel_tol_; }

private:
    FeedbackFunction fb_;
    double rel_tol_;
    SumTable s1_;
    SumTable s2_;
    std::mutex mu_;
    std::map<std::pair<int64_t, int64_t>, AsymptoticConstant> cache_;
};

}  // namespace bbf
