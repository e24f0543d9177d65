#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace bbf {

// Thrown when a requested quantity diverges or a tolerance cannot be met.
// Carries the best bound achieved so callers can report it.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what, double best = std::numeric_limits<double>::quiet_NaN())
        : std::runtime_error(what), best_bound(best) {}
    double best_bound;
};

enum class FeedbackKind { power, power_log_exponent, power_times_log, custom };

// A reinforcement function f together with its characteristic exponent
// h(x) = x * (ln f)'(x). Built-in families are normalized so f(1) = 1.
// Immutable after construction; safe to share across threads.
class FeedbackFunction {
public:
    static FeedbackFunction power(double p);                          // f(x) = x^p
    static FeedbackFunction power_log_exponent(double p, double a);   // f(x) = x^(p ln^a x)
    static FeedbackFunction power_times_log(double p);                // f(x) = x^p ln(x+e-1)
    // Custom f must come with its exponent h; the _fd variant derives h by a
    // central finite difference with step x*1e-6 and flags itself in reports.
    static FeedbackFunction custom(std::string name, std::function<double(double)> f,
                                   std::function<double(double)> h);
    static FeedbackFunction custom_fd(std::string name, std::function<double(double)> f);

    // f(x); overflows to +inf once ln f(x) exceeds the double range, in which
    // case callers should work with log_value instead.
    double value(double x) const;
    double log_value(double x) const;  // ln f(x), closed form for built-ins
    double exponent(double x) const;   // characteristic exponent h(x)

    // Certified lower bound on inf_{t >= x} h(t) for the built-in families;
    // a grid-sampled heuristic for custom functions.
    double tail_exponent_lower(double x) const;
    // Upper counterpart sup_{t >= x} h(t); +inf when unbounded or unknown.
    double tail_exponent_upper(double x) const;

    // Smallest index from which x -> f(x)^{-r} is known convex (enables the
    // tighter midpoint tail bracket); huge sentinel when unknown.
    double convex_tail_from() const;

    bool exponent_from_finite_difference() const { return fd_exponent_; }
    FeedbackKind kind() const { return kind_; }
    double p() const { return p_; }
    double a() const { return a_; }
    const std::string& name() const { return name_; }

private:
    FeedbackFunction() = default;
    FeedbackKind kind_ = FeedbackKind::power;
    double p_ = 2.0;
    double a_ = 0.0;
    std::string name_;
    std::function<double(double)> custom_f_;
    std::function<double(double)> custom_h_;
    bool fd_exponent_ = false;
};

struct ValidityReport {
    bool passed = false;
    bool exponent_liminf_above_one = false;   // condition 1
    bool exponent_subpolynomial = false;      // condition 2: x^{-1/4} h(x) -> 0
    bool exponent_slowly_varying = false;     // condition 3: empirical C bounded
    bool monopoly_sum_finite = false;         // S_1(1) < infinity
    double min_tail_exponent = 0.0;
    double empirical_slow_variation_c = 0.0;
    double s1_from_one = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::string> warnings;
};

// Heuristic grid-sampled check of the validity conditions; reports, never
// blocks simulation. grid_max >= 100.
ValidityReport check_validity(const FeedbackFunction& fb, int64_t grid_max = 100000,
                              double tolerance_c = 10.0);

// f(n) for integer-valued call sites; n >= 1 enforced.
double evaluate_f(const FeedbackFunction& fb, double n);
double characteristic_exponent(const FeedbackFunction& fb, double x);

// S_r(n, m) = sum_{j=n}^{m-1} f(j)^{-r}; empty when m <= n.
double partial_sum_S(const FeedbackFunction& fb, double r, int64_t n, int64_t m);

// S_r(n) = S_r(n, +inf). Sums directly until the certified bracket around the
// unsummed tail is below rel_eps of the total, then adds the bracket midpoint.
double tail_sum_S(const FeedbackFunction& fb, double r, int64_t n, double rel_eps = 1e-12);

// M_r(t) = integral_t^inf f(x)^{-r} dx by adaptive quadrature on [t, N] plus a
// certified remainder from the growth bound f(y)/f(x) >= (y/x)^c.
struct IntegralResult {
    double value = 0.0;
    double error = 0.0;
};
IntegralResult integral_M_certified(const FeedbackFunction& fb, double r, double t,
                                    double rel_eps = 1e-11, double abs_eps = 0.0);
double integral_M(const FeedbackFunction& fb, double r, double t, double rel_eps = 1e-11);

// Leading-order form n / ((r h(n) - 1) f(n)^r); domain error when r h(n) <= 1.
double asymptotic_S(const FeedbackFunction& fb, double r, int64_t n);

// Memoized S_r values for one (f, r); concurrent reads return identical
// values because every entry is a deterministic function of (f, r, n).
class SumTable {
public:
    SumTable(FeedbackFunction fb, double r, double tail_truncation_epsilon = 1e-12)
        : fb_(std::move(fb)), r_(r), eps_(tail_truncation_epsilon) {}

    double tail(int64_t n) const;               // S_r(n)
    double range(int64_t n, int64_t m) const;   // S_r(n, m), finite
    double r() const { return r_; }
    double tail_truncation_epsilon() const { return eps_; }
    const FeedbackFunction& feedback() const { return fb_; }

private:
    FeedbackFunction fb_;
    double r_;
    double eps_;
    mutable std::mutex mu_;
    mutable std::map<int64_t, double> cache_;
};

// ceil(alpha * n) with exact integer handling of alpha*n landing on integers.
int64_t ceil_fraction(double alpha, int64_t n);

}  // namespace bbf
