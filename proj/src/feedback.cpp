#include "bbf/feedback.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bbf/quadrature.hpp"

namespace bbf {

namespace {

constexpr double kE = std::numbers::e;

void require_domain(bool ok, const char* msg) {
    if (!ok) throw std::domain_error(msg);
}

}  // namespace

FeedbackFunction FeedbackFunction::power(double p) {
    require_domain(p > 0.0, "power feedback needs p > 0");
    FeedbackFunction fb;
    fb.kind_ = FeedbackKind::power;
    fb.p_ = p;
    fb.name_ = "power";
    return fb;
}

FeedbackFunction FeedbackFunction::power_log_exponent(double p, double a) {
    require_domain(p > 0.0 && a >= 0.0, "power_log_exponent needs p > 0, a >= 0");
    FeedbackFunction fb;
    fb.kind_ = FeedbackKind::power_log_exponent;
    fb.p_ = p;
    fb.a_ = a;
    fb.name_ = "power-log";
    return fb;
}

FeedbackFunction FeedbackFunction::power_times_log(double p) {
    require_domain(p > 0.0, "power_times_log needs p > 0");
    FeedbackFunction fb;
    fb.kind_ = FeedbackKind::power_times_log;
    fb.p_ = p;
    fb.name_ = "power-times-log";
    return fb;
}

FeedbackFunction FeedbackFunction::custom(std::string name, std::function<double(double)> f,
                                          std::function<double(double)> h) {
    FeedbackFunction fb;
    fb.kind_ = FeedbackKind::custom;
    fb.name_ = std::move(name);
    fb.custom_f_ = std::move(f);
    fb.custom_h_ = std::move(h);
    return fb;
}

FeedbackFunction FeedbackFunction::custom_fd(std::string name, std::function<double(double)> f) {
    FeedbackFunction fb;
    fb.kind_ = FeedbackKind::custom;
    fb.name_ = std::move(name);
    fb.custom_f_ = std::move(f);
    fb.fd_exponent_ = true;
    return fb;
}

double FeedbackFunction::value(double x) const {
    require_domain(x >= 1.0, "feedback function defined on [1, inf)");
    switch (kind_) {
        case FeedbackKind::power:
            return std::pow(x, p_);
        case FeedbackKind::power_log_exponent:
            return std::pow(x, p_ * std::pow(std::log(x), a_));
        case FeedbackKind::power_times_log:
            return std::pow(x, p_) * std::log(x + kE - 1.0);
        case FeedbackKind::custom:
            return custom_f_(x);
    }
    return 0.0;
}

double FeedbackFunction::log_value(double x) const {
    require_domain(x >= 1.0, "feedback function defined on [1, inf)");
    switch (kind_) {
        case FeedbackKind::power:
            return p_ * std::log(x);
        case FeedbackKind::power_log_exponent:
            return p_ * std::pow(std::log(x), 1.0 + a_);
        case FeedbackKind::power_times_log:
            return p_ * std::log(x) + std::log(std::log(x + kE - 1.0));
        case FeedbackKind::custom:
            return std::log(custom_f_(x));
    }
    return 0.0;
}

double FeedbackFunction::exponent(double x) const {
    require_domain(x >= 1.0, "characteristic exponent defined on [1, inf)");
    switch (kind_) {
        case FeedbackKind::power:
            return p_;
        case FeedbackKind::power_log_exponent:
            return p_ * (1.0 + a_) * std::pow(std::log(x), a_);
        case FeedbackKind::power_times_log: {
            double shifted = x + kE - 1.0;
            return p_ + x / (shifted * std::log(shifted));
        }
        case FeedbackKind::custom: {
            if (custom_h_) return custom_h_(x);
            // central difference of ln f with step x*1e-6 (flagged in reports)
            double dx = x * 1e-6;
            double lo = std::max(1.0, x - dx);
            double hi = x + dx;
            return x * (std::log(custom_f_(hi)) - std::log(custom_f_(lo))) / (hi - lo);
        }
    }
    return 0.0;
}

double FeedbackFunction::tail_exponent_lower(double x) const {
    switch (kind_) {
        case FeedbackKind::power:
            return p_;
        case FeedbackKind::power_log_exponent:
            return exponent(x);  // increasing in x for a >= 0
        case FeedbackKind::power_times_log:
            return p_;  // h(x) > p everywhere, h -> p
        case FeedbackKind::custom: {
            // heuristic: grid minimum over four decades
            double m = std::numeric_limits<double>::infinity();
            for (double t = x; t <= x * 1e4; t *= 1.3) m = std::min(m, exponent(t));
            return m * (1.0 - 1e-9);
        }
    }
    return 0.0;
}

double FeedbackFunction::tail_exponent_upper(double x) const {
    switch (kind_) {
        case FeedbackKind::power:
            return p_;
        case FeedbackKind::power_log_exponent:
            return std::numeric_limits<double>::infinity();  // h increases without bound
        case FeedbackKind::power_times_log:
            // h = p + t/((t+e-1) ln(t+e-1)) <= p + 1/ln(x+e-1) for all t >= x
            return p_ + 1.0 / std::log(x + kE - 1.0);
        case FeedbackKind::custom:
            return std::numeric_limits<double>::infinity();
    }
    return std::numeric_limits<double>::infinity();
}

double FeedbackFunction::convex_tail_from() const {
    switch (kind_) {
        case FeedbackKind::power:
        case FeedbackKind::power_times_log:
            return 1.0;
        case FeedbackKind::power_log_exponent:
            return std::max(2.0, std::exp(a_));
        case FeedbackKind::custom:
            return 1e18;  // unknown; fall back to the coarse bracket
    }
    return 1e18;
}

double evaluate_f(const FeedbackFunction& fb, double n) {
    require_domain(n >= 1.0, "evaluate_f requires n >= 1");
    return fb.value(n);
}

double characteristic_exponent(const FeedbackFunction& fb, double x) {
    require_domain(x >= 1.0, "characteristic_exponent requires x >= 1");
    return fb.exponent(x);
}

int64_t ceil_fraction(double alpha, int64_t n) {
    double v = alpha * static_cast<double>(n);
    double nearest = std::nearbyint(v);
    if (std::fabs(v - nearest) <= 1e-9 * std::max(1.0, std::fabs(v))) return static_cast<int64_t>(nearest);
    return static_cast<int64_t>(std::ceil(v));
}

double partial_sum_S(const FeedbackFunction& fb, double r, int64_t n, int64_t m) {
    require_domain(r >= 0.0, "partial_sum_S requires r >= 0");
    require_domain(n >= 1, "partial_sum_S requires n >= 1");
    if (m <= n) return 0.0;
    double sum = 0.0, comp = 0.0;
    for (int64_t j = n; j < m; ++j) {
        double term = std::exp(-r * fb.log_value(static_cast<double>(j)));
        double y = term - comp;
        double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    return sum;
}

IntegralResult integral_M_certified(const FeedbackFunction& fb, double r, double t, double rel_eps,
                                    double abs_eps) {
    require_domain(t >= 1.0, "integral_M requires lower limit >= 1");
    auto g = [&](double x) { return std::exp(-r * fb.log_value(x)); };
    const double quad_rel = std::max(0.1 * rel_eps, 5e-14);

    IntegralResult out;
    double upper = std::max(2.0 * t, t + 8.0);
    double lo = t;
    for (int round = 0; round < 400; ++round) {
        QuadResult q = integrate_adaptive(g, lo, upper, quad_rel, 0.125 * abs_eps);
        out.value += q.value;
        out.error += q.error;
        // remainder over [upper, inf) bracketed through the growth bounds
        //   (y/x)^{c_lo} <= f(y)/f(x) <= (y/x)^{c_hi}
        double c_lo = fb.tail_exponent_lower(upper);
        double c_hi = fb.tail_exponent_upper(upper);
        double gu = g(upper);
        double rem_hi = (r * c_lo > 1.0) ? gu * upper / (r * c_lo - 1.0)
                                         : std::numeric_limits<double>::infinity();
        double rem_lo = std::isinf(c_hi) ? 0.0 : gu * upper / (r * c_hi - 1.0);
        double half = 0.5 * (rem_hi - rem_lo);
        if (std::isfinite(rem_hi) &&
            (half <= std::max(0.5 * abs_eps, rel_eps * (out.value + rem_lo + half)) ||
             half < 1e-300)) {
            out.value += rem_lo + half;
            out.error += half;
            return out;
        }
        if (upper > 1e200)
            throw NumericalError("integral_M: no certificate of convergence (r * h too small)",
                                 out.value);
        lo = upper;
        upper *= 2.0;
    }
    throw NumericalError("integral_M: tolerance unreachable", out.value);
}

double integral_M(const FeedbackFunction& fb, double r, double t, double rel_eps) {
    return integral_M_certified(fb, r, t, rel_eps).value;
}

double tail_sum_S(const FeedbackFunction& fb, double r, int64_t n, double rel_eps) {
    require_domain(n >= 1, "tail_sum_S requires n >= 1");
    double c = fb.tail_exponent_lower(static_cast<double>(n));
    if (r * std::max(c, fb.tail_exponent_lower(1e6)) <= 1.0) {
        throw NumericalError("tail_sum_S: sum diverges (r * h <= 1 on the tail)");
    }
    auto g = [&](double x) { return std::exp(-r * fb.log_value(x)); };

    double sum = 0.0, comp = 0.0;
    int64_t j = n;
    int64_t checkpoint = std::max<int64_t>(2 * n, n + 16);
    const double convex_from = fb.convex_tail_from();
    for (int round = 0; round < 64; ++round) {
        for (; j < checkpoint; ++j) {
            double term = g(static_cast<double>(j));
            double y = term - comp;
            double t2 = sum + y;
            comp = (t2 - sum) - y;
            sum = t2;
        }
        // bracket the unsummed tail sum_{k>=J}
        double J = static_cast<double>(j);
        double gj = g(J);
        // analytic scale of the remainder fixes the absolute error budget
        double c_lo = fb.tail_exponent_lower(J);
        if (r * c_lo <= 1.0) {
            checkpoint *= 2;
            continue;
        }
        double rough_total = sum + gj * J / (r * c_lo - 1.0);
        double abs_budget = 0.2 * rel_eps * rough_total;

        double mid, half;
        IntegralResult m;
        try {
            m = integral_M_certified(fb, r, J, 0.25 * rel_eps, abs_budget);
        } catch (const NumericalError&) {
            checkpoint *= 2;
            continue;
        }
        if (J >= convex_from) {
            // convex integrand: M(J) + g(J)/2 <= tail <= M(J - 1/2)
            QuadResult strip = integrate_adaptive(g, J - 0.5, J, 1e-13, 0.2 * abs_budget);
            double width = std::max(0.0, strip.value - 0.5 * gj) + strip.error;
            mid = m.value + 0.5 * gj + 0.5 * width;
            half = 0.5 * width + m.error;
        } else {
            // monotone-only bracket: M(J) <= tail <= M(J) + g(J)
            mid = m.value + 0.5 * gj;
            half = 0.5 * gj + m.error;
        }
        double total = sum + mid;
        if (half <= rel_eps * total || half < 1e-300) return total;
        checkpoint *= 2;
    }
    throw NumericalError("tail_sum_S: tolerance unreachable", sum);
}

double asymptotic_S(const FeedbackFunction& fb, double r, int64_t n) {
    require_domain(n >= 1, "asymptotic_S requires n >= 1");
    double h = fb.exponent(static_cast<double>(n));
    if (r * h <= 1.0) throw std::domain_error("asymptotic_S requires r * h(n) > 1");
    return std::exp(std::log(static_cast<double>(n)) - std::log(r * h - 1.0) -
                    r * fb.log_value(static_cast<double>(n)));
}

double SumTable::tail(int64_t n) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(n);
    if (it != cache_.end()) return it->second;
    double v = tail_sum_S(fb_, r_, n, eps_);
    cache_.emplace(n, v);
    return v;
}

double SumTable::range(int64_t n, int64_t m) const {
    return partial_sum_S(fb_, r_, n, m);
}

ValidityReport check_validity(const FeedbackFunction& fb, int64_t grid_max, double tolerance_c) {
    require_domain(grid_max >= 100, "check_validity requires grid_max >= 100");
    ValidityReport rep;
    rep.warnings.push_back("grid-sampled heuristic check; conditions are asymptotic and not provable from finite evaluation");
    if (fb.exponent_from_finite_difference()) {
        rep.warnings.push_back("characteristic exponent estimated by finite differences (step x*1e-6)");
    }
    if (fb.kind() == FeedbackKind::custom) {
        rep.warnings.push_back("custom feedback: tail exponent bound is a grid heuristic, not certified");
    }

    std::vector<double> grid;
    for (double x = 8.0; x < static_cast<double>(grid_max); x *= 1.25) grid.push_back(x);
    grid.push_back(static_cast<double>(grid_max));
    const double tail_start = std::sqrt(static_cast<double>(grid_max));

    // condition 1: liminf h > 1, sampled as min over the tail grid
    double min_tail_h = std::numeric_limits<double>::infinity();
    for (double x : grid)
        if (x >= tail_start) min_tail_h = std::min(min_tail_h, fb.exponent(x));
    rep.min_tail_exponent = min_tail_h;
    rep.exponent_liminf_above_one = min_tail_h > 1.0;

    // condition 2: x^{-1/4} h(x) nonincreasing toward 0 along the tail grid
    rep.exponent_subpolynomial = true;
    double prev = std::numeric_limits<double>::infinity();
    double first = -1.0, last = -1.0;
    for (double x : grid) {
        if (x < tail_start) continue;
        double s = std::pow(x, -0.25) * fb.exponent(x);
        if (first < 0.0) first = s;
        last = s;
        if (s > prev * (1.0 + 1e-9)) rep.exponent_subpolynomial = false;
        prev = s;
    }
    if (!(last < first)) rep.exponent_subpolynomial = false;

    // condition 3: empirical C in sup_{x<=t<=x^{1+eps}} |h(t)/h(x) - 1| <= C eps
    double c_emp = 0.0;
    const double eps_list[3] = {0.1, 0.25, 0.5};
    for (size_t gi = 0; gi < grid.size(); gi += std::max<size_t>(1, grid.size() / 8)) {
        double x = grid[gi];
        if (x < tail_start) continue;
        double hx = fb.exponent(x);
        if (hx == 0.0) continue;
        for (double eps : eps_list) {
            double hi = std::pow(x, 1.0 + eps);
            for (int k = 0; k <= 16; ++k) {
                double t = x * std::pow(hi / x, k / 16.0);
                double dev = std::fabs(fb.exponent(t) / hx - 1.0) / eps;
                c_emp = std::max(c_emp, dev);
            }
        }
    }
    rep.empirical_slow_variation_c = c_emp;
    rep.exponent_slowly_varying = std::isfinite(c_emp) && c_emp <= tolerance_c;

    // monopoly condition S_1(1) < inf
    try {
        rep.s1_from_one = tail_sum_S(fb, 1.0, 1, 1e-10);
        rep.monopoly_sum_finite = std::isfinite(rep.s1_from_one);
    } catch (const NumericalError&) {
        rep.monopoly_sum_finite = false;
    }

    rep.passed = rep.exponent_liminf_above_one && rep.exponent_subpolynomial &&
                 rep.exponent_slowly_varying && rep.monopoly_sum_finite;
    return rep;
}

}  // namespace bbf
