#include "bbf/analytics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

#include "bbf/quadrature.hpp"
#include "bbf/rng.hpp"

namespace bbf {

namespace {

constexpr double kPi = std::numbers::pi;

void require_state(int64_t x, int64_t y, const char* who) {
    if (!(1 <= y && y <= x)) throw std::domain_error(std::string(who) + ": need 1 <= y <= x");
}

// Evaluates Re/Im of psi with the quadratic product carried to n (or, for the
// infinite product, explicitly while t^2/f^2 >= 1e-10 and then closed with the
// remainder t^2 S_2(J), J rounded up to a power of two to keep the S_2 cache
// small).
struct PsiEvaluator {
    const FeedbackFunction& fb;
    RateCache& rates;
    SumTable* s2;        // non-null => infinite product
    int64_t x, y, n;     // n ignored for the infinite product
    mutable int64_t max_index = 0;

    std::complex<double> operator()(double t) const {
        double logmod = 0.0;
        double phase = 0.0;
        rates.ensure(x + 1);
        for (int64_t l = y; l < x; ++l) {
            double u = t * rates.inv_rate(l);
            logmod -= 0.5 * std::log1p(u * u);
            phase -= std::atan(u);
        }
        if (s2 != nullptr) {
            int64_t j = x;
            rates.ensure(j + 2);
            while (true) {
                double u = t * rates.inv_rate(j);
                double u2 = u * u;
                if (u2 < 1e-10) break;
                logmod -= std::log1p(u2);
                ++j;
                rates.ensure(j + 1);
            }
            int64_t j_cut = static_cast<int64_t>(std::bit_ceil(static_cast<uint64_t>(j)));
            rates.ensure(j_cut + 1);
            for (; j < j_cut; ++j) {
                double u = t * rates.inv_rate(j);
                logmod -= std::log1p(u * u);
            }
            logmod -= t * t * s2->tail(j_cut);
            max_index = std::max(max_index, j_cut);
        } else {
            rates.ensure(n + 1);
            for (int64_t j = x; j < n; ++j) {
                double u = t * rates.inv_rate(j);
                logmod -= std::log1p(u * u);
            }
            max_index = std::max(max_index, n);
        }
        double mod = std::exp(logmod);
        return {mod * std::cos(phase), mod * std::sin(phase)};
    }

    // |integral_T^inf psi| bounded through the fastest-decaying factors
    double tail_integral_bound(double T) const {
        double coef_log = 0.0;
        int decay = 0;
        for (int64_t l = y; l < x && decay < 8; ++l) {
            coef_log += fb.log_value(static_cast<double>(l));
            decay += 1;
        }
        int64_t quad_hi = s2 ? x + 4 : std::min(n, x + 4);
        for (int64_t j = x; j < quad_hi && decay < 8; ++j) {
            coef_log += 2.0 * fb.log_value(static_cast<double>(j));
            decay += 2;
        }
        if (decay < 2) throw NumericalError("characteristic function decays too slowly to integrate");
        return std::exp(coef_log + (1.0 - decay) * std::log(T)) / (decay - 1);
    }
};

AsymptoticConstant integrate_constant(const FeedbackFunction& fb, int64_t x, int64_t y,
                                      int64_t n_finite, SumTable* s2, double rel_tol) {
    require_state(x, y, "constant");
    if (rel_tol < 1e-10) throw std::domain_error("constant: rel_tol >= 1e-10");

    RateCache rates(fb);
    PsiEvaluator ev{fb, rates, s2, x, y, n_finite, 0};
    auto re = [&](double t) { return ev(t).real(); };
    auto im = [&](double t) { return ev(t).imag(); };

    const bool symmetric = (x == y);
    double T = std::clamp(2.0 * fb.value(static_cast<double>(x)), 8.0, 1e6);
    double integral = 0.0, integral_im = 0.0, quad_err = 0.0;
    double lo = 0.0;
    AsymptoticConstant out;
    bool done = false;
    for (int round = 0; round < 40 && !done; ++round) {
        QuadResult qp = integrate_adaptive(re, lo, T, 0.05 * rel_tol, 0.0, 8000);
        integral += qp.value;
        quad_err += qp.error;
        if (!symmetric) {
            QuadResult qn = integrate_adaptive(re, -T, -lo, 0.05 * rel_tol, 0.0, 8000);
            QuadResult qpi = integrate_adaptive(im, lo, T, 0.05 * rel_tol, 0.0, 8000);
            QuadResult qni = integrate_adaptive(im, -T, -lo, 0.05 * rel_tol, 0.0, 8000);
            integral += qn.value;
            integral_im += qpi.value + qni.value;
            quad_err += qn.error + qpi.error + qni.error;
        }
        double tail = ev.tail_integral_bound(T);
        double scale = std::fabs(integral) * (symmetric ? 2.0 : 1.0);
        if (2.0 * tail <= 0.25 * rel_tol * scale) {
            out.c = (symmetric ? 2.0 * integral : integral) / kPi;
            out.error_bound = (quad_err * (symmetric ? 2.0 : 1.0) + 2.0 * tail) / kPi +
                              1e-9 * std::fabs(out.c);
            out.imaginary_residual = std::fabs(integral_im) / kPi;
            out.truncation_index = ev.max_index;
            done = true;
        } else {
            lo = T;
            T *= 2.0;
        }
    }
    if (!done) throw NumericalError("constant: tolerance unreachable", integral / kPi);
    if (!(out.c > 0.0) || out.error_bound >= out.c)
        throw NumericalError("constant: could not certify positivity", out.c);
    return out;
}

}  // namespace

std::complex<double> psi(const FeedbackFunction& fb, int64_t x, int64_t y, int64_t n, double t) {
    require_state(x, y, "psi");
    if (n < x) throw std::domain_error("psi: need n >= x");
    std::complex<double> acc(1.0, 0.0);
    for (int64_t l = y; l < x; ++l) {
        double invf = std::exp(-fb.log_value(static_cast<double>(l)));
        acc /= std::complex<double>(1.0, t * invf);
    }
    double logmod = 0.0;
    for (int64_t j = x; j < n; ++j) {
        double u = t * std::exp(-fb.log_value(static_cast<double>(j)));
        logmod -= std::log1p(u * u);
    }
    return acc * std::exp(logmod);
}

AsymptoticConstant limit_constant_c(const FeedbackFunction& fb, int64_t x, int64_t y,
                                    double rel_tol) {
    SumTable s2(fb, 2.0);
    return integrate_constant(fb, x, y, 0, &s2, rel_tol);
}

AsymptoticConstant constant_cn(const FeedbackFunction& fb, int64_t x, int64_t y, int64_t n,
                               double rel_tol) {
    if (n < x + 1) throw std::domain_error("constant_cn: need n >= x + 1");
    return integrate_constant(fb, x, y, n, nullptr, rel_tol);
}

std::vector<double> density_slope_cn(const FeedbackFunction& fb, int64_t x, int64_t y, int64_t n,
                                     const std::vector<double>& eps_list, int64_t samples,
                                     uint64_t seed) {
    require_state(x, y, "density_slope_cn");
    if (n < x) throw std::domain_error("density_slope_cn: need n >= x");
    RateCache rates(fb);
    rates.ensure(n + 1);
    std::vector<int64_t> hits(eps_list.size(), 0);
    for (int64_t rep = 0; rep < samples; ++rep) {
        CounterStream st1 = replicate_stream(seed, static_cast<uint64_t>(rep), kTagClockBin1);
        CounterStream st2 = replicate_stream(seed, static_cast<uint64_t>(rep), kTagClockBin2);
        double delta = 0.0;
        for (int64_t j = x; j < n; ++j)
            delta -= std::log(st1.uniform_open(static_cast<uint64_t>(j))) * rates.inv_rate(j);
        for (int64_t l = y; l < n; ++l)
            delta += std::log(st2.uniform_open(static_cast<uint64_t>(l))) * rates.inv_rate(l);
        for (size_t k = 0; k < eps_list.size(); ++k)
            if (std::fabs(delta) <= eps_list[k]) ++hits[k];
    }
    std::vector<double> ratios(eps_list.size());
    for (size_t k = 0; k < eps_list.size(); ++k)
        ratios[k] = (static_cast<double>(hits[k]) / static_cast<double>(samples)) / eps_list[k];
    return ratios;
}

Analytics::Analytics(FeedbackFunction fb, double rel_tol)
    : fb_(std::move(fb)), rel_tol_(rel_tol), s1_(fb_, 1.0), s2_(fb_, 2.0) {}

const AsymptoticConstant& Analytics::constant(int64_t x, int64_t y) {
    if (x < y) std::swap(x, y);  // bin labels are exchangeable
    std::lock_guard<std::mutex> lock(mu_);
    auto key = std::make_pair(x, y);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    AsymptoticConstant v = integrate_constant(fb_, x, y, 0, &s2_, rel_tol_);
    return cache_.emplace(key, v).first->second;
}

double Analytics::predict_tail_L(int64_t x, int64_t y, int64_t n) {
    return constant(x, y).c * s1_.tail(n);
}

double Analytics::predict_loser_fraction(int64_t x, int64_t y, double alpha, int64_t n) {
    if (!(alpha > 0.0 && alpha < 0.5))
        throw std::domain_error("predict_loser_fraction: alpha in (0, 1/2)");
    int64_t lo = ceil_fraction(alpha, n);
    return constant(x, y).c * s1_.range(lo, n - lo);
}

double Analytics::predict_window(int64_t x, int64_t y, int64_t q, int64_t n,
                                 std::vector<std::string>* warnings) {
    if (q < 0 || q >= n) throw std::domain_error("predict_window: 0 <= q < n");
    int64_t lo = (n - q + 1) / 2;
    int64_t hi = n - lo;
    double s1w = s1_.range(lo, hi);
    if (warnings != nullptr) {
        double s2w = s2_.range(lo, hi);
        double gamma = 0.1;
        if (!(s1w * s1w >= std::pow(static_cast<double>(n), gamma) * s2w)) {
            warnings->push_back(
                "window precheck failed: S_1(window)^2 < n^0.1 * S_2(window); the asymptotic "
                "prediction may be unreliable at this scale");
        }
    }
    return constant(x, y).c * s1w;
}

}  // namespace bbf
