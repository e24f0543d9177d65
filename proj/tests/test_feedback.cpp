#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <thread>
#include <vector>

#include "bbf/feedback.hpp"

using namespace bbf;

namespace {

// Independent tail-sum oracle for the power family: direct summation plus the
// closed-form integral remainder bracket J^{1-rp}/(rp-1) <= tail <= that + J^{-rp}.
double power_tail_oracle(double p, double r, int64_t n, int64_t terms = 1000000) {
    long double acc = 0.0L;
    int64_t J = n + terms;
    for (int64_t j = n; j < J; ++j) acc += powl(static_cast<long double>(j), -r * p);
    long double rp = r * p;
    long double integral = powl(static_cast<long double>(J), 1.0L - rp) / (rp - 1.0L);
    long double half_term = 0.5L * powl(static_cast<long double>(J), -rp);
    return static_cast<double>(acc + integral + half_term);
}

}  // namespace

TEST_CASE("built-in families evaluate their closed forms") {
    auto pw = FeedbackFunction::power(2.0);
    CHECK(evaluate_f(pw, 3.0) == doctest::Approx(9.0).epsilon(1e-15));
    CHECK(evaluate_f(pw, 1.0) == doctest::Approx(1.0));

    auto ptl = FeedbackFunction::power_times_log(2.0);
    CHECK(evaluate_f(ptl, 1.0) == doctest::Approx(1.0));  // normalization f(1) = 1

    auto ple = FeedbackFunction::power_log_exponent(2.0, 1.0);
    CHECK(evaluate_f(ple, std::numbers::e) ==
          doctest::Approx(std::exp(2.0)).epsilon(1e-12));
    CHECK(evaluate_f(ple, 1.0) == doctest::Approx(1.0));

    CHECK_THROWS_AS(evaluate_f(pw, 0.5), std::domain_error);
}

TEST_CASE("log-domain evaluation holds past the double overflow point") {
    auto pw = FeedbackFunction::power(3.0);
    double x = 1e120;  // f(x) = 1e360 overflows
    CHECK(std::isinf(pw.value(x)));
    CHECK(pw.log_value(x) == doctest::Approx(3.0 * std::log(x)));
}

TEST_CASE("characteristic exponents") {
    auto pw = FeedbackFunction::power(2.0);
    CHECK(characteristic_exponent(pw, 1.0) == doctest::Approx(2.0));
    CHECK(characteristic_exponent(pw, 77.3) == doctest::Approx(2.0));

    auto ptl = FeedbackFunction::power_times_log(2.0);
    CHECK(characteristic_exponent(ptl, 1.0) ==
          doctest::Approx(2.0 + 1.0 / std::numbers::e).epsilon(1e-12));

    auto ple = FeedbackFunction::power_log_exponent(2.0, 1.0);
    for (double x : {2.0, 5.0, 40.0})
        CHECK(characteristic_exponent(ple, x) == doctest::Approx(4.0 * std::log(x)).epsilon(1e-12));
}

TEST_CASE("strictly increasing on integer arguments") {
    for (auto fb : {FeedbackFunction::power(1.5), FeedbackFunction::power_times_log(2.0),
                    FeedbackFunction::power_log_exponent(2.0, 1.0)}) {
        double prev = fb.log_value(1.0);
        for (int64_t n = 2; n <= 2000; ++n) {
            double cur = fb.log_value(static_cast<double>(n));
            CHECK(cur > prev);
            prev = cur;
        }
    }
}

TEST_CASE("partial sums: closed cases") {
    auto pw = FeedbackFunction::power(2.0);
    CHECK(partial_sum_S(pw, 1.0, 2, 4) == doctest::Approx(13.0 / 36.0).epsilon(1e-15));
    CHECK(partial_sum_S(pw, 1.0, 5, 5) == 0.0);
}

TEST_CASE("infinite tail sum matches the direct-summation oracle") {
    auto pw = FeedbackFunction::power(2.0);
    double oracle = power_tail_oracle(2.0, 1.0, 10);
    // frozen value: pi^2/6 - sum_{j=1}^{9} j^{-2}
    CHECK(oracle == doctest::Approx(0.10516633568168564).epsilon(1e-11));
    CHECK(tail_sum_S(pw, 1.0, 10) == doctest::Approx(oracle).epsilon(1e-11));

    double oracle_r2 = power_tail_oracle(2.0, 2.0, 7);
    CHECK(tail_sum_S(pw, 2.0, 7) == doctest::Approx(oracle_r2).epsilon(1e-11));

    auto p3 = FeedbackFunction::power(3.0);
    CHECK(tail_sum_S(p3, 1.0, 25) == doctest::Approx(power_tail_oracle(3.0, 1.0, 25)).epsilon(1e-11));
}

TEST_CASE("tail sum diverges for p = 1") {
    auto pw = FeedbackFunction::power(1.0);
    CHECK_THROWS_AS(tail_sum_S(pw, 1.0, 1), NumericalError);
}

TEST_CASE("integral M: closed forms and the Lemma bound against S") {
    auto pw = FeedbackFunction::power(2.0);
    CHECK(integral_M(pw, 1.0, 10.0) == doctest::Approx(0.1).epsilon(1e-9));
    CHECK(integral_M(pw, 2.0, 10.0) == doctest::Approx(1.0 / 3000.0).epsilon(1e-9));

    auto ptl = FeedbackFunction::power_times_log(2.0);
    // direct-summation oracle for S_1(100): 10^6 terms, remainder below 1e-7
    long double s_direct = 0.0L;
    for (int64_t j = 100; j < 1100000; ++j)
        s_direct += expl(-static_cast<long double>(ptl.log_value(static_cast<double>(j))));
    double m = integral_M(ptl, 1.0, 100.0);
    double bound = std::exp(-ptl.log_value(100.0));
    CHECK(std::fabs(m - static_cast<double>(s_direct)) <= bound);

    for (int64_t n : {10, 50, 200, 1000}) {
        double mm = integral_M(pw, 1.0, static_cast<double>(n));
        double ss = tail_sum_S(pw, 1.0, n);
        CHECK(std::fabs(mm - ss) <= std::exp(-pw.log_value(static_cast<double>(n))));
    }
}

TEST_CASE("asymptotic form of S_r") {
    auto pw = FeedbackFunction::power(2.0);
    CHECK(asymptotic_S(pw, 1.0, 100) == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(asymptotic_S(FeedbackFunction::power(3.0), 1.0, 10) == doctest::Approx(0.005).epsilon(1e-12));
    double n4 = 50.0 * 50.0 * 50.0 * 50.0;
    CHECK(asymptotic_S(pw, 2.0, 50) == doctest::Approx(50.0 / (3.0 * n4)).epsilon(1e-12));
    CHECK_THROWS_AS(asymptotic_S(FeedbackFunction::power(1.0), 1.0, 10), std::domain_error);
}

TEST_CASE("S_r / asymptotic ratio approaches 1 through n = 1e4") {
    for (double r : {1.0, 2.0}) {
        for (auto fb : {FeedbackFunction::power(2.0), FeedbackFunction::power_times_log(2.0),
                        FeedbackFunction::power_log_exponent(2.0, 1.0)}) {
            double prev_gap = 1e9;
            for (int64_t n : {100, 1000, 10000}) {
                double ratio = tail_sum_S(fb, r, n) / asymptotic_S(fb, r, n);
                double gap = std::fabs(ratio - 1.0);
                CHECK(gap < prev_gap + 1e-6);  // monotone trend toward 1
                prev_gap = gap;
            }
        }
    }
    // within 5% at n = 1e4 for the canonical case
    double ratio = tail_sum_S(FeedbackFunction::power(2.0), 1.0, 10000) /
                   asymptotic_S(FeedbackFunction::power(2.0), 1.0, 10000);
    CHECK(std::fabs(ratio - 1.0) < 0.05);
}

TEST_CASE("additivity of partial sums") {
    auto fb = FeedbackFunction::power_times_log(1.5);
    int64_t triples[][3] = {{1, 7, 19}, {3, 100, 450}, {10, 11, 12}, {2, 2, 900}};
    for (auto& tr : triples) {
        double lhs = partial_sum_S(fb, 1.0, tr[0], tr[1]) + partial_sum_S(fb, 1.0, tr[1], tr[2]);
        double rhs = partial_sum_S(fb, 1.0, tr[0], tr[2]);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("ratio decay M_1(ceil(rho n)) / M_1(n) stays below 1") {
    for (auto fb : {FeedbackFunction::power(2.0), FeedbackFunction::power_times_log(2.0)}) {
        for (double rho : {1.5, 2.0}) {
            for (int64_t n : {50, 200, 1000, 5000}) {
                double num = integral_M(fb, 1.0, std::ceil(rho * static_cast<double>(n)));
                double den = integral_M(fb, 1.0, static_cast<double>(n));
                CHECK(num / den < 0.95);
            }
        }
    }
}

TEST_CASE("S_1(n) outgrows exp(-n^(1/4)) on built-ins") {
    for (auto fb : {FeedbackFunction::power(3.0), FeedbackFunction::power_times_log(2.0)}) {
        double prev = 0.0;
        for (int64_t n : {10000, 100000, 1000000}) {
            double ratio = tail_sum_S(fb, 1.0, n) * std::exp(std::pow(static_cast<double>(n), 0.25));
            CHECK(ratio > prev);
            prev = ratio;
        }
        CHECK(prev > 1.0);  // dominance visible by n = 1e6
    }
}

TEST_CASE("validity checker accepts the listed families and rejects the counterexamples") {
    for (double p : {1.1, 1.5, 2.0, 3.0}) {
        auto rep = check_validity(FeedbackFunction::power(p), 100000);
        CHECK(rep.passed);
        CHECK(rep.empirical_slow_variation_c < 0.5);  // h constant
    }
    CHECK(check_validity(FeedbackFunction::power_times_log(2.0)).passed);
    CHECK(check_validity(FeedbackFunction::power_log_exponent(2.0, 1.0)).passed);

    auto rep1 = check_validity(FeedbackFunction::power(1.0));
    CHECK_FALSE(rep1.passed);
    CHECK_FALSE(rep1.exponent_liminf_above_one);

    // exponential growth: h(x) = x ln 2 violates the subpolynomial condition
    auto exp2 = FeedbackFunction::custom(
        "exp2", [](double x) { return std::exp2(x - 1.0); },
        [](double x) { return x * std::numbers::ln2; });
    auto rep2 = check_validity(exp2, 100000);
    CHECK_FALSE(rep2.passed);
    CHECK_FALSE(rep2.exponent_subpolynomial);
    CHECK(rep2.monopoly_sum_finite);  // sum of 2^{-j} still converges
}

TEST_CASE("custom feedback with finite-difference exponent is flagged") {
    auto fb = FeedbackFunction::custom_fd("square", [](double x) { return x * x; });
    CHECK(fb.exponent(10.0) == doctest::Approx(2.0).epsilon(1e-6));
    auto rep = check_validity(fb, 10000);
    bool flagged = false;
    for (auto& w : rep.warnings)
        if (w.find("finite differences") != std::string::npos) flagged = true;
    CHECK(flagged);
}

TEST_CASE("sum table caches deterministically under concurrent reads") {
    SumTable table(FeedbackFunction::power(2.0), 1.0);
    std::vector<double> results(8, 0.0);
    std::vector<std::thread> pool;
    for (int w = 0; w < 8; ++w)
        pool.emplace_back([&, w]() { results[w] = table.tail(64); });
    for (auto& th : pool) th.join();
    for (int w = 1; w < 8; ++w) CHECK(results[w] == results[0]);
    CHECK(results[0] == doctest::Approx(power_tail_oracle(2.0, 1.0, 64)).epsilon(1e-11));
    // strictly decreasing in n
    CHECK(table.tail(65) < table.tail(64));
    CHECK(table.range(10, 10) == 0.0);
}

TEST_CASE("ceil_fraction handles exact rational points") {
    CHECK(ceil_fraction(0.45, 2000) == 900);
    CHECK(ceil_fraction(0.25, 64) == 16);
    CHECK(ceil_fraction(0.4, 10) == 4);
    CHECK(ceil_fraction(0.3, 10) == 3);
    CHECK(ceil_fraction(0.31, 10) == 4);
    CHECK(ceil_fraction(1.0 / 3.0, 9) == 3);
    CHECK(ceil_fraction(1.0 / 3.0, 10) == 4);
}
