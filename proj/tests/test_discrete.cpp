#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>
#include <sstream>

#include "bbf/discrete.hpp"

using namespace bbf;

TEST_CASE("step probabilities") {
    auto pw = FeedbackFunction::power(2.0);
    CHECK(step_probability(pw, UrnState{3, 1}, 0) == doctest::Approx(0.9).epsilon(1e-14));
    CHECK(step_probability(pw, UrnState{3, 1}, 1) == doctest::Approx(0.1).epsilon(1e-14));
    CHECK(step_probability(pw, UrnState{7, 7}, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(step_probability(pw, UrnState{2, 2, 2}, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK_THROWS_AS(step_probability(pw, UrnState{1, 1}, 2), std::domain_error);

    // normalization across bins for assorted states
    auto ptl = FeedbackFunction::power_times_log(1.5);
    for (UrnState s : {UrnState{1, 5}, UrnState{12, 3, 9}, UrnState{100, 1}}) {
        double total = 0.0;
        for (int i = 0; i < s.bins(); ++i) total += step_probability(ptl, s, i);
        CHECK(total == doctest::Approx(1.0).epsilon(1e-13));
    }
}

TEST_CASE("urn state invariants") {
    CHECK_THROWS_AS((UrnState{0, 1}), std::domain_error);
    CHECK(UrnState::from_fraction(2000, 0.45) == UrnState{900, 1100});
    CHECK(UrnState::from_fraction(10, 0.3) == UrnState{3, 7});
    CHECK(UrnState{4, 5}.total() == 9);
}

TEST_CASE("exact enumeration: small horizons") {
    auto pw = FeedbackFunction::power(2.0);

    auto d1 = enumerate_paths(pw, UrnState{1, 1}, 1);
    CHECK(static_cast<double>(d1.probability(UrnState{2, 1})) == doctest::Approx(0.5));
    CHECK(static_cast<double>(d1.probability(UrnState{1, 2})) == doctest::Approx(0.5));

    auto d2 = enumerate_paths(pw, UrnState{1, 1}, 2);
    CHECK(static_cast<double>(d2.probability(UrnState{3, 1})) == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(static_cast<double>(d2.probability(UrnState{2, 2})) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(static_cast<double>(d2.probability(UrnState{1, 3})) == doctest::Approx(0.4).epsilon(1e-15));

    auto d21 = enumerate_paths(pw, UrnState{2, 1}, 1);
    CHECK(static_cast<double>(d21.probability(UrnState{3, 1})) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(static_cast<double>(d21.probability(UrnState{2, 2})) == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("enumeration mass, support, and feasibility guard") {
    auto fb = FeedbackFunction::power_times_log(2.0);
    auto dist = enumerate_paths(fb, UrnState{2, 1}, 9);
    CHECK(std::fabs(static_cast<double>(dist.total_mass()) - 1.0) < 1e-14);
    for (const auto& [state, prob] : dist.entries) {
        CHECK(state.total() == 3 + 9);
        CHECK(prob >= 0.0L);
    }
    CHECK_THROWS_AS(enumerate_paths(fb, UrnState{1, 1}, 13), std::domain_error);
    CHECK_THROWS_AS(enumerate_paths(fb, UrnState{1, 1, 1}, 8), std::domain_error);
    CHECK_NOTHROW(enumerate_paths(fb, UrnState{1, 1, 1}, 7));
}

TEST_CASE("permutation equivariance of the enumerated law") {
    auto fb = FeedbackFunction::power(1.5);
    auto d_a = enumerate_paths(fb, UrnState{1, 2, 4}, 5);
    auto d_b = enumerate_paths(fb, UrnState{4, 1, 2}, 5);
    for (const auto& [state, prob] : d_a.entries) {
        UrnState perm{state.counts[2], state.counts[0], state.counts[1]};
        CHECK(static_cast<double>(d_b.probability(perm)) ==
              doctest::Approx(static_cast<double>(prob)).epsilon(1e-14));
    }
}

TEST_CASE("simulation basics") {
    auto pw = FeedbackFunction::power(2.0);
    auto stream = replicate_stream(42, 0, kTagDiscrete);

    auto t0 = simulate_steps(pw, UrnState{1, 1}, 0, stream);
    CHECK(t0.size() == 1);
    CHECK(t0[0] == UrnState{1, 1});

    auto a = simulate_steps(pw, UrnState{1, 1}, 20000, stream);
    auto b = simulate_steps(pw, UrnState{1, 1}, 20000, stream);
    CHECK(a.back() == b.back());  // same stream, same trajectory
    CHECK(a.back().total() == 2 + 20000);

    auto other = simulate_steps(pw, UrnState{1, 1}, 20000, replicate_stream(43, 0, kTagDiscrete));
    CHECK(a.back().total() == other.back().total());
}

TEST_CASE("first-ball symmetry from (1,1)") {
    auto pw = FeedbackFunction::power(2.0);
    int64_t to_bin1 = 0;
    const int64_t runs = 1000000;
    for (int64_t rep = 0; rep < runs; ++rep) {
        auto traj = simulate_steps(pw, UrnState{1, 1}, 1, replicate_stream(7, rep, kTagDiscrete));
        if (traj[1].counts[0] == 2) ++to_bin1;
    }
    double freq = static_cast<double>(to_bin1) / runs;
    CHECK(std::fabs(freq - 0.5) < 0.002);  // 4 standard errors
}

TEST_CASE("empirical law matches enumeration at m = 5") {
    auto pw = FeedbackFunction::power(2.0);
    const int m = 5;
    const int64_t runs = 400000;
    auto exact = enumerate_paths(pw, UrnState{1, 1}, m);
    std::map<UrnState, int64_t> counts;
    for (int64_t rep = 0; rep < runs; ++rep) {
        auto traj = simulate_steps(pw, UrnState{1, 1}, m, replicate_stream(11, rep, kTagDiscrete));
        counts[traj.back()] += 1;
    }
    for (const auto& [state, prob] : exact.entries) {
        double p = static_cast<double>(prob);
        double se = std::sqrt(p * (1.0 - p) / runs);
        double freq = static_cast<double>(counts[state]) / runs;
        CHECK(std::fabs(freq - p) < 4.0 * se + 1e-12);
    }
}

TEST_CASE("trajectory CSV format") {
    auto pw = FeedbackFunction::power(2.0);
    auto traj = simulate_steps(pw, UrnState{1, 1, 1}, 2, replicate_stream(5, 0, kTagDiscrete));
    std::ostringstream os;
    write_trajectory_csv(os, traj);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "step,bin_1,bin_2,bin_3");
    std::getline(is, line);
    CHECK(line == "0,1,1,1");
    int rows = 1;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 3);
}
