#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <vector>

#include "bbf/feedback.hpp"
#include "bbf/rng.hpp"

namespace bbf {

struct UrnState {
    std::vector<int64_t> counts;  // balls per bin, every entry >= 1

    UrnState() = default;
    UrnState(std::initializer_list<int64_t> c) : counts(c) { validate(); }
    explicit UrnState(std::vector<int64_t> c) : counts(std::move(c)) { validate(); }

    // the [n, alpha] state: bin 1 holds ceil(alpha*n), bin 2 the rest
    static UrnState from_fraction(int64_t n, double alpha);

    int64_t total() const;
    int bins() const { return static_cast<int>(counts.size()); }
    void validate() const;

    bool operator==(const UrnState& o) const { return counts == o.counts; }
    bool operator<(const UrnState& o) const { return counts < o.counts; }
};

// Pr[next ball joins bin i] = f(counts[i]) / sum_j f(counts[j]).
double step_probability(const FeedbackFunction& fb, const UrnState& state, int bin);

// Runs m transitions; returns m+1 states. Deterministic given the stream.
std::vector<UrnState> simulate_steps(const FeedbackFunction& fb, const UrnState& start,
                                     int64_t m, const CounterStream& stream);

// Exact distribution over states after m steps, merged by state (dynamic
// programming, long double accumulation). Feasibility: B^m <= 4096.
struct PathDistribution {
    int horizon = 0;
    std::map<UrnState, long double> entries;

    long double probability(const UrnState& s) const;
    long double total_mass() const;
};
PathDistribution enumerate_paths(const FeedbackFunction& fb, const UrnState& start, int m);

// CSV with columns step,bin_1,...,bin_B
void write_trajectory_csv(std::ostream& os, const std::vector<UrnState>& trajectory);

}  // namespace bbf
