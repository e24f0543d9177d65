#pragma once

#include <cstdint>
#include <vector>

#include "bbf/discrete.hpp"
#include "bbf/feedback.hpp"
#include "bbf/rng.hpp"

namespace bbf {

// Per-worker cache of 1/f(j); grown lazily, read in the hot sampling loops.
struct RateCache {
    explicit RateCache(const FeedbackFunction& fb) : fb_(&fb), inv_(2, 0.0) {
        inv_[1] = std::exp(-fb.log_value(1.0));
    }
    void ensure(int64_t up_to_exclusive) {
        if (up_to_exclusive <= static_cast<int64_t>(inv_.size())) return;
        size_t old = inv_.size();
        inv_.resize(static_cast<size_t>(up_to_exclusive));
        for (size_t j = old; j < inv_.size(); ++j)
            inv_[j] = std::exp(-fb_->log_value(static_cast<double>(j)));
    }
    double inv_rate(int64_t j) const { return inv_[static_cast<size_t>(j)]; }
    const FeedbackFunction& feedback() const { return *fb_; }

private:
    const FeedbackFunction* fb_;
    std::vector<double> inv_;
};

// Exponential clock of one bin: X(i,j) ~ exp(f(j)) for j >= start, sampled up
// to an adjustable horizon. Increments are addressed by (seed, bin stream, j),
// so extending the horizon never changes previously sampled values.
struct BinClock {
    CounterStream stream;
    int64_t start = 1;
    int64_t horizon = 1;        // exclusive: X(*, j) sampled for start <= j < horizon
    std::vector<double> cum;    // cum[k] = sum_{j=start}^{start+k-1} X(*, j)
    double kahan_carry = 0.0;

    void reset(const CounterStream& s, int64_t start_index) {
        stream = s;
        start = start_index;
        horizon = start_index;
        cum.assign(1, 0.0);
        kahan_carry = 0.0;
    }

    // arrival time of the (n - start)-th new ball; 0 when n <= start
    double arrival(int64_t n) const {
        if (n <= start) return 0.0;
        return cum[static_cast<size_t>(n - start)];
    }
    double sampled_total() const { return cum.back(); }

    void extend(RateCache& rates, int64_t new_horizon);
};

BinClock sample_clock(const FeedbackFunction& fb, uint64_t seed, uint64_t replicate, int bin,
                      int64_t start, int64_t up_to);

// Merged arrival order of the two clocks reproduces the discrete chain law.
std::vector<UrnState> embedded_discrete_steps(const FeedbackFunction& fb, const UrnState& start,
                                              int64_t m, uint64_t seed, uint64_t replicate);

// Terminal counts only; reuses the caller's clocks for replicate loops.
std::pair<int64_t, int64_t> embedded_terminal(RateCache& rates, BinClock& c1, BinClock& c2,
                                              int64_t x, int64_t y, int64_t m, uint64_t seed,
                                              uint64_t replicate);

struct RaceOutcome {
    int winner = 0;             // 1 or 2; 0 when undecided at the cap
    int64_t losing_number = -1; // balls gained by the losing bin
    bool censored = false;
    double delta = 0.0;         // tail-certificate failure budget used
    int64_t horizon = 0;        // per-bin sampled horizon at decision time
};

struct EmbeddingContext {
    const FeedbackFunction& fb;
    SumTable& s1;   // r = 1 tail sums
    SumTable& s2;   // r = 2 tail sums
    RateCache& rates;
    uint64_t seed = 0;
};

// t such that the one-sided Chernoff bound e^2 e^{-t} equals failure_prob.
inline double deviation_t_for(double failure_prob) { return 2.0 + std::log(1.0 / failure_prob); }

// Doubling-horizon race: decides the monopolist and the losing number with
// certified tail brackets, or returns a censored outcome at the cap.
RaceOutcome race_to_monopoly(EmbeddingContext& ctx, const UrnState& start, double delta,
                             int64_t cap, uint64_t replicate);
// Buffer-reusing variant for replicate loops.
RaceOutcome race_to_monopoly(EmbeddingContext& ctx, const UrnState& start, double delta,
                             int64_t cap, uint64_t replicate, BinClock& c1, BinClock& c2);

// Resolves the indicators {L > n} for up to 64 ascending thresholds without
// pinning L itself: each indicator compares one loser arrival against the
// winner's explosion-time bracket, so the doubling stops as soon as every
// threshold (rather than the arrival nearest the explosion time) is decided.
// Same certificates and streams as race_to_monopoly; agrees with it wherever
// both decide.
struct ThresholdRaceOutcome {
    int winner = 0;
    bool censored = false;
    uint64_t exceeds = 0;  // bit k set when L > thresholds[k]
    int64_t horizon = 0;
};
ThresholdRaceOutcome race_thresholds(EmbeddingContext& ctx, const UrnState& start, double delta,
                                     int64_t cap, uint64_t replicate, BinClock& c1, BinClock& c2,
                                     const std::vector<int64_t>& thresholds);

// Event {bin 1 holds >= ceil(beta*N) balls when the system total reaches N},
// evaluated through the clock-sum identity. Deterministically false when the
// remaining balls cannot lift bin 1 to the threshold.
bool has_more_than_event(EmbeddingContext& ctx, const UrnState& state, double beta, int64_t N,
                         uint64_t replicate);

// Event {|I_1 - I_2| <= q when the total reaches n}; n must exceed the
// current total. q >= n is trivially true.
bool window_event(EmbeddingContext& ctx, const UrnState& state, int64_t q, int64_t n,
                  uint64_t replicate);

// Shared-clock forms used by experiment loops (clocks must already cover the
// required indices). lo is the window floor ceil((n-q)/2).
bool window_event_on(const BinClock& c1, const BinClock& c2, int64_t lo, int64_t n);
bool has_more_than_on(const BinClock& c1, const BinClock& c2, int64_t threshold, int64_t N);

struct ImbalanceOutcome {
    bool occurred = false;
    bool censored = false;
    int64_t total_at_occurrence = -1;
    int64_t horizon = 0;
};

// Monitors {exists N >= n : HasMoreThan(beta, N)} from the state [n, alpha];
// stops when either the event fires (exact) or bin 1's clock is certifiably
// past bin 2's explosion-time upper bound.
ImbalanceOutcome monitor_imbalance(EmbeddingContext& ctx, int64_t n, double alpha, double beta,
                                   double delta, int64_t cap, uint64_t replicate);

}  // namespace bbf
