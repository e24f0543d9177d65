#include "bbf/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bbf {

namespace {

int64_t ladder_base(int64_t x, int64_t y) {
    int64_t want = std::max<int64_t>(64, 2 * std::max(x, y));
    int64_t h = 1;
    while (h < want) h <<= 1;
    return h;
}

int ladder_stages(int64_t base, int64_t cap) {
    int n = 0;
    for (int64_t h = base; h <= cap; h <<= 1) ++n;
    return std::max(n, 1);
}

void require_two_bins(const UrnState& s, const char* who) {
    if (s.bins() != 2) throw std::domain_error(std::string(who) + ": two-bin states only");
}

struct Brackets {
    double f1_lo = 0, f1_hi = 0, f2_lo = 0, f2_hi = 0;
    bool valid = false;
    int winner() const {
        if (f1_hi < f2_lo) return 1;
        if (f2_hi < f1_lo) return 2;
        return 0;
    }
};

// explosion-time brackets F_i in [A_i + S_1 - dev, A_i + S_1 + dev]; invalid
// while h is too small for the Chernoff step s = 1/sqrt(S_2) <= f(h)/2
Brackets stage_brackets(EmbeddingContext& ctx, const BinClock& c1, const BinClock& c2, int64_t h,
                        double t_dev) {
    Brackets b;
    const double s1h = ctx.s1.tail(h);
    const double s2h = ctx.s2.tail(h);
    if (1.0 / std::sqrt(s2h) > 0.5 * std::exp(ctx.fb.log_value(static_cast<double>(h)))) return b;
    const double dev = t_dev * std::sqrt(s2h);
    const double lo = std::max(0.0, s1h - dev);
    const double hi = s1h + dev;
    b.f1_lo = c1.sampled_total() + lo;
    b.f1_hi = c1.sampled_total() + hi;
    b.f2_lo = c2.sampled_total() + lo;
    b.f2_hi = c2.sampled_total() + hi;
    b.valid = true;
    return b;
}

}  // namespace

void BinClock::extend(RateCache& rates, int64_t new_horizon) {
    if (new_horizon <= horizon) return;
    rates.ensure(new_horizon);
    cum.reserve(static_cast<size_t>(new_horizon - start) + 1);
    double sum = cum.back();
    double carry = kahan_carry;
    auto push = [&](double inc) {
        double y = inc - carry;
        double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
        cum.push_back(sum);
    };
    int64_t j = horizon;
    while (j < new_horizon) {
        if ((j & 1) == 0 && j + 1 < new_horizon) {
            auto u = stream.uniform_pair(static_cast<uint64_t>(j) >> 1);
            push(-std::log(u[0]) * rates.inv_rate(j));
            push(-std::log(u[1]) * rates.inv_rate(j + 1));
            j += 2;
        } else {
            push(-std::log(stream.uniform_open(static_cast<uint64_t>(j))) * rates.inv_rate(j));
            ++j;
        }
    }
    horizon = new_horizon;
    kahan_carry = carry;
}

BinClock sample_clock(const FeedbackFunction& fb, uint64_t seed, uint64_t replicate, int bin,
                      int64_t start, int64_t up_to) {
    if (up_to < start) throw std::domain_error("sample_clock: up_to < start");
    RateCache rates(fb);
    BinClock clock;
    StreamTag tag = bin == 1 ? kTagClockBin1 : kTagClockBin2;
    clock.reset(replicate_stream(seed, replicate, tag), start);
    clock.extend(rates, up_to);
    return clock;
}

std::vector<UrnState> embedded_discrete_steps(const FeedbackFunction& fb, const UrnState& start,
                                              int64_t m, uint64_t seed, uint64_t replicate) {
    require_two_bins(start, "embedded_discrete_steps");
    if (m < 0) throw std::domain_error("embedded_discrete_steps requires m >= 0");
    const int64_t x = start.counts[0], y = start.counts[1];
    RateCache rates(fb);
    BinClock c1, c2;
    c1.reset(replicate_stream(seed, replicate, kTagClockBin1), x);
    c2.reset(replicate_stream(seed, replicate, kTagClockBin2), y);
    c1.extend(rates, x + m);
    c2.extend(rates, y + m);

    std::vector<UrnState> traj;
    traj.reserve(static_cast<size_t>(m) + 1);
    traj.push_back(start);
    UrnState cur = start;
    size_t k1 = 1, k2 = 1;
    for (int64_t step = 0; step < m; ++step) {
        if (c1.cum[k1] < c2.cum[k2]) {
            cur.counts[0] += 1;
            ++k1;
        } else {
            cur.counts[1] += 1;
            ++k2;
        }
        traj.push_back(cur);
    }
    return traj;
}

std::pair<int64_t, int64_t> embedded_terminal(RateCache& rates, BinClock& c1, BinClock& c2,
                                              int64_t x, int64_t y, int64_t m, uint64_t seed,
                                              uint64_t replicate) {
    c1.reset(replicate_stream(seed, replicate, kTagClockBin1), x);
    c2.reset(replicate_stream(seed, replicate, kTagClockBin2), y);
    c1.extend(rates, x + m);
    c2.extend(rates, y + m);
    size_t k1 = 1, k2 = 1;
    for (int64_t step = 0; step < m; ++step) {
        if (c1.cum[k1] < c2.cum[k2]) ++k1;
        else ++k2;
    }
    return {x + static_cast<int64_t>(k1) - 1, y + static_cast<int64_t>(k2) - 1};
}

RaceOutcome race_to_monopoly(EmbeddingContext& ctx, const UrnState& start, double delta,
                             int64_t cap, uint64_t replicate, BinClock& c1, BinClock& c2) {
    require_two_bins(start, "race_to_monopoly");
    if (!(delta > 0.0 && delta < 1.0)) throw std::domain_error("race_to_monopoly: delta in (0,1)");
    const int64_t x = start.counts[0], y = start.counts[1];
    const int64_t base = ladder_base(x, y);
    if (cap < base) throw std::domain_error("race_to_monopoly: cap below the first horizon");
    const int stages = ladder_stages(base, cap);
    // four one-sided tail certificates per stage (two bins, two sides)
    const double t_dev = deviation_t_for(delta / (4.0 * stages));

    c1.reset(replicate_stream(ctx.seed, replicate, kTagClockBin1), x);
    c2.reset(replicate_stream(ctx.seed, replicate, kTagClockBin2), y);

    RaceOutcome out;
    out.delta = delta;
    for (int64_t h = base; h <= cap; h <<= 1) {
        c1.extend(ctx.rates, h);
        c2.extend(ctx.rates, h);
        out.horizon = h;
        Brackets b = stage_brackets(ctx, c1, c2, h, t_dev);
        if (!b.valid) continue;
        int winner = b.winner();
        if (winner == 0) continue;

        const BinClock& loser = winner == 1 ? c2 : c1;
        const double fw_lo = winner == 1 ? b.f1_lo : b.f2_lo;
        const double fw_hi = winner == 1 ? b.f1_hi : b.f2_hi;
        // largest k with A_loser(start + k) < fw_lo; cum[0] = 0 < fw_lo always
        auto it = std::lower_bound(loser.cum.begin(), loser.cum.end(), fw_lo);
        size_t k = static_cast<size_t>(it - loser.cum.begin()) - 1;
        if (k + 1 >= loser.cum.size()) continue;        // loser may gain more balls: extend
        if (loser.cum[k + 1] <= fw_hi) continue;        // next arrival straddles the bracket
        out.winner = winner;
        out.losing_number = static_cast<int64_t>(k);
        return out;
    }
    out.censored = true;
    out.horizon = std::min(cap, out.horizon == 0 ? cap : out.horizon);
    return out;
}

RaceOutcome race_to_monopoly(EmbeddingContext& ctx, const UrnState& start, double delta,
                             int64_t cap, uint64_t replicate) {
    BinClock c1, c2;
    return race_to_monopoly(ctx, start, delta, cap, replicate, c1, c2);
}

ThresholdRaceOutcome race_thresholds(EmbeddingContext& ctx, const UrnState& start, double delta,
                                     int64_t cap, uint64_t replicate, BinClock& c1, BinClock& c2,
                                     const std::vector<int64_t>& thresholds) {
    require_two_bins(start, "race_thresholds");
    if (!(delta > 0.0 && delta < 1.0)) throw std::domain_error("race_thresholds: delta in (0,1)");
    if (thresholds.size() > 64) throw std::domain_error("race_thresholds: at most 64 thresholds");
    const int64_t x = start.counts[0], y = start.counts[1];
    const int64_t base = ladder_base(x, y);
    if (cap < base) throw std::domain_error("race_thresholds: cap below the first horizon");
    const int stages = ladder_stages(base, cap);
    const double t_dev = deviation_t_for(delta / (4.0 * stages));

    c1.reset(replicate_stream(ctx.seed, replicate, kTagClockBin1), x);
    c2.reset(replicate_stream(ctx.seed, replicate, kTagClockBin2), y);

    ThresholdRaceOutcome out;
    for (int64_t h = base; h <= cap; h <<= 1) {
        c1.extend(ctx.rates, h);
        c2.extend(ctx.rates, h);
        out.horizon = h;
        Brackets b = stage_brackets(ctx, c1, c2, h, t_dev);
        if (!b.valid) continue;
        int winner = b.winner();
        if (winner == 0) continue;

        const BinClock& loser = winner == 1 ? c2 : c1;
        const double fw_lo = winner == 1 ? b.f1_lo : b.f2_lo;
        const double fw_hi = winner == 1 ? b.f1_hi : b.f2_hi;
        uint64_t bits = 0;
        bool all_decided = true;
        for (size_t k = 0; k < thresholds.size(); ++k) {
            // {L > n} holds exactly when the loser's arrival lifting it past
            // start + n precedes the winner's explosion time
            int64_t idx = loser.start + thresholds[k] + 1;
            if (idx > h) {
                if (loser.sampled_total() > fw_hi) continue;  // decided false
                all_decided = false;
                break;
            }
            double a = loser.arrival(idx);
            if (a < fw_lo) bits |= uint64_t{1} << k;
            else if (!(a > fw_hi)) {  // inside the bracket: unresolved
                all_decided = false;
                break;
            }
        }
        if (!all_decided) continue;
        out.winner = winner;
        out.exceeds = bits;
        return out;
    }
    out.censored = true;
    return out;
}

// {bin 1 holds >= threshold when the total reaches N} happens exactly when
// bin 1's threshold-th arrival precedes bin 2's (N - threshold + 1)-th: at
// that moment bin 2 still has at most N - threshold balls, so the total is
// still short of N.
bool has_more_than_on(const BinClock& c1, const BinClock& c2, int64_t threshold, int64_t N) {
    return c1.arrival(threshold) < c2.arrival(N - threshold + 1);
}

bool has_more_than_event(EmbeddingContext& ctx, const UrnState& state, double beta, int64_t N,
                         uint64_t replicate) {
    require_two_bins(state, "has_more_than_event");
    if (!(beta > 0.0 && beta < 1.0)) throw std::domain_error("has_more_than_event: beta in (0,1)");
    const int64_t x = state.counts[0], y = state.counts[1];
    const int64_t n0 = x + y;
    if (N < n0) throw std::domain_error("has_more_than_event: N below current total");
    const int64_t k = ceil_fraction(beta, N);
    if (N == n0) return x >= k;           // no randomness left at the target total
    if (N - n0 < k - x) return false;     // cannot reach the threshold: no sampling needed

    BinClock c1, c2;
    c1.reset(replicate_stream(ctx.seed, replicate, kTagClockBin1), x);
    c2.reset(replicate_stream(ctx.seed, replicate, kTagClockBin2), y);
    c1.extend(ctx.rates, std::max(x, k));
    c2.extend(ctx.rates, std::max(y, N - k + 1));
    return has_more_than_on(c1, c2, k, N);
}

// both bins hold >= lo when the total reaches n
bool window_event_on(const BinClock& c1, const BinClock& c2, int64_t lo, int64_t n) {
    return c1.arrival(lo) < c2.arrival(n - lo + 1) && c2.arrival(lo) < c1.arrival(n - lo + 1);
}

bool window_event(EmbeddingContext& ctx, const UrnState& state, int64_t q, int64_t n,
                  uint64_t replicate) {
    require_two_bins(state, "window_event");
    const int64_t x = state.counts[0], y = state.counts[1];
    if (n <= x + y) throw std::domain_error("window_event: n must exceed the current total");
    if (q < 0) throw std::domain_error("window_event: q >= 0");
    if (q >= n) return true;
    const int64_t lo = (n - q + 1) / 2;  // ceil((n - q) / 2)
    const int64_t need = std::max(lo, n - lo + 1);

    BinClock c1, c2;
    c1.reset(replicate_stream(ctx.seed, replicate, kTagClockBin1), x);
    c2.reset(replicate_stream(ctx.seed, replicate, kTagClockBin2), y);
    c1.extend(ctx.rates, std::max(x, need));
    c2.extend(ctx.rates, std::max(y, need));
    return window_event_on(c1, c2, lo, n);
}

ImbalanceOutcome monitor_imbalance(EmbeddingContext& ctx, int64_t n, double alpha, double beta,
                                   double delta, int64_t cap, uint64_t replicate) {
    if (!(alpha > 0.0 && alpha < beta && beta < 0.5))
        throw std::domain_error("monitor_imbalance requires 0 < alpha < beta < 1/2");
    const int64_t x = ceil_fraction(alpha, n);
    const int64_t y = n - x;
    if (x < 1 || y < 1) throw std::domain_error("monitor_imbalance: degenerate start");

    ImbalanceOutcome out;
    if (x >= ceil_fraction(beta, n)) {  // already at or above the threshold fraction
        out.occurred = true;
        out.total_at_occurrence = n;
        return out;
    }

    const int64_t base = ladder_base(x, y);
    if (cap < base) throw std::domain_error("monitor_imbalance: cap below the first horizon");
    const int stages = ladder_stages(base, cap);
    const double t_dev = deviation_t_for(delta / stages);  // one one-sided bound per stage

    BinClock c1, c2;
    c1.reset(replicate_stream(ctx.seed, replicate, kTagClockBin1), x);
    c2.reset(replicate_stream(ctx.seed, replicate, kTagClockBin2), y);

    int64_t N = n + 1;  // totals strictly beyond the start involve fresh arrivals
    for (int64_t h = base; h <= cap; h <<= 1) {
        c1.extend(ctx.rates, h);
        c2.extend(ctx.rates, h);
        out.horizon = h;
        const double s1h = ctx.s1.tail(h);
        const double s2h = ctx.s2.tail(h);
        const double f2_hi = c2.sampled_total() + s1h + t_dev * std::sqrt(s2h);
        while (true) {
            const int64_t k = ceil_fraction(beta, N);
            if (k > h || N - k + 1 > h) break;  // need longer clocks
            const double a1 = c1.arrival(k);
            if (a1 < c2.arrival(N - k + 1)) {
                out.occurred = true;
                out.total_at_occurrence = N;
                return out;
            }
            if (a1 >= f2_hi) return out;  // certified: no occurrence at any larger N
            ++N;
        }
    }
    out.censored = true;
    return out;
}

}  // namespace bbf
