#include "bbf/discrete.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace bbf {

UrnState UrnState::from_fraction(int64_t n, double alpha) {
    if (n < 2) throw std::domain_error("[n, alpha] state needs n >= 2");
    int64_t x = ceil_fraction(alpha, n);
    x = std::clamp<int64_t>(x, 1, n - 1);  // both bins must be populated
    return UrnState{std::vector<int64_t>{x, n - x}};
}

int64_t UrnState::total() const {
    int64_t t = 0;
    for (int64_t c : counts) t += c;
    return t;
}

void UrnState::validate() const {
    if (counts.size() < 2) throw std::domain_error("urn state needs at least two bins");
    for (int64_t c : counts)
        if (c < 1) throw std::domain_error("every bin must start with at least one ball");
}

double step_probability(const FeedbackFunction& fb, const UrnState& state, int bin) {
    if (bin < 0 || bin >= state.bins()) throw std::domain_error("bin index out of range");
    // log-domain normalization so huge counts cannot overflow
    std::vector<double> lf(state.counts.size());
    double m = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < state.counts.size(); ++i) {
        lf[i] = fb.log_value(static_cast<double>(state.counts[i]));
        m = std::max(m, lf[i]);
    }
    double denom = 0.0;
    for (double v : lf) denom += std::exp(v - m);
    return std::exp(lf[bin] - m) / denom;
}

std::vector<UrnState> simulate_steps(const FeedbackFunction& fb, const UrnState& start,
                                     int64_t m, const CounterStream& stream) {
    if (m < 0) throw std::domain_error("simulate_steps requires m >= 0");
    std::vector<UrnState> traj;
    traj.reserve(static_cast<size_t>(m) + 1);
    traj.push_back(start);

    const int B = start.bins();
    UrnState cur = start;
    // log f cached per ball count; counts only grow
    std::vector<double> logf_by_count;
    auto logf = [&](int64_t c) {
        size_t idx = static_cast<size_t>(c);
        if (idx >= logf_by_count.size()) {
            size_t old = logf_by_count.size();
            logf_by_count.resize(idx + 1);
            for (size_t k = std::max<size_t>(old, 1); k <= idx; ++k)
                logf_by_count[k] = fb.log_value(static_cast<double>(k));
        }
        return logf_by_count[idx];
    };

    std::vector<double> w(B);
    for (int64_t step = 0; step < m; ++step) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < B; ++i) {
            w[i] = logf(cur.counts[i]);
            mx = std::max(mx, w[i]);
        }
        double denom = 0.0;
        for (int i = 0; i < B; ++i) {
            w[i] = std::exp(w[i] - mx);
            denom += w[i];
        }
        double u = stream.uniform_open(static_cast<uint64_t>(step)) * denom;
        int chosen = B - 1;
        double acc = 0.0;
        for (int i = 0; i < B; ++i) {
            acc += w[i];
            if (u < acc) {
                chosen = i;
                break;
            }
        }
        cur.counts[chosen] += 1;
        traj.push_back(cur);
    }
    return traj;
}

long double PathDistribution::probability(const UrnState& s) const {
    auto it = entries.find(s);
    return it == entries.end() ? 0.0L : it->second;
}

long double PathDistribution::total_mass() const {
    long double t = 0.0L;
    for (const auto& [_, p] : entries) t += p;
    return t;
}

PathDistribution enumerate_paths(const FeedbackFunction& fb, const UrnState& start, int m) {
    if (m < 0) throw std::domain_error("enumerate_paths requires m >= 0");
    double paths = std::pow(static_cast<double>(start.bins()), static_cast<double>(m));
    if (paths > 4096.0) throw std::domain_error("enumerate_paths horizon too large (B^m > 4096)");

    const int B = start.bins();
    std::map<UrnState, long double> cur;
    cur.emplace(start, 1.0L);
    for (int step = 0; step < m; ++step) {
        std::map<UrnState, long double> next;
        for (const auto& [state, prob] : cur) {
            long double denom = 0.0L;
            std::vector<long double> f(B);
            for (int i = 0; i < B; ++i) {
                f[i] = static_cast<long double>(fb.value(static_cast<double>(state.counts[i])));
                denom += f[i];
            }
            for (int i = 0; i < B; ++i) {
                UrnState child = state;
                child.counts[i] += 1;
                next[child] += prob * (f[i] / denom);
            }
        }
        cur = std::move(next);
    }
    PathDistribution out;
    out.horizon = m;
    out.entries = std::move(cur);
    return out;
}

void write_trajectory_csv(std::ostream& os, const std::vector<UrnState>& trajectory) {
    if (trajectory.empty()) return;
    os << "step";
    for (int b = 1; b <= trajectory.front().bins(); ++b) os << ",bin_" << b;
    os << "\n";
    for (size_t s = 0; s < trajectory.size(); ++s) {
        os << s;
        for (int64_t c : trajectory[s].counts) os << ',' << c;
        os << "\n";
    }
}

}  // namespace bbf
