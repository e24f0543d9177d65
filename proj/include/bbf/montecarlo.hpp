#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bbf/analytics.hpp"
#include "bbf/embedding.hpp"

namespace bbf {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TailEstimate {
    std::string event_label;
    int64_t n_or_N = 0;
    int64_t samples = 0;
    int64_t hits = 0;
    int64_t censored = 0;
    double p_hat = 0.0;   // over decided samples
    double ci_low = 0.0;
    double ci_high = 1.0;
    uint64_t seed = 0;

    int64_t decided() const { return samples - censored; }
    // worst-case bracket: all censored samples assigned to either side
    double bracket_low() const {
        return samples ? static_cast<double>(hits) / static_cast<double>(samples) : 0.0;
    }
    double bracket_high() const {
        return samples ? static_cast<double>(hits + censored) / static_cast<double>(samples) : 1.0;
    }
};

struct ResultRow {
    std::string experiment;
    std::string feedback;
    std::optional<double> p;
    int64_t x0 = 0, y0 = 0;
    std::optional<double> param_alpha;
    std::optional<double> param_beta;
    std::optional<int64_t> param_q;
    TailEstimate estimate;
    std::optional<double> prediction;
    std::optional<double> ratio;
    std::optional<double> z_score;  // (p_hat - prediction) / score SE under the prediction
};

struct MonteCarloConfig {
    uint64_t seed = 0;
    double delta = 1e-9;
    int64_t cap = 1000000;
    double confidence = 0.99;
    int workers = 0;  // 0: BBF_WORKERS env, then hardware concurrency
};

int resolve_workers(int requested);

// One race per replicate; each L is compared against every n in n_list, so the
// per-n events are exactly nested. Censored races are bracketed, not dropped.
std::vector<ResultRow> experiment_losing_tail(Analytics& analytics, int64_t x, int64_t y,
                                              const std::vector<int64_t>& n_list, int64_t samples,
                                              const MonteCarloConfig& cfg);

// Start [n, alpha]; estimates Pr[exists N >= n with bin 1 at >= ceil(beta N)].
ResultRow experiment_imbalance(const FeedbackFunction& fb, int64_t n, double alpha, double beta,
                               int64_t samples, const MonteCarloConfig& cfg);

// Pr[both bins hold >= ceil(alpha n) at total n], shared clocks across n_list.
std::vector<ResultRow> experiment_loser_fraction(Analytics& analytics, int64_t x, int64_t y,
                                                 double alpha, const std::vector<int64_t>& n_list,
                                                 int64_t samples, const MonteCarloConfig& cfg);

struct QSpec {
    enum class Kind { constant, alpha_n, lambda_sqrt_n };
    Kind kind = Kind::constant;
    double value = 0.0;
    // alpha_n yields the loser-fraction-equivalent window n - 2*ceil(alpha n),
    // so the two experiments coincide event-for-event under shared seeds.
    int64_t q_of(int64_t n) const;
};

struct WindowResult {
    std::vector<ResultRow> rows;
    std::optional<double> fitted_exponent;  // slope of ln p_hat vs ln n
    std::vector<std::string> warnings;
};

WindowResult experiment_window(Analytics& analytics, int64_t x, int64_t y, const QSpec& q,
                               const std::vector<int64_t>& n_list, int64_t samples,
                               const MonteCarloConfig& cfg);

enum class ExperimentType { tail_loser, imbalance, loser_fraction, window };

struct ExperimentSpec {
    ExperimentType type = ExperimentType::tail_loser;
    int64_t x0 = 1, y0 = 1;        // initial counts (imbalance derives them from [n, alpha])
    std::vector<int64_t> n_list;   // single entry for imbalance
    int64_t samples = 0;
    double alpha = 0.0;
    double beta = 0.0;
    std::optional<QSpec> q_spec;
};

struct ExperimentPlan {
    FeedbackFunction fb = FeedbackFunction::power(2.0);
    uint64_t seed = 0;
    double delta = 1e-9;
    int64_t cap = 1000000;
    double confidence = 0.99;
    std::vector<ExperimentSpec> experiments;

    static ExperimentPlan from_json_text(const std::string& text);
};

struct PlanReport {
    std::vector<ResultRow> rows;
    std::vector<std::string> warnings;
    std::vector<std::string> notes;  // e.g. fitted window exponents
};

// Validates the plan (throws ConfigError with a field path), then runs every
// experiment. Output is independent of the worker count for a fixed seed.
PlanReport run_plan(const ExperimentPlan& plan, int workers);

std::string rows_to_csv(const std::vector<ResultRow>& rows);
std::string rows_to_json(const std::vector<ResultRow>& rows);

}  // namespace bbf
