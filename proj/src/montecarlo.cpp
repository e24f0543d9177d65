#include "bbf/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "bbf/stats.hpp"
#include "json.hpp"

namespace bbf {

namespace {

std::string g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Blocked replicate ranges per worker; merge runs in worker order so any
// float accumulation would still be deterministic (counts are integers).
template <typename Local, typename MakeLocal, typename Body, typename Merge>
void run_replicates(int64_t samples, int workers, MakeLocal make, Body body, Merge merge) {
    workers = resolve_workers(workers);
    if (workers <= 1 || samples < 2 * workers) {
        Local local = make();
        for (int64_t rep = 0; rep < samples; ++rep) body(local, rep);
        merge(local);
        return;
    }
    int64_t chunk = (samples + workers - 1) / workers;
    std::vector<Local> locals;
    locals.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) locals.push_back(make());
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        int64_t lo = w * chunk;
        int64_t hi = std::min<int64_t>(samples, lo + chunk);
        pool.emplace_back([&, lo, hi, w]() {
            for (int64_t rep = lo; rep < hi; ++rep) body(locals[static_cast<size_t>(w)], rep);
        });
    }
    for (auto& th : pool) th.join();
    for (auto& local : locals) merge(local);
}

TailEstimate make_estimate(std::string label, int64_t n, int64_t samples, int64_t hits,
                           int64_t censored, const MonteCarloConfig& cfg) {
    TailEstimate est;
    est.event_label = std::move(label);
    est.n_or_N = n;
    est.samples = samples;
    est.hits = hits;
    est.censored = censored;
    est.seed = cfg.seed;
    int64_t decided = samples - censored;
    est.p_hat = decided > 0 ? static_cast<double>(hits) / static_cast<double>(decided) : 0.0;
    Interval ci = wilson_interval(hits, decided, cfg.confidence);
    est.ci_low = ci.lo;
    est.ci_high = ci.hi;
    return est;
}

void attach_prediction(ResultRow& row, double prediction) {
    row.prediction = prediction;
    int64_t decided = row.estimate.decided();
    if (prediction > 0.0) row.ratio = row.estimate.p_hat / prediction;
    if (prediction > 0.0 && prediction < 1.0 && decided > 0) {
        double se = std::sqrt(prediction * (1.0 - prediction) / static_cast<double>(decided));
        row.z_score = (row.estimate.p_hat - prediction) / se;
    }
}

ResultRow base_row(const FeedbackFunction& fb, const char* experiment, int64_t x, int64_t y) {
    ResultRow row;
    row.experiment = experiment;
    row.feedback = fb.name();
    if (fb.kind() != FeedbackKind::custom) row.p = fb.p();
    row.x0 = x;
    row.y0 = y;
    return row;
}

void require_config(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

void check_n_list(const std::vector<int64_t>& n_list, int64_t total, const char* where) {
    require_config(!n_list.empty(), std::string(where) + ": n_list must be nonempty");
    int64_t prev = total;
    for (int64_t n : n_list) {
        require_config(n > prev || (prev == total && n >= total),
                       std::string(where) + ": n_list must be increasing and past the start total");
        prev = n;
    }
}

}  // namespace

int resolve_workers(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("BBF_WORKERS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

std::vector<ResultRow> experiment_losing_tail(Analytics& analytics, int64_t x, int64_t y,
                                              const std::vector<int64_t>& n_list, int64_t samples,
                                              const MonteCarloConfig& cfg) {
    require_config(samples >= 1, "tail-loser: samples >= 1");
    require_config(n_list.size() <= 64, "tail-loser: at most 64 thresholds");
    check_n_list(n_list, 0, "tail-loser");
    const FeedbackFunction& fb = analytics.feedback();
    UrnState start{std::vector<int64_t>{x, y}};

    struct Local {
        RateCache rates;
        BinClock c1, c2;
        std::vector<int64_t> hits;
        int64_t censored = 0;
        explicit Local(const FeedbackFunction& f, size_t nn) : rates(f), hits(nn, 0) {}
    };
    std::vector<int64_t> hits(n_list.size(), 0);
    int64_t censored = 0;
    run_replicates<Local>(
        samples, cfg.workers, [&]() { return Local(fb, n_list.size()); },
        [&](Local& local, int64_t rep) {
            EmbeddingContext ctx{fb, analytics.s1(), analytics.s2(), local.rates, cfg.seed};
            ThresholdRaceOutcome race =
                race_thresholds(ctx, start, cfg.delta, cfg.cap, static_cast<uint64_t>(rep),
                                local.c1, local.c2, n_list);
            if (race.censored) {
                ++local.censored;
                return;
            }
            for (size_t k = 0; k < local.hits.size(); ++k)
                if (race.exceeds & (uint64_t{1} << k)) ++local.hits[k];
        },
        [&](Local& local) {
            for (size_t k = 0; k < hits.size(); ++k) hits[k] += local.hits[k];
            censored += local.censored;
        });

    std::vector<ResultRow> rows;
    for (size_t k = 0; k < n_list.size(); ++k) {
        ResultRow row = base_row(fb, "tail-loser", x, y);
        row.estimate = make_estimate("L>n", n_list[k], samples, hits[k], censored, cfg);
        attach_prediction(row, analytics.predict_tail_L(x, y, n_list[k]));
        rows.push_back(std::move(row));
    }
    return rows;
}

ResultRow experiment_imbalance(const FeedbackFunction& fb, int64_t n, double alpha, double beta,
                               int64_t samples, const MonteCarloConfig& cfg) {
    require_config(samples >= 1, "imbalance: samples >= 1");
    require_config(alpha > 0.0 && alpha < beta && beta < 0.5,
                   "imbalance: need 0 < alpha < beta < 1/2");
    SumTable s1(fb, 1.0), s2(fb, 2.0);
    int64_t hits = 0, censored = 0;

    struct Local {
        RateCache rates;
        int64_t hits = 0, censored = 0;
        explicit Local(const FeedbackFunction& f) : rates(f) {}
    };
    run_replicates<Local>(
        samples, cfg.workers, [&]() { return Local(fb); },
        [&](Local& local, int64_t rep) {
            EmbeddingContext ctx{fb, s1, s2, local.rates, cfg.seed};
            ImbalanceOutcome out = monitor_imbalance(ctx, n, alpha, beta, cfg.delta, cfg.cap,
                                                     static_cast<uint64_t>(rep));
            if (out.censored) ++local.censored;
            else if (out.occurred) ++local.hits;
        },
        [&](Local& local) {
            hits += local.hits;
            censored += local.censored;
        });

    int64_t x = ceil_fraction(alpha, n);
    ResultRow row = base_row(fb, "imbalance", x, n - x);
    row.param_alpha = alpha;
    row.param_beta = beta;
    row.estimate = make_estimate("exists N: HasMoreThan(beta,N)", n, samples, hits, censored, cfg);
    return row;
}

int64_t QSpec::q_of(int64_t n) const {
    switch (kind) {
        case Kind::constant:
            return static_cast<int64_t>(std::llround(value));
        case Kind::alpha_n:
            return n - 2 * ceil_fraction(value, n);
        case Kind::lambda_sqrt_n:
            return static_cast<int64_t>(std::llround(value * std::sqrt(static_cast<double>(n))));
    }
    return 0;
}

namespace {

// shared implementation for loser-fraction and window experiments:
// per-replicate clocks evaluated against every n through the window identity
std::vector<ResultRow> run_window_events(Analytics& analytics, const char* experiment, int64_t x,
                                         int64_t y, const std::vector<int64_t>& n_list,
                                         const std::vector<int64_t>& q_list, int64_t samples,
                                         const MonteCarloConfig& cfg) {
    const FeedbackFunction& fb = analytics.feedback();
    std::vector<int64_t> lo_list(n_list.size());
    int64_t max_index = 2;
    for (size_t k = 0; k < n_list.size(); ++k) {
        int64_t n = n_list[k], q = q_list[k];
        require_config(q >= 0 && q < n, std::string(experiment) + ": need 0 <= q < n");
        lo_list[k] = (n - q + 1) / 2;
        max_index = std::max({max_index, lo_list[k], n - lo_list[k] + 1});
    }

    struct Local {
        RateCache rates;
        BinClock c1, c2;
        std::vector<int64_t> hits;
        explicit Local(const FeedbackFunction& f, size_t nn) : rates(f), hits(nn, 0) {}
    };
    std::vector<int64_t> hits(n_list.size(), 0);
    run_replicates<Local>(
        samples, cfg.workers, [&]() { return Local(fb, n_list.size()); },
        [&](Local& local, int64_t rep) {
            local.c1.reset(replicate_stream(cfg.seed, static_cast<uint64_t>(rep), kTagClockBin1), x);
            local.c2.reset(replicate_stream(cfg.seed, static_cast<uint64_t>(rep), kTagClockBin2), y);
            local.c1.extend(local.rates, std::max(x, max_index));
            local.c2.extend(local.rates, std::max(y, max_index));
            for (size_t k = 0; k < local.hits.size(); ++k)
                if (window_event_on(local.c1, local.c2, lo_list[k], n_list[k])) ++local.hits[k];
        },
        [&](Local& local) {
            for (size_t k = 0; k < hits.size(); ++k) hits[k] += local.hits[k];
        });

    std::vector<ResultRow> rows;
    for (size_t k = 0; k < n_list.size(); ++k) {
        ResultRow row = base_row(fb, experiment, x, y);
        row.param_q = q_list[k];
        row.estimate = make_estimate("|I1-I2|<=q", n_list[k], samples, hits[k], 0, cfg);
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

std::vector<ResultRow> experiment_loser_fraction(Analytics& analytics, int64_t x, int64_t y,
                                                 double alpha, const std::vector<int64_t>& n_list,
                                                 int64_t samples, const MonteCarloConfig& cfg) {
    require_config(samples >= 1, "loser-fraction: samples >= 1");
    require_config(alpha > 0.0 && alpha < 0.5, "loser-fraction: alpha in (0, 1/2)");
    check_n_list(n_list, x + y, "loser-fraction");
    std::vector<int64_t> q_list(n_list.size());
    for (size_t k = 0; k < n_list.size(); ++k) {
        int64_t lo = ceil_fraction(alpha, n_list[k]);
        require_config(2 * lo <= n_list[k],
                       "loser-fraction: ceil(alpha n) exceeds n/2 at n=" + std::to_string(n_list[k]));
        q_list[k] = n_list[k] - 2 * lo;
    }
    auto rows = run_window_events(analytics, "loser-fraction", x, y, n_list, q_list, samples, cfg);
    for (size_t k = 0; k < rows.size(); ++k) {
        rows[k].param_alpha = alpha;
        rows[k].param_q.reset();
        rows[k].estimate.event_label = "LoserHasMoreThan(alpha,n)";
        attach_prediction(rows[k], analytics.predict_loser_fraction(x, y, alpha, n_list[k]));
    }
    return rows;
}

WindowResult experiment_window(Analytics& analytics, int64_t x, int64_t y, const QSpec& q,
                               const std::vector<int64_t>& n_list, int64_t samples,
                               const MonteCarloConfig& cfg) {
    require_config(samples >= 1, "window: samples >= 1");
    check_n_list(n_list, x + y, "window");
    std::vector<int64_t> q_list(n_list.size());
    for (size_t k = 0; k < n_list.size(); ++k) q_list[k] = q.q_of(n_list[k]);

    WindowResult out;
    out.rows = run_window_events(analytics, "window", x, y, n_list, q_list, samples, cfg);
    for (size_t k = 0; k < out.rows.size(); ++k) {
        if (q.kind == QSpec::Kind::alpha_n) out.rows[k].param_alpha = q.value;
        attach_prediction(out.rows[k],
                          analytics.predict_window(x, y, q_list[k], n_list[k], &out.warnings));
    }
    if (n_list.size() >= 2) {
        std::vector<double> xs, ys;
        for (const auto& row : out.rows) {
            if (row.estimate.p_hat <= 0.0) continue;
            xs.push_back(static_cast<double>(row.estimate.n_or_N));
            ys.push_back(row.estimate.p_hat);
        }
        if (xs.size() >= 2) out.fitted_exponent = fit_log_slope(xs, ys);
    }
    return out;
}

ExperimentPlan ExperimentPlan::from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("plan: invalid JSON: ") + e.what());
    }
    ExperimentPlan plan;
    try {
        auto fbj = j.at("feedback");
        std::string kind = fbj.at("kind").get<std::string>();
        if (kind == "power") plan.fb = FeedbackFunction::power(fbj.at("p").get<double>());
        else if (kind == "power-log")
            plan.fb = FeedbackFunction::power_log_exponent(fbj.at("p").get<double>(),
                                                           fbj.at("a").get<double>());
        else if (kind == "power-times-log")
            plan.fb = FeedbackFunction::power_times_log(fbj.at("p").get<double>());
        else throw ConfigError("plan: feedback.kind unknown: " + kind);
        plan.seed = j.at("seed").get<uint64_t>();
        plan.delta = j.value("delta", 1e-9);
        plan.cap = j.value("cap", static_cast<int64_t>(1000000));
        plan.confidence = j.value("confidence", 0.99);
        for (size_t idx = 0; idx < j.value("experiments", nlohmann::json::array()).size(); ++idx) {
            const auto& ej = j.at("experiments").at(idx);
            std::string where = "plan: experiments[" + std::to_string(idx) + "]";
            ExperimentSpec spec;
            std::string type = ej.at("type").get<std::string>();
            if (type == "tail-loser") spec.type = ExperimentType::tail_loser;
            else if (type == "imbalance") spec.type = ExperimentType::imbalance;
            else if (type == "loser-fraction") spec.type = ExperimentType::loser_fraction;
            else if (type == "window") spec.type = ExperimentType::window;
            else throw ConfigError(where + ".type unknown: " + type);
            spec.samples = ej.at("samples").get<int64_t>();
            if (spec.type == ExperimentType::imbalance) {
                spec.n_list = {ej.at("n").get<int64_t>()};
                spec.alpha = ej.at("alpha").get<double>();
                spec.beta = ej.at("beta").get<double>();
            } else {
                spec.x0 = ej.value("x0", static_cast<int64_t>(1));
                spec.y0 = ej.value("y0", static_cast<int64_t>(1));
                spec.n_list = ej.at("n_list").get<std::vector<int64_t>>();
                if (spec.type == ExperimentType::loser_fraction) spec.alpha = ej.at("alpha").get<double>();
                if (spec.type == ExperimentType::window) {
                    QSpec qs;
                    std::string qk = ej.at("q_kind").get<std::string>();
                    if (qk == "constant") qs.kind = QSpec::Kind::constant;
                    else if (qk == "alpha") qs.kind = QSpec::Kind::alpha_n;
                    else if (qk == "sqrt") qs.kind = QSpec::Kind::lambda_sqrt_n;
                    else throw ConfigError(where + ".q_kind unknown: " + qk);
                    qs.value = ej.at("q_value").get<double>();
                    spec.q_spec = qs;
                }
            }
            plan.experiments.push_back(std::move(spec));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("plan: missing or mistyped field: ") + e.what());
    }
    return plan;
}

PlanReport run_plan(const ExperimentPlan& plan, int workers) {
    PlanReport report;
    if (plan.experiments.empty()) return report;

    ValidityReport validity = check_validity(plan.fb);
    require_config(validity.passed,
                   "plan: feedback not valid; analytics unavailable (run `validate` for details)");

    MonteCarloConfig cfg;
    cfg.seed = plan.seed;
    cfg.delta = plan.delta;
    cfg.cap = plan.cap;
    cfg.confidence = plan.confidence;
    cfg.workers = workers;

    Analytics analytics(plan.fb);
    for (size_t idx = 0; idx < plan.experiments.size(); ++idx) {
        const ExperimentSpec& spec = plan.experiments[idx];
        std::string where = "plan: experiments[" + std::to_string(idx) + "]";
        require_config(spec.samples >= 1, where + ".samples >= 1");
        switch (spec.type) {
            case ExperimentType::tail_loser: {
                auto rows = experiment_losing_tail(analytics, spec.x0, spec.y0, spec.n_list,
                                                   spec.samples, cfg);
                report.rows.insert(report.rows.end(), rows.begin(), rows.end());
                break;
            }
            case ExperimentType::imbalance: {
                report.rows.push_back(experiment_imbalance(plan.fb, spec.n_list.at(0), spec.alpha,
                                                           spec.beta, spec.samples, cfg));
                break;
            }
            case ExperimentType::loser_fraction: {
                auto rows = experiment_loser_fraction(analytics, spec.x0, spec.y0, spec.alpha,
                                                      spec.n_list, spec.samples, cfg);
                report.rows.insert(report.rows.end(), rows.begin(), rows.end());
                break;
            }
            case ExperimentType::window: {
                require_config(spec.q_spec.has_value(), where + ".q_spec required");
                WindowResult wr = experiment_window(analytics, spec.x0, spec.y0, *spec.q_spec,
                                                    spec.n_list, spec.samples, cfg);
                report.rows.insert(report.rows.end(), wr.rows.begin(), wr.rows.end());
                report.warnings.insert(report.warnings.end(), wr.warnings.begin(), wr.warnings.end());
                if (wr.fitted_exponent)
                    report.notes.push_back("window fitted decay exponent: " + g17(*wr.fitted_exponent));
                break;
            }
        }
    }
    return report;
}

std::string rows_to_csv(const std::vector<ResultRow>& rows) {
    std::ostringstream os;
    os << "experiment,feedback,p,x0,y0,param_alpha,param_beta,param_q,n,samples,hits,censored,"
          "p_hat,ci_low,ci_high,prediction,ratio,z_score,seed\n";
    auto opt_d = [&](const std::optional<double>& v) { return v ? g17(*v) : std::string(); };
    for (const ResultRow& row : rows) {
        os << row.experiment << ',' << row.feedback << ',' << opt_d(row.p) << ',' << row.x0 << ','
           << row.y0 << ',' << opt_d(row.param_alpha) << ',' << opt_d(row.param_beta) << ','
           << (row.param_q ? std::to_string(*row.param_q) : std::string()) << ','
           << row.estimate.n_or_N << ',' << row.estimate.samples << ',' << row.estimate.hits << ','
           << row.estimate.censored << ',' << g17(row.estimate.p_hat) << ','
           << g17(row.estimate.ci_low) << ',' << g17(row.estimate.ci_high) << ','
           << opt_d(row.prediction) << ',' << opt_d(row.ratio) << ',' << opt_d(row.z_score) << ','
           << row.estimate.seed << "\n";
    }
    return os.str();
}

std::string rows_to_json(const std::vector<ResultRow>& rows) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    auto set_opt = [](nlohmann::ordered_json& j, const char* key, const auto& opt) {
        if (opt) j[key] = *opt;
        else j[key] = nullptr;
    };
    for (const ResultRow& row : rows) {
        nlohmann::ordered_json j;
        j["experiment"] = row.experiment;
        j["feedback"] = row.feedback;
        set_opt(j, "p", row.p);
        j["x0"] = row.x0;
        j["y0"] = row.y0;
        set_opt(j, "param_alpha", row.param_alpha);
        set_opt(j, "param_beta", row.param_beta);
        set_opt(j, "param_q", row.param_q);
        j["n"] = row.estimate.n_or_N;
        j["samples"] = row.estimate.samples;
        j["hits"] = row.estimate.hits;
        j["censored"] = row.estimate.censored;
        j["p_hat"] = row.estimate.p_hat;
        j["ci_low"] = row.estimate.ci_low;
        j["ci_high"] = row.estimate.ci_high;
        set_opt(j, "prediction", row.prediction);
        set_opt(j, "ratio", row.ratio);
        set_opt(j, "z_score", row.z_score);
        j["seed"] = row.estimate.seed;
        arr.push_back(std::move(j));
    }
    return arr.dump(2) + "\n";
}

}  // namespace bbf
