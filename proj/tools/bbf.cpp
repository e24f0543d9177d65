// bbf: simulator and tail-law analytics for two-bin balls-in-bins processes
// with feedback. Subcommands map one-to-one onto the library's experiments.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bbf/analytics.hpp"
#include "bbf/discrete.hpp"
#include "bbf/embedding.hpp"
#include "bbf/montecarlo.hpp"
#include "json.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;      // usage / configuration errors
constexpr int kExitNumerical = 3;  // tolerance unreachable and similar

struct FeedbackFlags {
    std::string kind = "power";
    double p = 2.0;
    double a = 1.0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--feedback", kind, "feedback family: power | power-log | power-times-log")
            ->check(CLI::IsMember({"power", "power-log", "power-times-log"}))
            ->capture_default_str();
        cmd->add_option("--p", p, "exponent parameter p")->capture_default_str();
        cmd->add_option("--a", a, "log-exponent parameter a (power-log only)")->capture_default_str();
    }

    bbf::FeedbackFunction build() const {
        if (kind == "power") return bbf::FeedbackFunction::power(p);
        if (kind == "power-log") return bbf::FeedbackFunction::power_log_exponent(p, a);
        return bbf::FeedbackFunction::power_times_log(p);
    }
};

struct OutputFlags {
    std::string format = "csv";
    std::string path = "-";

    void attach(CLI::App* cmd) {
        cmd->add_option("--format", format, "output format")->check(CLI::IsMember({"csv", "json"}))
            ->capture_default_str();
        cmd->add_option("--out", path, "output file ('-' for stdout)")->capture_default_str();
    }

    void write(const std::string& body) const {
        if (path == "-") {
            std::cout << body;
            return;
        }
        std::ofstream os(path, std::ios::binary);
        if (!os) throw bbf::ConfigError("cannot open output file: " + path);
        os << body;
    }
};

struct RunFlags {
    uint64_t seed = 0;
    double delta = 1e-9;
    int64_t cap = 1000000;
    double confidence = 0.99;
    int64_t samples = 0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--seed", seed, "base seed for the replicate streams")->required();
        cmd->add_option("--samples", samples, "number of Monte Carlo replicates")
            ->required()
            ->check(CLI::PositiveNumber);
        cmd->add_option("--delta", delta, "tail-certificate failure budget per replicate")
            ->check(CLI::Range(1e-15, 0.5))
            ->capture_default_str();
        cmd->add_option("--cap", cap, "per-bin horizon cap before censoring")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        cmd->add_option("--confidence", confidence, "confidence level of the reported intervals")
            ->check(CLI::Range(0.5, 0.9999999))
            ->capture_default_str();
    }

    bbf::MonteCarloConfig config() const {
        bbf::MonteCarloConfig cfg;
        cfg.seed = seed;
        cfg.delta = delta;
        cfg.cap = cap;
        cfg.confidence = confidence;
        cfg.workers = 0;  // BBF_WORKERS or hardware concurrency
        return cfg;
    }
};

void emit_rows(const std::vector<bbf::ResultRow>& rows, const OutputFlags& out) {
    out.write(out.format == "json" ? bbf::rows_to_json(rows) : bbf::rows_to_csv(rows));
}

void require_valid(const bbf::FeedbackFunction& fb) {
    bbf::ValidityReport rep = bbf::check_validity(fb);
    if (!rep.passed)
        throw bbf::ConfigError("feedback not valid; analytics unavailable (see `bbf validate`)");
}

int run_validate(const FeedbackFlags& fb_flags, int64_t grid_max, double tolerance_c) {
    bbf::FeedbackFunction fb = fb_flags.build();
    bbf::ValidityReport rep = bbf::check_validity(fb, grid_max, tolerance_c);
    std::cout << "feedback: " << fb.name() << " (p=" << fb.p();
    if (fb.kind() == bbf::FeedbackKind::power_log_exponent) std::cout << ", a=" << fb.a();
    std::cout << ")\n";
    auto line = [](const char* what, bool ok) {
        std::cout << "  " << what << ": " << (ok ? "pass" : "FAIL") << "\n";
    };
    line("condition 1, liminf h(x) > 1", rep.exponent_liminf_above_one);
    std::cout << "    min h over tail grid = " << rep.min_tail_exponent << "\n";
    line("condition 2, x^(-1/4) h(x) decreasing to 0", rep.exponent_subpolynomial);
    line("condition 3, slowly varying h", rep.exponent_slowly_varying);
    std::cout << "    empirical C = " << rep.empirical_slow_variation_c << "\n";
    line("monopoly condition, S_1(1) finite", rep.monopoly_sum_finite);
    if (rep.monopoly_sum_finite) std::cout << "    S_1(1) = " << rep.s1_from_one << "\n";
    for (const std::string& w : rep.warnings) std::cout << "  note: " << w << "\n";
    std::cout << (rep.passed ? "VALID" : "NOT VALID") << "\n";
    return rep.passed ? kExitOk : kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-bin balls-in-bins with feedback: exact embedding sampler, "
                 "monopoly-law experiments, and asymptotic predictors"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read options from an INI/TOML config file");
    app.get_config_formatter_base()->arrayDelimiter(',');
    bool dump_config = false;
    app.add_flag("--dump-config", dump_config,
                 "print the resolved configuration and exit without running");

    // validate
    auto* c_validate = app.add_subcommand("validate", "check the feedback-function validity conditions");
    FeedbackFlags fb_validate;
    fb_validate.attach(c_validate);
    int64_t grid_max = 100000;
    double tolerance_c = 10.0;
    c_validate->add_option("--grid-max", grid_max, "largest grid point sampled")
        ->check(CLI::Range(static_cast<int64_t>(100), static_cast<int64_t>(100000000)))
        ->capture_default_str();
    c_validate->add_option("--tolerance-c", tolerance_c, "bound accepted for the empirical C")
        ->capture_default_str();

    // constant
    auto* c_constant = app.add_subcommand("constant", "compute the tail-law constant c by Fourier inversion");
    FeedbackFlags fb_constant;
    fb_constant.attach(c_constant);
    int64_t cx = 1, cy = 1;
    double rel_tol = 1e-7;
    c_constant->add_option("--x0", cx, "initial balls in bin 1")->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_constant->add_option("--y0", cy, "initial balls in bin 2")->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_constant->add_option("--rel-tol", rel_tol, "relative tolerance for c")
        ->check(CLI::Range(1e-10, 1e-2))
        ->capture_default_str();
    OutputFlags out_constant;
    out_constant.attach(c_constant);

    // simulate
    auto* c_simulate = app.add_subcommand("simulate", "run the discrete chain and emit the trajectory");
    FeedbackFlags fb_simulate;
    fb_simulate.attach(c_simulate);
    int64_t sx = 1, sy = 1, steps = 0;
    uint64_t sim_seed = 0;
    std::vector<int64_t> counts;
    c_simulate->add_option("--x0", sx, "initial balls in bin 1")->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_simulate->add_option("--y0", sy, "initial balls in bin 2")->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_simulate->add_option("--counts", counts, "initial counts for all bins (overrides --x0/--y0)")
        ->delimiter(',');
    c_simulate->add_option("--steps", steps, "number of balls to add")->required()
        ->check(CLI::NonNegativeNumber);
    c_simulate->add_option("--seed", sim_seed, "seed")->required();
    OutputFlags out_simulate;
    out_simulate.attach(c_simulate);

    // tail-loser
    auto* c_tail = app.add_subcommand("tail-loser", "estimate Pr[L > n] against c*S_1(n)");
    FeedbackFlags fb_tail;
    fb_tail.attach(c_tail);
    RunFlags run_tail;
    run_tail.attach(c_tail);
    int64_t tx = 1, ty = 1;
    std::vector<int64_t> tail_n;
    c_tail->add_option("--x0", tx, "initial balls in bin 1")->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_tail->add_option("--y0", ty, "initial balls in bin 2")->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_tail->add_option("--n", tail_n, "tail thresholds (comma separated, increasing)")
        ->required()
        ->delimiter(',');
    OutputFlags out_tail;
    out_tail.attach(c_tail);

    // imbalance
    auto* c_imb = app.add_subcommand("imbalance", "monitor HasMoreThan(beta, N) from the state [n, alpha]");
    FeedbackFlags fb_imb;
    fb_imb.attach(c_imb);
    RunFlags run_imb;
    run_imb.attach(c_imb);
    int64_t imb_n = 0;
    double imb_alpha = 0.0, imb_beta = 0.0;
    c_imb->add_option("--n", imb_n, "initial total number of balls")->required()
        ->check(CLI::Range(static_cast<int64_t>(2), static_cast<int64_t>(1) << 40));
    c_imb->add_option("--alpha", imb_alpha, "initial fraction in bin 1")->required()
        ->check(CLI::Range(1e-9, 0.5));
    c_imb->add_option("--beta", imb_beta, "threshold fraction")->required()
        ->check(CLI::Range(1e-9, 0.5));
    OutputFlags out_imb;
    out_imb.attach(c_imb);

    // loser-fraction
    auto* c_frac = app.add_subcommand("loser-fraction",
                                      "estimate Pr[loser holds >= alpha*n at total n]");
    FeedbackFlags fb_frac;
    fb_frac.attach(c_frac);
    RunFlags run_frac;
    run_frac.attach(c_frac);
    int64_t fx = 1, fy = 1;
    double frac_alpha = 0.25;
    std::vector<int64_t> frac_n;
    c_frac->add_option("--x0", fx, "initial balls in bin 1")->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_frac->add_option("--y0", fy, "initial balls in bin 2")->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_frac->add_option("--alpha", frac_alpha, "fraction threshold in (0, 1/2)")->required()
        ->check(CLI::Range(1e-9, 0.5));
    c_frac->add_option("--n", frac_n, "totals at which to evaluate (comma separated)")
        ->required()
        ->delimiter(',');
    OutputFlags out_frac;
    out_frac.attach(c_frac);

    // window
    auto* c_win = app.add_subcommand("window", "estimate Pr[|I1 - I2| <= q(n) at total n]");
    FeedbackFlags fb_win;
    fb_win.attach(c_win);
    RunFlags run_win;
    run_win.attach(c_win);
    int64_t wx = 1, wy = 1;
    std::vector<int64_t> win_n;
    std::optional<int64_t> q_const;
    std::optional<double> q_alpha, q_sqrt;
    c_win->add_option("--x0", wx, "initial balls in bin 1")->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_win->add_option("--y0", wy, "initial balls in bin 2")->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_win->add_option("--n", win_n, "totals at which to evaluate (comma separated)")
        ->required()
        ->delimiter(',');
    auto* oq1 = c_win->add_option("--q-const", q_const, "constant window width q");
    auto* oq2 = c_win->add_option("--q-alpha", q_alpha,
                                  "loser-fraction-equivalent window: q(n) = n - 2*ceil(alpha n)");
    auto* oq3 = c_win->add_option("--q-sqrt", q_sqrt, "square-root window: q(n) = round(lambda*sqrt(n))");
    oq1->excludes(oq2)->excludes(oq3);
    oq2->excludes(oq3);
    OutputFlags out_win;
    out_win.attach(c_win);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    if (dump_config) {
        std::cout << app.config_to_str(true, false);
        return kExitOk;
    }

    try {
        if (c_validate->parsed()) return run_validate(fb_validate, grid_max, tolerance_c);

        if (c_constant->parsed()) {
            bbf::FeedbackFunction fb = fb_constant.build();
            require_valid(fb);
            bbf::AsymptoticConstant ac = bbf::limit_constant_c(fb, std::max(cx, cy),
                                                               std::min(cx, cy), rel_tol);
            nlohmann::ordered_json j;
            j["feedback"] = {{"kind", fb.name()}, {"p", fb.p()}};
            if (fb.kind() == bbf::FeedbackKind::power_log_exponent) j["feedback"]["a"] = fb.a();
            j["x"] = cx;
            j["y"] = cy;
            j["c"] = ac.c;
            j["error_bound"] = ac.error_bound;
            j["truncation_index"] = ac.truncation_index;
            j["imaginary_residual"] = ac.imaginary_residual;
            out_constant.write(j.dump(2) + "\n");
            return kExitOk;
        }

        if (c_simulate->parsed()) {
            bbf::FeedbackFunction fb = fb_simulate.build();
            bbf::UrnState start = counts.empty() ? bbf::UrnState{std::vector<int64_t>{sx, sy}}
                                                 : bbf::UrnState{counts};
            auto traj = bbf::simulate_steps(fb, start, steps,
                                            bbf::replicate_stream(sim_seed, 0, bbf::kTagDiscrete));
            std::ostringstream os;
            bbf::write_trajectory_csv(os, traj);
            out_simulate.write(os.str());
            return kExitOk;
        }

        if (c_tail->parsed()) {
            bbf::FeedbackFunction fb = fb_tail.build();
            require_valid(fb);
            bbf::Analytics analytics(fb);
            auto rows = bbf::experiment_losing_tail(analytics, tx, ty, tail_n, run_tail.samples,
                                                    run_tail.config());
            emit_rows(rows, out_tail);
            return kExitOk;
        }

        if (c_imb->parsed()) {
            bbf::FeedbackFunction fb = fb_imb.build();
            require_valid(fb);
            auto row = bbf::experiment_imbalance(fb, imb_n, imb_alpha, imb_beta, run_imb.samples,
                                                 run_imb.config());
            emit_rows({row}, out_imb);
            if (row.estimate.censored > 0)
                std::cerr << "warning: " << row.estimate.censored
                          << " replicates censored at the horizon cap\n";
            return kExitOk;
        }

        if (c_frac->parsed()) {
            bbf::FeedbackFunction fb = fb_frac.build();
            require_valid(fb);
            bbf::Analytics analytics(fb);
            auto rows = bbf::experiment_loser_fraction(analytics, fx, fy, frac_alpha, frac_n,
                                                       run_frac.samples, run_frac.config());
            emit_rows(rows, out_frac);
            return kExitOk;
        }

        if (c_win->parsed()) {
            bbf::FeedbackFunction fb = fb_win.build();
            require_valid(fb);
            bbf::QSpec q;
            if (q_const) {
                q.kind = bbf::QSpec::Kind::constant;
                q.value = static_cast<double>(*q_const);
            } else if (q_alpha) {
                q.kind = bbf::QSpec::Kind::alpha_n;
                q.value = *q_alpha;
            } else if (q_sqrt) {
                q.kind = bbf::QSpec::Kind::lambda_sqrt_n;
                q.value = *q_sqrt;
            } else {
                throw bbf::ConfigError("window: one of --q-const/--q-alpha/--q-sqrt is required");
            }
            bbf::Analytics analytics(fb);
            bbf::WindowResult wr = bbf::experiment_window(analytics, wx, wy, q, win_n,
                                                          run_win.samples, run_win.config());
            emit_rows(wr.rows, out_win);
            for (const std::string& w : wr.warnings) std::cerr << "warning: " << w << "\n";
            if (wr.fitted_exponent)
                std::cerr << "fitted decay exponent: " << *wr.fitted_exponent << "\n";
            return kExitOk;
        }
    } catch (const bbf::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const bbf::NumericalError& e) {
        std::cerr << "numerical error: " << e.what();
        if (std::isfinite(e.best_bound)) std::cerr << " (best value reached: " << e.best_bound << ")";
        std::cerr << "\n";
        return kExitNumerical;
    }
    return kExitUsage;
}
