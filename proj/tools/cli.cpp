#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "thetaexp/error.hpp"
#include "thetaexp/expansion.hpp"
#include "thetaexp/io.hpp"
#include "thetaexp/measure.hpp"
#include "thetaexp/montecarlo.hpp"
#include "thetaexp/parallel.hpp"
#include "thetaexp/qfield.hpp"
#include "thetaexp/transfer.hpp"

namespace thetaexp::cli {

namespace {

struct Global {
    std::string format = "json";
    std::string out_path;
    unsigned threads = 0;
};

// Where records go. A single writer per run.
class Sink {
public:
    Sink(const Global& g, std::ostream& fallback) : format_(g.format) {
        if (!g.out_path.empty()) {
            file_ = std::make_unique<std::ofstream>(g.out_path);
            if (!*file_) throw config_error("cannot open output file " + g.out_path);
            stream_ = file_.get();
        } else {
            stream_ = &fallback;
        }
    }

    bool csv() const { return format_ == "csv"; }
    std::ostream& stream() { return *stream_; }

    void config(const json& cfg) {
        if (csv()) {
            for (auto it = cfg.begin(); it != cfg.end(); ++it) {
                if (it.value().is_object()) {
                    for (auto o = it.value().begin(); o != it.value().end(); ++o)
                        *stream_ << "# " << o.key() << '=' << (o.value().is_string() ? o.value().get<std::string>()
                                                                                      : o.value().dump())
                                 << '\n';
                } else {
                    *stream_ << "# " << it.key() << '='
                             << (it.value().is_string() ? it.value().get<std::string>() : it.value().dump()) << '\n';
                }
            }
        } else {
            *stream_ << cfg.dump() << '\n';
        }
    }

    void record(const json& r) {
        if (csv())
            write_record_csv(*stream_, r);
        else
            *stream_ << r.dump() << '\n';
    }

    // Records sharing the keys of the first one.
    void table(const std::vector<json>& rows) {
        if (!csv()) {
            for (const auto& r : rows) *stream_ << r.dump() << '\n';
            return;
        }
        if (rows.empty()) return;
        std::ostringstream first;
        write_record_csv(first, rows.front());
        *stream_ << first.str();
        for (std::size_t k = 1; k < rows.size(); ++k) {
            std::ostringstream line;
            write_record_csv(line, rows[k]);
            const std::string text = line.str();
            *stream_ << text.substr(text.find('\n') + 1);
        }
    }

private:
    std::string format_;
    std::unique_ptr<std::ofstream> file_;
    std::ostream* stream_;
};

// Fully resolved option values of a subcommand chain, defaults included.
json resolved_config(const std::vector<const CLI::App*>& chain, const Global& g) {
    json cfg;
    cfg["record"] = "config";
    std::string path;
    for (std::size_t k = 1; k < chain.size(); ++k) path += (k > 1 ? " " : "") + chain[k]->get_name();
    cfg["command"] = path;
    json options;
    options["format"] = g.format;
    options["out"] = g.out_path;
    options["threads"] = g.threads ? g.threads : default_thread_count();
    for (std::size_t k = 1; k < chain.size(); ++k) {
        for (const CLI::Option* opt : chain[k]->get_options()) {
            const std::string name = opt->get_single_name();
            if (name.empty() || name == "help") continue;
            std::string value;
            if (opt->count() > 0) {
                const auto& results = opt->results();
                if (opt->get_expected_min() == 0) {
                    value = "true";
                } else {
                    for (std::size_t r = 0; r < results.size(); ++r) value += (r ? "," : "") + results[r];
                }
            } else {
                value = opt->get_expected_min() == 0 ? "false" : opt->get_default_str();
                if (value == "{}") value.clear();
            }
            options[name] = value;
        }
    }
    cfg["options"] = options;
    return cfg;
}

bool looks_decimal(const std::string& text) {
    if (text.find("sqrt") != std::string::npos || text.find("√") != std::string::npos) return false;
    return text.find_first_of(".eE") != std::string::npos;
}

std::string join_digits(const std::vector<Digit>& digits) {
    std::string s;
    for (std::size_t k = 0; k < digits.size(); ++k) s += (k ? "," : "") + std::to_string(digits[k]);
    return s;
}

// ---- commands -----------------------------------------------------------------------

struct ExpandArgs {
    std::int64_t m = 2;
    std::string x;
    std::size_t n = 10;
    std::string mode = "auto";
    bool period = false;
    std::size_t period_cap = 1000;
    unsigned decimals = 20;
};

void run_expand(const ExpandArgs& a, Sink& sink) {
    const auto params = ThetaParams::make(a.m);
    const bool decimal = looks_decimal(a.x);
    std::string mode_name = a.mode;
    if (mode_name == "auto") mode_name = decimal ? "double" : "exact";
    const NumericMode mode = parse_mode(mode_name);
    if (mode.kind == NumericKind::exact && decimal)
        throw parameter_error("decimal input '" + a.x + "' needs --mode double or interval");
    if (a.n < 1) throw domain_error("--n must be >= 1");

    Point x;
    if (mode.kind == NumericKind::float64) {
        if (decimal) {
            try {
                x = std::stod(a.x);
            } catch (const std::exception&) {
                throw domain_error("cannot read x='" + a.x + "'");
            }
        } else {
            x = QuadNumber::parse(a.x, a.m).to_double();
        }
    } else {
        x = QuadNumber::parse(a.x, a.m);
    }
    const Expansion e = expand(x, a.n, params, mode);
    json r = expansion_json(e, a.decimals);
    if (a.period) {
        if (mode.kind != NumericKind::exact) throw parameter_error("--period needs exact mode");
        const auto info = detect_period(std::get<QuadNumber>(x), a.period_cap, params);
        r["period"] = info ? json{{"preperiod", info->preperiod}, {"period", info->period}} : json(nullptr);
    }
    if (sink.csv()) r["digits"] = join_digits(e.digits);
    sink.record(r);
}

struct EvaluateArgs {
    std::int64_t m = 2;
    std::vector<Digit> digits;
    std::string tail = "0";
    bool exact = false;
    unsigned decimals = 20;
};

void run_evaluate(const EvaluateArgs& a, Sink& sink) {
    const auto params = ThetaParams::make(a.m);
    if (a.digits.empty()) throw domain_error("--digits needs at least one digit");
    json r = make_record(a.m, "evaluate");
    r["digits"] = sink.csv() ? json(join_digits(a.digits)) : json(a.digits);
    if (a.exact) {
        const QuadNumber tail = QuadNumber::parse(a.tail, a.m);
        const QuadNumber v = evaluate_exact(a.digits, params, tail);
        r["value"] = v.to_double();
        r["value_exact"] = v.to_string();
        r["value_decimal"] = v.to_decimal(a.decimals);
    } else {
        const double tail = looks_decimal(a.tail) ? std::stod(a.tail) : QuadNumber::parse(a.tail, a.m).to_double();
        r["value"] = evaluate(a.digits, params, tail);
    }
    sink.record(r);
}

struct CylinderArgs {
    std::int64_t m = 2;
    std::vector<Digit> digits;
};

void run_cylinder(const CylinderArgs& a, Sink& sink) {
    const auto params = ThetaParams::make(a.m);
    if (a.digits.empty()) throw domain_error("--digits needs at least one digit");
    const ExactInterval iv = cylinder_rank_n_exact(a.digits, params);
    json r = make_record(a.m, a.digits.size() == 1 ? "cylinder" : "cylinder_rank_n");
    r["digits"] = sink.csv() ? json(join_digits(a.digits)) : json(a.digits);
    r["lo"] = iv.lo.to_double();
    r["hi"] = iv.hi.to_double();
    r["lo_open"] = iv.lo_open;
    r["hi_open"] = iv.hi_open;
    r["lo_exact"] = iv.lo.to_string();
    r["hi_exact"] = iv.hi.to_string();
    r["diameter"] = iv.diameter().to_double();
    sink.record(r);
}

struct MeasureArgs {
    std::int64_t m = 2;
    double x = 0.0, a = 0.0, b = 0.0, u = 0.0;
    std::int64_t i = 2, k = 2, N = 2;
    int order = 1;
};

void emit_value(Sink& sink, std::int64_t m, const std::string& id, json inputs, double value) {
    json r = make_record(m, id);
    for (auto it = inputs.begin(); it != inputs.end(); ++it) r[it.key()] = it.value();
    r["value"] = value;
    sink.record(r);
}

struct InvariantArgs {
    std::int64_t m = 2;
    std::int64_t cutoff = 1000;
    std::size_t grid = 1000;
    std::size_t intervals = 100;
    std::uint64_t seed = 1;
};

void run_invariant(const InvariantArgs& a, Sink& sink) {
    const auto ctx = MeasureContext::make(a.m);
    const auto h = Observable::invariant_density(ctx);
    double residual = 0.0;
    for (std::size_t g = 0; g <= a.grid; ++g) {
        const double x = ctx.theta() * static_cast<double>(g) / static_cast<double>(std::max<std::size_t>(a.grid, 1));
        residual = std::max(residual, std::abs(transfer_apply(h, x, a.cutoff, ctx).value - density(x, ctx)));
    }
    std::mt19937_64 rng(a.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double pushforward = 0.0;
    std::int64_t terms = 0;
    for (std::size_t k = 0; k < a.intervals; ++k) {
        double lo = unit(rng) * ctx.theta(), hi = unit(rng) * ctx.theta();
        if (lo > hi) std::swap(lo, hi);
        const auto pm = preimage_mass(lo, hi, ctx);
        terms = std::max(terms, pm.explicit_terms);
        pushforward = std::max(pushforward, std::abs(pm.value - measure_interval(lo, hi, ctx)));
    }
    json r = make_record(a.m, "invariance");
    r["cutoff"] = a.cutoff;
    r["grid_points"] = a.grid + 1;
    r["fixed_point_residual"] = residual;
    r["intervals"] = a.intervals;
    r["seed"] = a.seed;
    r["pushforward_max_error"] = pushforward;
    r["max_explicit_branches"] = terms;
    sink.record(r);
}

struct UlamArgs {
    std::int64_t m = 2;
    std::size_t cells = 1024;
    bool gap = false;
    std::string matrix_out;
    std::string density_out;
};

void run_ulam(const UlamArgs& a, const Global& g, Sink& sink) {
    const auto ctx = MeasureContext::make(a.m);
    const auto P = build_ulam(a.cells, ctx, g.threads ? g.threads : default_thread_count());
    const auto d = stationary_density(P, ctx);
    json r = make_record(a.m, "ulam");
    r["cells"] = P.cells;
    r["nonzeros"] = P.nonzeros();
    r["branch_cutoff"] = P.branch_cutoff;
    r["max_neglected_mass"] = P.max_neglected_mass;
    r["power_iterations"] = d.iterations;
    r["l1_distance"] = l1_distance_to_invariant(d, ctx);
    if (a.gap) {
        const auto gap = spectral_gap(P, d);
        r["lambda2_modulus"] = gap.modulus;
        r["gap_iterations"] = gap.iterations;
    }
    if (!a.matrix_out.empty()) {
        std::ofstream f(a.matrix_out);
        if (!f) throw config_error("cannot open " + a.matrix_out);
        write_ulam_coordinates(f, P);
    }
    if (!a.density_out.empty()) {
        std::ofstream f(a.density_out);
        if (!f) throw config_error("cannot open " + a.density_out);
        write_density_csv(f, d);
    }
    sink.record(r);
}

struct MixingArgs {
    std::int64_t m = 2;
    std::size_t max_lag = 12;
    Digit digit_cap = 50;
    std::string method = "quadrature";
    std::size_t fit_from = 1;
    std::size_t fit_to = 12;
    bool fit = true;
    bool gap = false;
    std::size_t cells = 4096;
    std::vector<Digit> pair;
    std::string curve_out;
};

void run_mixing(const MixingArgs& a, Sink& sink) {
    const auto ctx = MeasureContext::make(a.m);
    const JointMethod method = parse_joint_method(a.method);
    if (!a.pair.empty()) {
        if (a.pair.size() != 2) throw parameter_error("--pair takes two digits i,j");
        std::vector<json> rows;
        JointMassOptions opts;
        opts.ulam_cells = a.cells;
        for (std::size_t lag = 1; lag <= a.max_lag; ++lag) {
            json r = make_record(a.m, "joint_digit_mass");
            r["i"] = a.pair[0];
            r["j"] = a.pair[1];
            r["lag"] = lag;
            r["method"] = to_string(method);
            const double joint = joint_digit_mass(a.pair[0], a.pair[1], lag, ctx, method, opts);
            r["value"] = joint;
            r["product"] = digit_mass(a.pair[0], ctx) * digit_mass(a.pair[1], ctx);
            r["relative_deviation"] = joint / r["product"].get<double>() - 1.0;
            rows.push_back(r);
        }
        sink.table(rows);
        return;
    }
    std::vector<MixingEstimate> curve;
    switch (method) {
        case JointMethod::exact:
            if (a.max_lag != 1) throw parameter_error("unsupported: method exact is only available at lag 1");
            curve = psi_curve(1, a.digit_cap, ctx);
            break;
        case JointMethod::ulam: curve = psi_curve_ulam(a.max_lag, a.digit_cap, ctx, a.cells); break;
        case JointMethod::quadrature: curve = psi_curve(a.max_lag, a.digit_cap, ctx); break;
    }
    if (!a.curve_out.empty()) {
        std::ofstream f(a.curve_out);
        if (!f) throw config_error("cannot open " + a.curve_out);
        write_psi_csv(f, curve);
    }
    std::optional<ExponentialFit> fit;
    if (a.fit) fit = fit_psi(curve, a.fit_from, a.fit_to);
    if (sink.csv()) {
        if (fit)
            sink.stream() << "# K_fit=" << json(fit->amplitude).dump() << " rho_fit=" << json(fit->rate).dump()
                          << " r_squared=" << json(fit->r_squared).dump() << '\n';
        write_mixing_csv(sink.stream(), a.m, curve);
    } else {
        for (const auto& e : curve) sink.record(mixing_json(a.m, e));
        if (fit) sink.record(fit_json(a.m, *fit));
    }
    if (a.gap) {
        json r = make_record(a.m, "spectral_gap");
        r["method"] = "collocation";
        r["lambda2_modulus"] = SpectralTransfer(ctx).spectral_gap().modulus;
        if (!sink.csv()) sink.record(r);
        else sink.stream() << "# lambda2_modulus=" << r["lambda2_modulus"].dump() << '\n';
    }
}

struct ExperimentArgs {
    ExperimentConfig cfg;
    std::string norming = "n_log_n";
    std::string running_out;
};

void run_experiment(const std::string& which, ExperimentArgs a, const Global& g, Sink& sink, std::ostream& err) {
    a.cfg.norming = NormingSequence::parse(a.norming);
    a.cfg.threads = g.threads;
    const auto sim = simulate(a.cfg);
    if (!a.running_out.empty()) {
        std::ofstream f(a.running_out);
        if (!f) throw config_error("cannot open " + a.running_out);
        write_running_csv(f, sim);
    }
    json summary;
    std::string formula;
    if (which == "khinchine") {
        summary = summary_json(sim, khinchine_experiment(sim));
    } else if (which == "diamond-vaaler") {
        summary = summary_json(sim, diamond_vaaler_experiment(sim));
    } else if (which == "max-digit") {
        summary = summary_json(sim, max_digit_experiment(sim));
    } else {
        const auto rep = philipp_experiment(sim, a.cfg.norming);
        for (const auto& w : rep.classification.warnings) err << "warning: " << w << '\n';
        summary = summary_json(sim, rep);
    }
    if (sink.csv())
        write_trials_csv(sink.stream(), sim, summary["formula_id"].get<std::string>());
    else
        sink.record(summary);
}

void add_experiment_options(CLI::App* sub, ExperimentArgs& a) {
    sub->add_option("--m", a.cfg.m, "field parameter");
    sub->add_option("--n", a.cfg.n, "horizon");
    sub->add_option("--trials", a.cfg.trials, "independent trajectories");
    sub->add_option("--seed", a.cfg.seed, "base seed; trial t uses seed xor t");
    sub->add_option("--epsilons", a.cfg.epsilons, "epsilon grid")->delimiter(',');
    sub->add_option("--norming", a.norming, "n_log_n | n_log_n_pow:p | n_pow:p");
    sub->add_option("--M", a.cfg.M, "exceedance multiplier");
    sub->add_option("--checkpoints", a.cfg.checkpoints, "checkpoint horizons")->delimiter(',');
    sub->add_option("--running-per-decade", a.cfg.running_per_decade, "running ratio points per decade");
    sub->add_option("--running-out", a.running_out, "CSV file for running ratios");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"theta-expansions: digits, invariant measure, transfer operator and limit-law experiments",
                 "thetaexp"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.set_config("--config", "", "key=value configuration file (flags take precedence)");

    Global g;
    app.add_option("--format", g.format, "output format")->check(CLI::IsMember({"json", "csv"}));
    app.add_option("--out", g.out_path, "write records to this file");
    app.add_option("--threads", g.threads, "worker threads (default: THETAEXP_THREADS or all cores)");

    ExpandArgs ea;
    auto* expand_cmd = app.add_subcommand("expand", "digits and orbit of a point");
    expand_cmd->add_option("--m", ea.m, "field parameter");
    expand_cmd->add_option("--x", ea.x, "start point: p/q, a+b√m, a+b*sqrt(m) or a decimal")->required();
    expand_cmd->add_option("--n", ea.n, "number of digits");
    expand_cmd->add_option("--mode", ea.mode, "auto | exact | double | interval | interval:BITS");
    expand_cmd->add_flag("--period", ea.period, "also detect eventual periodicity (exact mode)");
    expand_cmd->add_option("--period-cap", ea.period_cap, "steps searched for a recurrence");
    expand_cmd->add_option("--decimals", ea.decimals, "decimals of the final point");

    EvaluateArgs va;
    auto* eval_cmd = app.add_subcommand("evaluate", "value of a finite digit string");
    eval_cmd->add_option("--m", va.m, "field parameter");
    eval_cmd->add_option("--digits", va.digits, "comma separated digits")->delimiter(',')->required();
    eval_cmd->add_option("--tail", va.tail, "tail point in [0, theta]");
    eval_cmd->add_flag("--exact", va.exact, "evaluate in Q(sqrt m)");
    eval_cmd->add_option("--decimals", va.decimals, "decimals of the exact value");

    CylinderArgs ca;
    auto* cyl_cmd = app.add_subcommand("cylinder", "cylinder set of a digit string");
    cyl_cmd->add_option("--m", ca.m, "field parameter");
    cyl_cmd->add_option("--digits", ca.digits, "comma separated digits")->delimiter(',')->required();

    MeasureArgs ma;
    auto* measure_cmd = app.add_subcommand("measure", "invariant measure calculus");
    measure_cmd->require_subcommand(1);
    auto* m_density = measure_cmd->add_subcommand("density", "density at x");
    m_density->add_option("--m", ma.m, "field parameter");
    m_density->add_option("--x", ma.x, "point")->required();
    auto* m_interval = measure_cmd->add_subcommand("interval", "mass of [a, b]");
    m_interval->add_option("--m", ma.m, "field parameter");
    m_interval->add_option("--a", ma.a, "left endpoint")->required();
    m_interval->add_option("--b", ma.b, "right endpoint")->required();
    auto* m_digit = measure_cmd->add_subcommand("digit", "mass of the first-digit event");
    m_digit->add_option("--m", ma.m, "field parameter");
    m_digit->add_option("--i", ma.i, "digit")->required();
    auto* m_tail = measure_cmd->add_subcommand("tail", "mass of first digit >= k");
    m_tail->add_option("--m", ma.m, "field parameter");
    m_tail->add_option("--k", ma.k, "threshold digit")->required();
    auto* m_moment = measure_cmd->add_subcommand("moment", "truncated digit moment");
    m_moment->add_option("--m", ma.m, "field parameter");
    m_moment->add_option("--N", ma.N, "truncation level")->required();
    m_moment->add_option("--order", ma.order, "1 or 2");
    auto* m_khinchine = measure_cmd->add_subcommand("khinchine", "weak-law constant");
    m_khinchine->add_option("--m", ma.m, "field parameter");

    auto* quantile_cmd = app.add_subcommand("quantile", "inverse distribution function");
    quantile_cmd->add_option("--m", ma.m, "field parameter");
    quantile_cmd->add_option("--u", ma.u, "probability")->required();

    InvariantArgs ia;
    auto* inv_cmd = app.add_subcommand("invariant-check", "fixed-point and pushforward residuals");
    inv_cmd->add_option("--m", ia.m, "field parameter");
    inv_cmd->add_option("--cutoff", ia.cutoff, "explicit branches in the transfer sum");
    inv_cmd->add_option("--grid", ia.grid, "grid intervals on [0, theta]");
    inv_cmd->add_option("--intervals", ia.intervals, "random subintervals for the pushforward check");
    inv_cmd->add_option("--seed", ia.seed, "seed for the subintervals");

    UlamArgs ua;
    auto* ulam_cmd = app.add_subcommand("ulam", "Ulam discretization of the transfer operator");
    ulam_cmd->add_option("--m", ua.m, "field parameter");
    ulam_cmd->add_option("--cells", ua.cells, "grid cells");
    ulam_cmd->add_flag("--gap", ua.gap, "estimate |lambda_2|");
    ulam_cmd->add_option("--matrix-out", ua.matrix_out, "coordinate-format matrix file");
    ulam_cmd->add_option("--density-out", ua.density_out, "density CSV file");

    MixingArgs xa;
    auto* mixing_cmd = app.add_subcommand("mixing", "psi-mixing estimates over first-digit events");
    mixing_cmd->add_option("--m", xa.m, "field parameter");
    mixing_cmd->add_option("--max-lag", xa.max_lag, "largest lag");
    mixing_cmd->add_option("--digit-cap", xa.digit_cap, "largest digit in the events");
    mixing_cmd->add_option("--method", xa.method, "quadrature | ulam | exact");
    mixing_cmd->add_option("--fit-from", xa.fit_from, "first lag of the exponential fit");
    mixing_cmd->add_option("--fit-to", xa.fit_to, "last lag of the exponential fit");
    mixing_cmd->add_flag("!--no-fit", xa.fit, "skip the exponential fit");
    mixing_cmd->add_flag("--gap", xa.gap, "also report |lambda_2| of the collocation operator");
    mixing_cmd->add_option("--cells", xa.cells, "cells for the ulam method");
    mixing_cmd->add_option("--pair", xa.pair, "report joint masses of one digit pair i,j")->delimiter(',');
    mixing_cmd->add_option("--curve-out", xa.curve_out, "psi curve CSV file");

    auto* exp_cmd = app.add_subcommand("experiment", "Monte Carlo limit-law experiments");
    exp_cmd->require_subcommand(1);
    ExperimentArgs xk, xd, xm, xp;
    auto* e_k = exp_cmd->add_subcommand("khinchine", "weak law for S_n/(n log n)");
    add_experiment_options(e_k, xk);
    auto* e_d = exp_cmd->add_subcommand("diamond-vaaler", "trimmed sums (S_n - L_n)/(n log n)");
    add_experiment_options(e_d, xd);
    auto* e_m = exp_cmd->add_subcommand("max-digit", "L_n/(n log n) against its bound");
    add_experiment_options(e_m, xm);
    auto* e_p = exp_cmd->add_subcommand("philipp", "almost-sure behaviour of S_n/a(n)");
    add_experiment_options(e_p, xp);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return 0;
        }
        app.exit(e, out, err);
        return 2;
    }

    try {
        std::vector<const CLI::App*> chain{&app};
        const CLI::App* cur = &app;
        while (true) {
            const auto subs = cur->get_subcommands();
            if (subs.empty()) break;
            cur = subs.front();
            chain.push_back(cur);
        }
        Sink sink(g, out);
        json cfg = resolved_config(chain, g);
        // Experiments echo the checkpoints actually used (those <= n, plus n).
        if (chain.size() == 3 && chain[1] == exp_cmd) {
            const auto* sub = chain[2];
            const ExperimentArgs& chosen = sub == e_k ? xk : sub == e_d ? xd : sub == e_m ? xm : xp;
            std::string list;
            for (auto c : chosen.cfg.resolved_checkpoints()) list += (list.empty() ? "" : ",") + std::to_string(c);
            cfg["options"]["checkpoints"] = list;
        }
        sink.config(cfg);

        if (expand_cmd->parsed()) {
            run_expand(ea, sink);
        } else if (eval_cmd->parsed()) {
            run_evaluate(va, sink);
        } else if (cyl_cmd->parsed()) {
            run_cylinder(ca, sink);
        } else if (measure_cmd->parsed()) {
            const auto ctx = MeasureContext::make(ma.m);
            if (m_density->parsed())
                emit_value(sink, ma.m, "density", {{"x", ma.x}}, density(ma.x, ctx));
            else if (m_interval->parsed())
                emit_value(sink, ma.m, "measure_interval", {{"a", ma.a}, {"b", ma.b}}, measure_interval(ma.a, ma.b, ctx));
            else if (m_digit->parsed())
                emit_value(sink, ma.m, "digit_mass", {{"i", ma.i}}, digit_mass(ma.i, ctx));
            else if (m_tail->parsed())
                emit_value(sink, ma.m, "tail_mass", {{"k", ma.k}}, tail_mass(ma.k, ctx));
            else if (m_moment->parsed())
                emit_value(sink, ma.m, "truncated_moment", {{"N", ma.N}, {"order", ma.order}},
                           truncated_moment(ma.N, ma.order, ctx));
            else
                emit_value(sink, ma.m, "khinchine_constant", json::object(), khinchine_constant(ctx));
        } else if (quantile_cmd->parsed()) {
            const auto ctx = MeasureContext::make(ma.m);
            emit_value(sink, ma.m, "quantile", {{"u", ma.u}}, quantile(ma.u, ctx));
        } else if (inv_cmd->parsed()) {
            run_invariant(ia, sink);
        } else if (ulam_cmd->parsed()) {
            run_ulam(ua, g, sink);
        } else if (mixing_cmd->parsed()) {
            run_mixing(xa, sink);
        } else if (e_k->parsed()) {
            run_experiment("khinchine", xk, g, sink, err);
        } else if (e_d->parsed()) {
            run_experiment("diamond-vaaler", xd, g, sink, err);
        } else if (e_m->parsed()) {
            run_experiment("max-digit", xm, g, sink, err);
        } else if (e_p->parsed()) {
            run_experiment("philipp", xp, g, sink, err);
        }
        sink.stream().flush();
        return 0;
    } catch (const error& e) {
        err << json{{"error", e.kind()}, {"message", e.what()}}.dump() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
        return 1;
    }
}

}  // namespace thetaexp::cli
