#include "thetaexp/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "thetaexp/error.hpp"
#include "thetaexp/expansion.hpp"
#include "thetaexp/parallel.hpp"
#include "thetaexp/qfield.hpp"

namespace thetaexp {

namespace {

using u128 = unsigned __int128;

mpz_class to_mpz(u128 v) {
    mpz_class hi(static_cast<unsigned long>(v >> 64));
    mpz_class lo(static_cast<unsigned long>(v & ~std::uint64_t{0}));
    return (hi << 64) + lo;
}

double to_double(u128 v) {
    return static_cast<double>(static_cast<std::uint64_t>(v >> 64)) * 0x1.0p64 +
           static_cast<double>(static_cast<std::uint64_t>(v));
}

double n_log_n(std::uint64_t n) {
    const double d = static_cast<double>(n);
    return d * std::log(d);
}

std::vector<std::uint64_t> running_grid(std::uint64_t last, unsigned per_decade) {
    std::vector<std::uint64_t> ks;
    if (per_decade == 0) return ks;
    for (unsigned j = 0;; ++j) {
        const double k = std::round(std::pow(10.0, static_cast<double>(j) / per_decade));
        if (k > static_cast<double>(last)) break;
        const auto ki = static_cast<std::uint64_t>(k);
        if (ki >= 2 && (ks.empty() || ks.back() != ki)) ks.push_back(ki);
    }
    if (ks.empty() || ks.back() != last) ks.push_back(last);
    return ks;
}

double binomial_se(double p, std::size_t trials) {
    p = std::clamp(p, 0.0, 1.0);
    return std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

}  // namespace

// ---- norming sequences ------------------------------------------------------------

NormingSequence NormingSequence::from_table(std::vector<double> values) {
    if (values.empty()) throw config_error("norming table is empty");
    return {Family::table, 0.0, std::move(values)};
}

NormingSequence NormingSequence::parse(const std::string& text) {
    const auto colon = text.find(':');
    const std::string family = text.substr(0, colon);
    double p = 1.0;
    if (colon != std::string::npos) {
        try {
            std::size_t used = 0;
            p = std::stod(text.substr(colon + 1), &used);
            if (used != text.size() - colon - 1) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw config_error("bad norming parameter in '" + text + "'");
        }
    }
    if (family == "n_log_n" && colon == std::string::npos) return n_log_n();
    if (family == "n_log_n_pow") return n_log_n_pow(p);
    if (family == "n_pow") return n_pow(p);
    throw config_error("unknown norming '" + text + "' (n_log_n, n_log_n_pow:p, n_pow:p)");
}

std::string NormingSequence::name() const {
    std::ostringstream out;
    switch (family_) {
        case Family::n_log_n: return "n_log_n";
        case Family::n_log_n_pow: out << "n_log_n_pow:" << p_; break;
        case Family::n_pow: out << "n_pow:" << p_; break;
        case Family::table: out << "table:" << table_.size(); break;
    }
    return out.str();
}

double NormingSequence::operator()(std::uint64_t n) const {
    if (n == 0) throw domain_error("norming index starts at 1");
    const double d = static_cast<double>(n);
    switch (family_) {
        case Family::n_log_n: return d * std::log(d);
        case Family::n_log_n_pow: return d * std::pow(std::log(d), p_);
        case Family::n_pow: return std::pow(d, p_);
        case Family::table:
            if (n > table_.size()) throw domain_error("norming table has no entry " + std::to_string(n));
            return table_[n - 1];
    }
    return 0.0;
}

bool NormingSequence::is_regular(std::uint64_t up_to) const {
    switch (family_) {
        case Family::n_log_n: return true;
        case Family::n_log_n_pow: return p_ >= 0.0;
        case Family::n_pow: return p_ >= 1.0;
        case Family::table: {
            const std::uint64_t last = std::min<std::uint64_t>(up_to, table_.size());
            for (std::uint64_t k = 2; k <= last; ++k)
                if (table_[k - 1] / static_cast<double>(k) < table_[k - 2] / static_cast<double>(k - 1)) return false;
            return true;
        }
    }
    return false;
}

std::string to_string(Summability s) {
    return s == Summability::convergent ? "convergent" : "divergent";
}

NormingClassification norming_classify(const NormingSequence& a) {
    NormingClassification out;
    switch (a.family()) {
        case NormingSequence::Family::n_log_n: out.kind = Summability::divergent; break;
        case NormingSequence::Family::n_log_n_pow:
        case NormingSequence::Family::n_pow:
            out.kind = a.parameter() > 1.0 ? Summability::convergent : Summability::divergent;
            break;
        case NormingSequence::Family::table: {
            out.analytic = false;
            out.warnings.push_back("table norming classified by a partial-sum heuristic");
            const auto& t = a.table();
            const std::size_t N = t.size();
            if (N < 8) {
                out.warnings.push_back("table too short to classify; assuming divergent");
                out.kind = Summability::divergent;
                break;
            }
            auto partial = [&](std::size_t upto) {
                double s = 0.0;
                for (std::size_t k = 0; k < upto; ++k)
                    if (t[k] > 0.0) s += 1.0 / t[k];
                return s;
            };
            const double s4 = partial(N / 4), s2 = partial(N / 2), s1 = partial(N);
            const double late = s1 - s2, early = s2 - s4;
            out.kind = early > 0.0 && late / early < 0.85 ? Summability::convergent : Summability::divergent;
            break;
        }
    }
    if (!a.is_regular()) out.warnings.push_back("a(n)/n is not non-decreasing; the regularity hypothesis fails");
    return out;
}

std::uint64_t truncation_level_n_log_n(std::uint64_t n) {
    if (n < 2) return 0;
    return static_cast<std::uint64_t>(std::floor(n_log_n(n)));
}

double sample_gamma(std::mt19937_64& rng, const MeasureContext& ctx) {
    for (;;) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        if (u == 0.0) continue;
        const double x = quantile(u, ctx);
        if (x > 0.0) return x;
    }
}

// ---- trajectories -----------------------------------------------------------------

std::vector<TrajectoryStats> run_trajectory_checkpoints(double start, const std::vector<std::uint64_t>& checkpoints,
                                                        const MeasureContext& ctx, const TrajectoryOptions& options) {
    if (!(start > 0.0 && start <= ctx.theta())) throw domain_error("start outside (0, theta]");
    if (checkpoints.empty()) throw domain_error("no checkpoints");
    for (std::size_t c = 0; c < checkpoints.size(); ++c)
        if (checkpoints[c] == 0 || (c > 0 && checkpoints[c] <= checkpoints[c - 1]))
            throw domain_error("checkpoints must be positive and increasing");

    std::vector<std::optional<std::uint64_t>> levels(checkpoints.size());
    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
        switch (options.truncation) {
            case TruncationRule::none: break;
            case TruncationRule::fixed: levels[c] = options.fixed_level; break;
            case TruncationRule::n_log_n: levels[c] = truncation_level_n_log_n(checkpoints[c]); break;
        }
    }
    std::uint64_t min_level = std::numeric_limits<std::uint64_t>::max();
    for (const auto& l : levels)
        if (l) min_level = std::min(min_level, *l);

    const std::uint64_t last = checkpoints.back();
    const auto grid = running_grid(last, options.running_per_decade);
    const ThetaParams& params = ctx.params;

    u128 S = 0;
    std::int64_t L = 0;
    std::vector<std::int64_t> big;  // digits above the smallest level, in orbit order
    std::uint64_t exceed = 0;
    double max_normed = 0.0;
    std::vector<RunningPoint> running;
    std::vector<TrajectoryStats> out;

    auto snapshot = [&](std::uint64_t steps, std::size_t c, bool short_orbit) {
        TrajectoryStats st;
        st.n = steps;
        st.S = to_mpz(S);
        st.L = L;
        st.trimmed = st.S - L;
        st.level = levels[c];
        u128 removed = 0;
        if (st.level)
            for (std::int64_t d : big)
                if (static_cast<std::uint64_t>(d) > *st.level) removed += static_cast<std::uint64_t>(d);
        st.remainder_R = to_mpz(removed);
        st.truncated_S = st.S - st.remainder_R;
        st.exceedance_count = exceed;
        st.max_normed_sum = max_normed;
        st.running = running;
        st.short_orbit = short_orbit;
        out.push_back(std::move(st));
    };

    double x = start;
    std::size_t c = 0, r = 0;
    std::uint64_t k = 1;
    bool short_orbit = false;
    for (; k <= last; ++k) {
        if (x == 0.0) {
            short_orbit = true;
            break;
        }
        StepResult<double> step;
        try {
            step = gauss_step_unchecked(x, params);
        } catch (const domain_error&) {
            short_orbit = true;
            break;
        }
        const std::int64_t d = step.digit;
        S += static_cast<std::uint64_t>(d);
        L = std::max(L, d);
        if (static_cast<std::uint64_t>(d) > min_level) big.push_back(d);
        if (options.norming) {
            const double a = (*options.norming)(k);
            if (a > 0.0) {
                if (static_cast<double>(d) >= options.M * a) ++exceed;
                max_normed = std::max(max_normed, to_double(S) / a);
            }
        }
        if (r < grid.size() && grid[r] == k) {
            running.push_back({k, to_double(S), L});
            ++r;
        }
        if (k == checkpoints[c]) snapshot(k, c++, false);
        x = step.next;
    }
    for (; c < checkpoints.size(); ++c) snapshot(k - 1, c, short_orbit);
    return out;
}

TrajectoryStats run_trajectory(double start, std::uint64_t n, const MeasureContext& ctx,
                               const TrajectoryOptions& options) {
    if (n < 1) throw domain_error("horizon must be >= 1");
    return run_trajectory_checkpoints(start, {n}, ctx, options).front();
}

std::vector<std::int64_t> trajectory_digits(double start, std::uint64_t n, const MeasureContext& ctx) {
    if (!(start > 0.0 && start <= ctx.theta())) throw domain_error("start outside (0, theta]");
    std::vector<std::int64_t> digits;
    digits.reserve(n);
    double x = start;
    for (std::uint64_t k = 0; k < n && x != 0.0; ++k) {
        const auto step = gauss_step_unchecked(x, ctx.params);
        digits.push_back(step.digit);
        x = step.next;
    }
    return digits;
}

// ---- configuration and simulation -------------------------------------------------

void ExperimentConfig::validate() {
    validate_field_parameter(m);
    if (trials == 0) throw config_error("trials must be >= 1");
    if (n < 2) throw config_error("horizon n must be >= 2");
    if (!(M > 0.0)) throw config_error("M must be positive");
    for (double e : epsilons)
        if (!(e > 0.0)) throw config_error("epsilon values must be positive");
    for (std::size_t c = 0; c < checkpoints.size(); ++c)
        if (checkpoints[c] == 0 || (c > 0 && checkpoints[c] <= checkpoints[c - 1]))
            throw config_error("checkpoints must be positive and increasing");
}

std::vector<std::uint64_t> ExperimentConfig::resolved_checkpoints() const {
    std::vector<std::uint64_t> out;
    for (auto c : checkpoints)
        if (c < n) out.push_back(c);
    out.push_back(n);
    return out;
}

SimulationResult simulate(ExperimentConfig cfg) {
    cfg.validate();
    const auto ctx = MeasureContext::make(cfg.m);
    SimulationResult sim;
    sim.config = cfg;
    sim.checkpoints = cfg.resolved_checkpoints();
    sim.trials.resize(cfg.trials);
    TrajectoryOptions options;
    options.truncation = TruncationRule::n_log_n;
    options.norming = cfg.norming;
    options.M = cfg.M;
    options.running_per_decade = cfg.running_per_decade;
    const unsigned threads = cfg.threads ? cfg.threads : default_thread_count();
    parallel_for(cfg.trials, threads, [&](std::size_t t) {
        std::mt19937_64 rng(cfg.seed ^ static_cast<std::uint64_t>(t));
        auto& rec = sim.trials[t];
        rec.trial = t;
        rec.start = sample_gamma(rng, ctx);
        rec.checkpoints = run_trajectory_checkpoints(rec.start, sim.checkpoints, ctx, options);
    });
    return sim;
}

// ---- summaries --------------------------------------------------------------------

double sample_quantile(std::vector<double> values, double q) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double median(std::vector<double> values) {
    return sample_quantile(std::move(values), 0.5);
}

namespace {

// Values of f over trials whose orbit reached checkpoint c.
template <class F>
std::vector<double> collect(const SimulationResult& sim, std::size_t c, F&& f) {
    std::vector<double> out;
    for (const auto& rec : sim.trials) {
        const auto& st = rec.checkpoints[c];
        if (!st.short_orbit) out.push_back(f(st));
    }
    return out;
}

}  // namespace

KhinchineReport khinchine_experiment(const SimulationResult& sim) {
    const auto ctx = MeasureContext::make(sim.config.m);
    KhinchineReport report;
    for (std::size_t c = 0; c < sim.checkpoints.size(); ++c) {
        const std::uint64_t n = sim.checkpoints[c];
        const double norm = n_log_n(n);
        const double log_n = std::log(static_cast<double>(n));
        const auto ratios = collect(sim, c, [&](const TrajectoryStats& s) { return s.S.get_d() / norm; });
        const auto truncated = collect(sim, c, [&](const TrajectoryStats& s) { return s.truncated_S.get_d() / norm; });
        const auto has_remainder = collect(sim, c, [&](const TrajectoryStats& s) { return s.remainder_R > 0 ? 1.0 : 0.0; });
        const std::size_t used = ratios.size();

        KhinchineCheckpoint cp;
        cp.n = n;
        cp.trials = used;
        cp.median_ratio = median(ratios);
        cp.limit = ctx.C;
        cp.corrected_target = ctx.C * (log_n + std::log(log_n)) / log_n;
        double mean = 0.0;
        for (double v : truncated) mean += v;
        mean /= static_cast<double>(std::max<std::size_t>(used, 1));
        double var = 0.0;
        for (double v : truncated) var += (v - mean) * (v - mean);
        cp.truncated_variance = used > 1 ? var / static_cast<double>(used - 1) : 0.0;
        double rem = 0.0;
        for (double v : has_remainder) rem += v;
        cp.remainder_fraction = used ? rem / static_cast<double>(used) : 0.0;
        const double p0 = std::min(1.0, ctx.C / log_n);
        cp.remainder_bound = p0 + 3.0 * binomial_se(p0, std::max<std::size_t>(used, 1));
        report.checkpoints.push_back(cp);

        for (double eps : sim.config.epsilons) {
            KhinchineRow row;
            row.n = n;
            row.epsilon = eps;
            row.trials = used;
            std::size_t hits = 0;
            for (double r : ratios)
                if (std::abs(r - ctx.C) > eps) ++hits;
            row.exceedance_fraction = used ? static_cast<double>(hits) / static_cast<double>(used) : 0.0;
            report.rows.push_back(row);
        }
    }
    return report;
}

KhinchineReport khinchine_experiment(const ExperimentConfig& cfg) {
    return khinchine_experiment(simulate(cfg));
}

DiamondVaalerReport diamond_vaaler_experiment(const SimulationResult& sim) {
    const auto ctx = MeasureContext::make(sim.config.m);
    DiamondVaalerReport report;
    for (std::size_t c = 0; c < sim.checkpoints.size(); ++c) {
        const std::uint64_t n = sim.checkpoints[c];
        const double norm = n_log_n(n);
        const double log_n = std::log(static_cast<double>(n));
        const auto trimmed = collect(sim, c, [&](const TrajectoryStats& s) { return s.trimmed.get_d() / norm; });
        const auto untrimmed = collect(sim, c, [&](const TrajectoryStats& s) { return s.S.get_d() / norm; });
        TrimmedCheckpoint cp;
        cp.n = n;
        cp.median_trimmed = median(trimmed);
        cp.iqr_trimmed = sample_quantile(trimmed, 0.75) - sample_quantile(trimmed, 0.25);
        cp.iqr_untrimmed = sample_quantile(untrimmed, 0.75) - sample_quantile(untrimmed, 0.25);
        cp.corrected_target = ctx.C * (log_n + std::log(log_n)) / log_n;
        report.checkpoints.push_back(cp);
    }

    const std::uint64_t last = sim.checkpoints.back();
    std::size_t smaller = 0, counted = 0;
    for (const auto& rec : sim.trials) {
        const auto& st = rec.checkpoints.back();
        std::vector<double> a, b;
        for (const auto& p : st.running) {
            const double norm = n_log_n(p.k);
            const double untrimmed = p.S / norm;
            const double trimmed = (p.S - static_cast<double>(p.L)) / norm;
            if (trimmed > untrimmed) report.trimmed_le_untrimmed = false;
            if (p.k * 10 >= last) {
                a.push_back(trimmed);
                b.push_back(untrimmed);
            }
        }
        if (st.short_orbit || a.empty()) continue;
        auto fluctuation = [](const std::vector<double>& v) {
            const double med = median(v);
            double worst = 0.0;
            for (double x : v) worst = std::max(worst, std::abs(x - med));
            return worst;
        };
        TrialFluctuation f{rec.trial, fluctuation(a), fluctuation(b)};
        ++counted;
        if (f.trimmed < f.untrimmed) ++smaller;
        report.fluctuations.push_back(f);
    }
    report.fraction_trimmed_smaller = counted ? static_cast<double>(smaller) / static_cast<double>(counted) : 0.0;
    return report;
}

DiamondVaalerReport diamond_vaaler_experiment(const ExperimentConfig& cfg) {
    return diamond_vaaler_experiment(simulate(cfg));
}

MaxDigitReport max_digit_experiment(const SimulationResult& sim) {
    const auto ctx = MeasureContext::make(sim.config.m);
    MaxDigitReport report;
    for (std::size_t c = 0; c < sim.checkpoints.size(); ++c) {
        const std::uint64_t n = sim.checkpoints[c];
        const double norm = n_log_n(n);
        const double log_n = std::log(static_cast<double>(n));
        const auto maxima = collect(sim, c, [](const TrajectoryStats& s) { return static_cast<double>(s.L); });
        for (double eps : sim.config.epsilons) {
            MaxDigitRow row;
            row.n = n;
            row.epsilon = eps;
            row.trials = maxima.size();
            std::size_t hits = 0;
            for (double l : maxima)
                if (l > eps * norm) ++hits;
            row.probability = row.trials ? static_cast<double>(hits) / static_cast<double>(row.trials) : 0.0;
            row.bound = ctx.C / (eps * log_n);
            row.standard_error = binomial_se(std::min(1.0, row.bound), std::max<std::size_t>(row.trials, 1));
            row.holds = row.probability <= row.bound + 3.0 * row.standard_error;
            report.rows.push_back(row);
        }
    }
    return report;
}

MaxDigitReport max_digit_experiment(const ExperimentConfig& cfg) {
    return max_digit_experiment(simulate(cfg));
}

PhilippReport philipp_experiment(const SimulationResult& sim, const NormingSequence& norming) {
    const auto ctx = MeasureContext::make(sim.config.m);
    PhilippReport report;
    report.norming = norming.name();
    report.classification = norming_classify(norming);
    report.regular = norming.is_regular();
    report.M = sim.config.M;
    for (std::size_t c = 0; c < sim.checkpoints.size(); ++c) {
        const std::uint64_t n = sim.checkpoints[c];
        const double a = norming(n);
        const auto ratios = collect(sim, c, [&](const TrajectoryStats& s) { return s.S.get_d() / a; });
        PhilippCheckpoint cp;
        cp.n = n;
        cp.median = median(ratios);
        cp.max = ratios.empty() ? 0.0 : *std::max_element(ratios.begin(), ratios.end());
        report.checkpoints.push_back(cp);
    }
    if (report.classification.kind == Summability::convergent) return report;

    if (norming.name() != sim.config.norming.name())
        throw config_error("divergent norming " + norming.name() + " needs a simulation run with that norming");
    const std::uint64_t n = sim.checkpoints.back();
    double prediction = 0.0;
    for (std::uint64_t k = 1; k <= n; ++k) {
        const double a = norming(k);
        if (a > 0.0) prediction += ctx.C / (report.M * a);
    }
    report.prediction = prediction;
    // Closed-form integral of C/(M a(t)) over [2, n] for the analytic families.
    const double p = norming.parameter();
    const double ln = std::log(static_cast<double>(n)), l2 = std::log(2.0);
    switch (norming.family()) {
        case NormingSequence::Family::n_log_n:
        case NormingSequence::Family::n_log_n_pow:
            report.prediction_integral =
                ctx.C / report.M *
                (std::abs(p - 1.0) < 1e-12 ? std::log(ln) - std::log(l2)
                                           : (std::pow(ln, 1.0 - p) - std::pow(l2, 1.0 - p)) / (1.0 - p));
            break;
        case NormingSequence::Family::n_pow:
            report.prediction_integral =
                ctx.C / report.M *
                (std::abs(p - 1.0) < 1e-12 ? ln - l2
                                           : (std::exp((1.0 - p) * ln) - std::exp((1.0 - p) * l2)) / (1.0 - p));
            break;
        case NormingSequence::Family::table: break;
    }
    std::size_t used = 0, with = 0;
    double total = 0.0;
    std::vector<double> maxima;
    for (const auto& rec : sim.trials) {
        const auto& st = rec.checkpoints.back();
        if (st.short_orbit) continue;
        ++used;
        total += static_cast<double>(st.exceedance_count);
        if (st.exceedance_count > 0) ++with;
        report.exceedances.push_back(st.exceedance_count);
        report.max_normed_sums.push_back(st.max_normed_sum);
        maxima.push_back(st.max_normed_sum);
    }
    report.mean_exceedances = used ? total / static_cast<double>(used) : 0.0;
    report.fraction_with_exceedance = used ? static_cast<double>(with) / static_cast<double>(used) : 0.0;
    report.median_max_normed_sum = median(maxima);
    return report;
}

PhilippReport philipp_experiment(const ExperimentConfig& cfg) {
    return philipp_experiment(simulate(cfg), cfg.norming);
}

}  // namespace thetaexp
