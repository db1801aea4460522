// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "thetaexp/expansion.hpp"
#include "thetaexp/measure.hpp"
#include "thetaexp/montecarlo.hpp"
#include "thetaexp/transfer.hpp"

using namespace thetaexp;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                        double whole, double tol, int depth) {
    const double m = 0.5 * (a + b), flm = f(0.5 * (a + m)), frm = f(0.5 * (m + b));
    const double left = (m - a) / 6 * (fa + 4 * flm + fm), right = (b - m) / 6 * (fm + 4 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15 * tol) return left + right + (left + right - whole) / 15;
    return adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b) {
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    return adaptive_simpson(f, a, b, fa, fm, fb, (b - a) / 6 * (fa + 4 * fm + fb), 1e-14, 50);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

Outcome tail_law() {
    double worst_closed = 0.0, worst_quad = 0.0;
    bool full = true;
    for (std::int64_t m : {2, 3, 5}) {
        const auto ctx = MeasureContext::make(m);
        full = full && tail_mass(m, ctx) == 1.0;
        const auto h = [&](double x) { return density(x, ctx); };
        for (std::int64_t k = m; k <= 1000; ++k) {
            const double t = tail_mass(k, ctx);
            worst_closed = std::max(worst_closed, std::abs(t - ctx.C * std::log(1.0 + 1.0 / static_cast<double>(k))));
            worst_quad = std::max(worst_quad, std::abs(t - integrate(h, 0.0, cylinder(k, ctx.params).hi)));
        }
    }
    return {full && worst_closed < 1e-12 && worst_quad < 1e-10,
            "max|tail - C log(1+1/k)| = " + fmt(worst_closed) + ", max|tail - quadrature| = " + fmt(worst_quad) +
                ", tail(m) == 1: " + (full ? "yes" : "no")};
}

Outcome fixed_point() {
    double worst = 0.0;
    for (std::int64_t m : {2, 3, 5}) {
        const auto ctx = MeasureContext::make(m);
        const auto h = Observable::invariant_density(ctx);
        for (int g = 0; g <= 1000; ++g) {
            const double x = ctx.theta() * g / 1000.0;
            worst = std::max(worst, std::abs(transfer_apply(h, x, 1000, ctx).value - density(x, ctx)));
        }
    }
    return {worst < 1e-10, "sup residual = " + fmt(worst)};
}

Outcome pushforward() {
    const auto ctx = MeasureContext::make(2);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, ctx.theta());
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        double a = u(rng), b = u(rng);
        if (a > b) std::swap(a, b);
        worst = std::max(worst, std::abs(preimage_mass(a, b, ctx, 1e-15).value - measure_interval(a, b, ctx)));
    }
    return {worst < 1e-9, "max error over 100 intervals = " + fmt(worst)};
}

Outcome ulam_recovery() {
    const auto ctx = MeasureContext::make(2);
    std::vector<double> l1;
    std::string detail = "L1:";
    for (std::size_t cells = 256; cells <= 4096; cells *= 2) {
        const auto P = build_ulam(cells, ctx);
        l1.push_back(l1_distance_to_invariant(stationary_density(P, ctx), ctx));
        detail += " " + std::to_string(cells) + "->" + fmt(l1.back());
    }
    bool decreasing = true;
    for (std::size_t k = 1; k < l1.size(); ++k) decreasing = decreasing && l1[k] < l1[k - 1];
    return {decreasing && l1.back() < 1e-2, detail};
}

Outcome mixing() {
    const auto ctx = MeasureContext::make(2);
    const auto curve = psi_curve(12, 50, ctx);
    const auto fit = fit_psi(curve, 1, 12);
    const double closed =
        std::abs(ctx.C * std::log(33.0 / 32.0) / (digit_mass(2, ctx) * digit_mass(2, ctx)) - 1.0);
    const double pair = psi_estimate(1, 2, ctx).psi_hat;
    const bool ok = fit.rate < 1.0 && fit.r_squared >= 0.95 && std::abs(pair - closed) < 1e-4;
    return {ok, "rho_fit = " + fmt(fit.rate) + ", R^2 = " + fmt(fit.r_squared) + ", psi(1) pair (2,2) = " +
                    fmt(pair) + " vs closed form " + fmt(closed)};
}

Outcome digit_frequencies() {
    const auto ctx = MeasureContext::make(2);
    std::mt19937_64 rng(20240601);
    const auto digits = trajectory_digits(sample_gamma(rng, ctx), 1000000, ctx);
    std::vector<double> count(11, 0.0);
    for (auto d : digits)
        if (d <= 10) count[static_cast<std::size_t>(d)] += 1.0;
    double worst = 0.0;
    for (int i = 2; i <= 10; ++i)
        worst = std::max(worst, std::abs(count[i] / static_cast<double>(digits.size()) - digit_mass(i, ctx)));
    return {digits.size() == 1000000 && worst < 5e-3, "max |freq - mass| over digits 2..10 = " + fmt(worst)};
}

const SimulationResult& shared_simulation() {
    static const SimulationResult sim = [] {
        ExperimentConfig cfg;
        cfg.m = 2;
        cfg.n = 1000000;
        cfg.trials = 200;
        cfg.seed = 20240601;
        cfg.checkpoints = {1000, 10000, 100000, 1000000};
        cfg.norming = NormingSequence::n_log_n();
        cfg.M = 1.0;
        return simulate(cfg);
    }();
    return sim;
}

Outcome weak_law() {
    const auto rep = khinchine_experiment(shared_simulation());
    std::vector<double> exceed;
    for (const auto& r : rep.rows)
        if (r.epsilon == 0.5) exceed.push_back(r.exceedance_fraction);
    bool monotone = true;
    for (std::size_t k = 1; k < exceed.size(); ++k) monotone = monotone && exceed[k] <= exceed[k - 1];
    const auto& last = rep.checkpoints.back();
    const double gap = last.median_ratio / last.corrected_target - 1.0;
    std::string seq;
    for (double e : exceed) seq += (seq.empty() ? "" : ",") + fmt(e);
    return {monotone && std::abs(gap) < 0.10, "exceedance(eps=0.5) = [" + seq + "], median at 1e6 = " +
                                                   fmt(last.median_ratio) + " vs corrected " +
                                                   fmt(last.corrected_target) + " (" + fmt(100 * gap) + "%)"};
}

Outcome trimmed_law() {
    const auto rep = diamond_vaaler_experiment(shared_simulation());
    double iqr4 = 0.0, iqr6 = 0.0;
    for (const auto& c : rep.checkpoints) {
        if (c.n == 10000) iqr4 = c.iqr_trimmed;
        if (c.n == 1000000) iqr6 = c.iqr_trimmed;
    }
    return {iqr6 < iqr4 && rep.fraction_trimmed_smaller >= 0.80,
            "IQR trimmed 1e4 = " + fmt(iqr4) + ", 1e6 = " + fmt(iqr6) +
                ", trimmed fluctuation smaller in " + fmt(100 * rep.fraction_trimmed_smaller) + "% of trials"};
}

Outcome max_digit() {
    const auto rep = max_digit_experiment(shared_simulation());
    bool all = true;
    double worst = -1.0;
    for (const auto& r : rep.rows) {
        all = all && r.holds;
        worst = std::max(worst, r.probability - (r.bound + 3 * r.standard_error));
    }
    return {all, std::to_string(rep.rows.size()) + " (n, eps) cells, max(P - bound - 3SE) = " + fmt(worst)};
}

Outcome philipp() {
    const auto& sim = shared_simulation();
    const auto conv = philipp_experiment(sim, NormingSequence::n_log_n_pow(2));
    bool decreasing = true;
    for (std::size_t k = 1; k < conv.checkpoints.size(); ++k)
        decreasing = decreasing && conv.checkpoints[k].median < conv.checkpoints[k - 1].median;
    const double final_median = conv.checkpoints.back().median;

    const auto div = philipp_experiment(sim, NormingSequence::n_log_n());
    const double ratio = div.mean_exceedances / div.prediction;
    const bool conv_ok = conv.classification.kind == Summability::convergent && decreasing && final_median < 0.6;
    const bool div_ok = div.classification.kind == Summability::divergent && ratio >= 1.0 / 3 && ratio <= 3.0 &&
                        div.fraction_with_exceedance >= 0.95;
    return {conv_ok && div_ok, "convergent median S_n/a(n) at 1e6 = " + fmt(final_median) +
                                   (decreasing ? " (decreasing)" : " (not decreasing)") + "; divergent mean " +
                                   fmt(div.mean_exceedances) + " vs prediction " + fmt(div.prediction) +
                                   ", with exceedance " + fmt(100 * div.fraction_with_exceedance) + "%"};
}

Outcome exact_double_agreement() {
    const auto p = ThetaParams::make(2);
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<long> num(-60, 60), den(1, 60);
    std::vector<std::size_t> first;
    while (first.size() < 20) {
        const QuadNumber x{mpq_class(num(rng), den(rng)), mpq_class(num(rng), den(rng)), 2};
        if (x.is_rational()) continue;
        const double v = x.to_double();
        if (!(v > 1e-3 && v < p.theta - 1e-3)) continue;
        const auto ex = expand(x, 40, p);
        if (ex.terminated) continue;
        const auto db = expand(v, 40, p);
        std::size_t k = 0;
        while (k < ex.digits.size() && k < db.digits.size() && ex.digits[k] == db.digits[k]) ++k;
        first.push_back(k + 1);  // 1-based index of the first disagreement
    }
    const std::size_t worst = *std::min_element(first.begin(), first.end());
    std::string list;
    for (auto f : first) list += (list.empty() ? "" : ",") + std::to_string(f);
    return {worst > 25, "first divergence indices = [" + list + "], minimum " + std::to_string(worst)};
}

}  // namespace

int main() {
    const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
        {1, tail_law},        {2, fixed_point},        {3, pushforward}, {4, ulam_recovery},
        {5, mixing},          {6, digit_frequencies},  {7, weak_law},    {8, trimmed_law},
        {9, max_digit},       {10, philipp},           {11, exact_double_agreement}};
    int failures = 0;
    for (const auto& [id, check] : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (!o.pass) ++failures;
        std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << "  ["
                  << fmt(secs) << " s]" << std::endl;
    }
    std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria pass" << std::endl;
    return failures == 0 ? 0 : 1;
}
