#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "generators.hpp"
#include "thetaexp/error.hpp"
#include "thetaexp/montecarlo.hpp"

using namespace thetaexp;

namespace {

const MeasureContext c2 = MeasureContext::make(2);

ExperimentConfig small_config(std::uint64_t seed = 7) {
    ExperimentConfig cfg;
    cfg.n = 20000;
    cfg.trials = 24;
    cfg.seed = seed;
    cfg.checkpoints = {1000, 5000, 20000};
    cfg.running_per_decade = 10;
    return cfg;
}

}  // namespace

TEST(MonteCarlo, TrajectoryExample) {
    TrajectoryOptions opt;
    opt.truncation = TruncationRule::none;
    const auto s = run_trajectory(0.5, 3, c2, opt);
    EXPECT_EQ(s.n, 3u);
    EXPECT_EQ(s.S, 8);
    EXPECT_EQ(s.L, 4);
    EXPECT_EQ(s.trimmed, 4);
    EXPECT_FALSE(s.level.has_value());
    EXPECT_EQ(s.truncated_S, s.S);
    EXPECT_EQ(s.remainder_R, 0);
}

TEST(MonteCarlo, ShortOrbitFlagged) {
    // The first digit of 1e-300 does not fit in 64 bits.
    const auto s = run_trajectory(1e-300, 10, c2);
    EXPECT_TRUE(s.short_orbit);
    EXPECT_LT(s.n, 10u);
}

TEST(MonteCarlo, FixedTruncation) {
    TrajectoryOptions opt;
    opt.truncation = TruncationRule::fixed;
    opt.fixed_level = 3;
    const auto s = run_trajectory(0.5, 3, c2, opt);
    EXPECT_EQ(s.truncated_S, 4);
    EXPECT_EQ(s.remainder_R, 4);
}

TEST(MonteCarlo, TruncationLevel) {
    EXPECT_EQ(truncation_level_n_log_n(1000), 6907u);
    EXPECT_EQ(truncation_level_n_log_n(1000000), 13815510u);
}

TEST(MonteCarlo, NormingClassification) {
    EXPECT_EQ(norming_classify(NormingSequence::n_log_n()).kind, Summability::divergent);
    EXPECT_EQ(norming_classify(NormingSequence::n_log_n_pow(2)).kind, Summability::convergent);
    EXPECT_EQ(norming_classify(NormingSequence::n_pow(1)).kind, Summability::divergent);
    EXPECT_EQ(norming_classify(NormingSequence::n_pow(1.5)).kind, Summability::convergent);
    EXPECT_EQ(NormingSequence::parse("n_log_n_pow:2").name(), "n_log_n_pow:2");
    EXPECT_THROW(NormingSequence::parse("n_exp"), config_error);

    std::vector<double> table;
    for (int k = 1; k <= 5000; ++k) table.push_back(std::pow(k, 2.0));
    const auto c = norming_classify(NormingSequence::from_table(table));
    EXPECT_EQ(c.kind, Summability::convergent);
    EXPECT_FALSE(c.analytic);
    EXPECT_FALSE(c.warnings.empty());
}

TEST(MonteCarlo, IrregularNormingWarns) {
    std::vector<double> table;
    for (int k = 1; k <= 2000; ++k) table.push_back(k % 2 ? 2.0 * k : 0.5 * k);
    const auto seq = NormingSequence::from_table(table);
    EXPECT_FALSE(seq.is_regular(2000));
    const auto c = norming_classify(seq);
    const bool mentions = std::any_of(c.warnings.begin(), c.warnings.end(),
                                      [](const std::string& w) { return w.find("non-decreasing") != std::string::npos; });
    EXPECT_TRUE(mentions);
}

TEST(MonteCarlo, ConfigValidation) {
    auto cfg = small_config();
    cfg.trials = 0;
    EXPECT_THROW(cfg.validate(), config_error);
    cfg = small_config();
    cfg.checkpoints = {5000, 1000};
    EXPECT_THROW(cfg.validate(), config_error);
    cfg = small_config();
    cfg.checkpoints = {1000, 100000};
    cfg.n = 20000;
    EXPECT_EQ(cfg.resolved_checkpoints(), (std::vector<std::uint64_t>{1000, 20000}));
}

TEST(MonteCarlo, SampleGammaMatchesCdf) {
    std::mt19937_64 rng(2024);
    const std::size_t n = 100000;
    std::vector<double> xs(n);
    double mean = 0.0;
    for (auto& x : xs) {
        x = sample_gamma(rng, c2);
        ASSERT_GT(x, 0.0);
        ASSERT_LE(x, c2.theta());
        mean += x;
    }
    mean /= n;
    std::sort(xs.begin(), xs.end());
    double ks = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double F = cdf(xs[k], c2);
        ks = std::max({ks, std::abs(F - static_cast<double>(k) / n), std::abs(F - static_cast<double>(k + 1) / n)});
    }
    EXPECT_LT(ks, 0.006);
    EXPECT_NEAR(mean, 0.32972634033714098, 3e-3);
}

TEST(MonteCarlo, ExperimentSummaries) {
    const auto sim = simulate(small_config());
    const auto k = khinchine_experiment(sim);
    ASSERT_EQ(k.checkpoints.size(), 3u);
    for (const auto& c : k.checkpoints) {
        EXPECT_NEAR(c.corrected_target, c2.C * (std::log(double(c.n)) + std::log(std::log(double(c.n)))) /
                                            std::log(double(c.n)), 1e-12);
        EXPECT_LE(c.remainder_fraction, c.remainder_bound);
    }
    ExperimentConfig huge = small_config();
    huge.epsilons = {1e12};
    for (const auto& r : khinchine_experiment(simulate(huge)).rows) EXPECT_EQ(r.exceedance_fraction, 0.0);
    for (const auto& r : max_digit_experiment(simulate(huge)).rows) EXPECT_EQ(r.probability, 0.0);

    const auto dv = diamond_vaaler_experiment(sim);
    EXPECT_TRUE(dv.trimmed_le_untrimmed);
    EXPECT_EQ(dv.fluctuations.size(), sim.trials.size());

    for (const auto& r : max_digit_experiment(sim).rows) {
        EXPECT_NEAR(r.bound, c2.C / (r.epsilon * std::log(double(r.n))), 1e-12);
        EXPECT_TRUE(r.holds);
    }

    const auto ph = philipp_experiment(sim, NormingSequence::n_log_n());
    EXPECT_EQ(ph.classification.kind, Summability::divergent);
    EXPECT_GT(ph.prediction, 0.0);
    EXPECT_EQ(ph.exceedances.size(), sim.trials.size());
    const auto conv = philipp_experiment(sim, NormingSequence::n_log_n_pow(2));
    EXPECT_EQ(conv.classification.kind, Summability::convergent);
    EXPECT_THROW(philipp_experiment(sim, NormingSequence::n_pow(1)), config_error);
}

TEST(MonteCarlo, QuantileHelpers) {
    EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
    EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
    EXPECT_NEAR(sample_quantile({1.0, 2.0, 3.0, 4.0, 5.0}, 0.25), 2.0, 1e-15);
    EXPECT_NEAR(sample_quantile({1.0, 2.0, 3.0, 4.0}, 0.75), 3.25, 1e-15);
}

TEST(MonteCarloProperty, TrajectoryInvariants) {
    gen::Gen g(51);
    for (int t = 0; t < 60; ++t) {
        const auto ctx = MeasureContext::make(g.non_square(2, 12));
        std::mt19937_64 rng(g.integer(0, 1 << 30));
        const double start = sample_gamma(rng, ctx);
        TrajectoryOptions opt;
        opt.norming = NormingSequence::n_log_n();
        const auto n = static_cast<std::uint64_t>(g.integer(1, 20000));
        const auto s = run_trajectory(start, n, ctx, opt);
        if (s.short_orbit) continue;
        ASSERT_GE(s.S, mpz_class(static_cast<unsigned long>(n * ctx.m())));
        ASSERT_GE(s.L, ctx.m());
        ASSERT_EQ(s.trimmed, s.S - s.L);
        ASSERT_GE(s.trimmed, mpz_class(static_cast<unsigned long>((n - 1) * ctx.m())));
        ASSERT_EQ(s.truncated_S + s.remainder_R, s.S);
    }
}

TEST(MonteCarloProperty, DigitFrequencies) {
    std::mt19937_64 rng(99);
    const auto digits = trajectory_digits(sample_gamma(rng, c2), 1000000, c2);
    ASSERT_EQ(digits.size(), 1000000u);
    std::vector<double> count(11, 0.0);
    for (auto d : digits)
        if (d <= 10) count[d] += 1.0;
    for (int i = 2; i <= 10; ++i) EXPECT_NEAR(count[i] / 1e6, digit_mass(i, c2), 5e-3) << i;
}

TEST(MonteCarloProperty, DeterministicAcrossThreads) {
    auto a = small_config(123), b = small_config(123);
    a.threads = 1;
    b.threads = 4;
    const auto sa = simulate(a), sb = simulate(b);
    ASSERT_EQ(sa.trials.size(), sb.trials.size());
    for (std::size_t t = 0; t < sa.trials.size(); ++t) {
        ASSERT_EQ(sa.trials[t].start, sb.trials[t].start);
        for (std::size_t c = 0; c < sa.trials[t].checkpoints.size(); ++c) {
            ASSERT_EQ(sa.trials[t].checkpoints[c].S, sb.trials[t].checkpoints[c].S);
            ASSERT_EQ(sa.trials[t].checkpoints[c].exceedance_count, sb.trials[t].checkpoints[c].exceedance_count);
        }
    }
}

TEST(MonteCarloProperty, AccountingEveryTrial) {
    const auto sim = simulate(small_config(5));
    for (const auto& rec : sim.trials)
        for (const auto& st : rec.checkpoints) ASSERT_EQ(st.truncated_S + st.remainder_R, st.S);
}
