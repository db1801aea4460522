#pragma once

// Trajectory simulation of the digit process under the invariant measure and
// the limit-law experiments built on it.
//
// Every trial draws its start from gamma with its own mt19937_64 seeded by
// seed ^ trial, so results do not depend on the thread count.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <gmpxx.h>

#include "thetaexp/measure.hpp"
#include "thetaexp/params.hpp"

namespace thetaexp {

class NormingSequence {
public:
    enum class Family { n_log_n, n_log_n_pow, n_pow, table };

    static NormingSequence n_log_n() { return {Family::n_log_n, 1.0, {}}; }
    static NormingSequence n_log_n_pow(double p) { return {Family::n_log_n_pow, p, {}}; }
    static NormingSequence n_pow(double p) { return {Family::n_pow, p, {}}; }
    // table[k-1] = a(k); a(k) beyond the table is undefined.
    static NormingSequence from_table(std::vector<double> values);
    // "n_log_n", "n_log_n_pow:2", "n_pow:1.5"
    static NormingSequence parse(const std::string& text);

    Family family() const { return family_; }
    double parameter() const { return p_; }
    const std::vector<double>& table() const { return table_; }
    std::string name() const;
    // a(n); zero or negative values (a(1) = 1 log 1 = 0) are skipped by the experiments.
    double operator()(std::uint64_t n) const;
    // a(n)/n non-decreasing over the checked range.
    bool is_regular(std::uint64_t up_to = 1000000) const;

private:
    NormingSequence(Family f, double p, std::vector<double> t) : family_(f), p_(p), table_(std::move(t)) {}

    Family family_;
    double p_;
    std::vector<double> table_;
};

enum class Summability { convergent, divergent };
std::string to_string(Summability s);

struct NormingClassification {
    Summability kind = Summability::divergent;
    bool analytic = true;  // false: table input, partial-sum heuristic
    std::vector<std::string> warnings;
};

NormingClassification norming_classify(const NormingSequence& a);

// floor(n log n), the truncation level used for the weak law.
std::uint64_t truncation_level_n_log_n(std::uint64_t n);

// x in (0, theta] distributed by gamma: quantile of u = (rng() >> 11) 2^-53, u = 0 rejected.
double sample_gamma(std::mt19937_64& rng, const MeasureContext& ctx);

struct RunningPoint {
    std::uint64_t k = 0;
    double S = 0.0;  // S_k (rounded)
    std::int64_t L = 0;
};

struct TrajectoryStats {
    std::uint64_t n = 0;  // steps completed
    mpz_class S;          // sum of digits
    std::int64_t L = 0;   // largest digit
    mpz_class trimmed;    // S - L
    std::optional<std::uint64_t> level;  // truncation level; empty means infinite
    mpz_class truncated_S;               // sum of digits <= level
    mpz_class remainder_R;               // S - truncated_S
    std::uint64_t exceedance_count = 0;  // #{k : a(k) > 0, digit_k >= M a(k)}
    double max_normed_sum = 0.0;         // max_k S_k / a(k) over a(k) > 0
    std::vector<RunningPoint> running;
    bool short_orbit = false;  // orbit terminated (or left 64-bit digit range) before n
};

enum class TruncationRule { none, fixed, n_log_n };

struct TrajectoryOptions {
    TruncationRule truncation = TruncationRule::n_log_n;
    std::uint64_t fixed_level = 0;
    // Per-step exceedances and running max of S_k/a(k).
    std::optional<NormingSequence> norming;
    double M = 1.0;
    // Log-spaced running points per decade (0 disables).
    unsigned running_per_decade = 0;
};

// Statistics at horizon n.
TrajectoryStats run_trajectory(double start, std::uint64_t n, const MeasureContext& ctx,
                               const TrajectoryOptions& options = {});

// One orbit, snapshots at each checkpoint (increasing). Running points and the
// per-step norming statistics accumulate across the whole orbit.
std::vector<TrajectoryStats> run_trajectory_checkpoints(double start, const std::vector<std::uint64_t>& checkpoints,
                                                        const MeasureContext& ctx,
                                                        const TrajectoryOptions& options = {});

// Digits of one trajectory (for frequency checks).
std::vector<std::int64_t> trajectory_digits(double start, std::uint64_t n, const MeasureContext& ctx);

struct ExperimentConfig {
    std::int64_t m = 2;
    std::uint64_t n = 1000000;  // horizon; checkpoints above n are dropped and n is appended
    std::size_t trials = 200;
    std::uint64_t seed = 1;
    std::vector<double> epsilons{0.5, 1.0, 2.0};
    NormingSequence norming = NormingSequence::n_log_n();
    double M = 1.0;
    std::vector<std::uint64_t> checkpoints{1000, 10000, 100000, 1000000};
    unsigned running_per_decade = 50;
    unsigned threads = 0;  // 0 = default thread count

    // Checks and normalizes; throws config_error.
    void validate();
    std::vector<std::uint64_t> resolved_checkpoints() const;
};

struct TrialRecord {
    std::size_t trial = 0;
    double start = 0.0;
    std::vector<TrajectoryStats> checkpoints;  // one per resolved checkpoint
};

struct SimulationResult {
    ExperimentConfig config;
    std::vector<std::uint64_t> checkpoints;
    std::vector<TrialRecord> trials;  // ordered by trial index
};

SimulationResult simulate(ExperimentConfig cfg);

// ---- summaries --------------------------------------------------------------------

struct KhinchineRow {
    std::uint64_t n = 0;
    double epsilon = 0.0;
    double exceedance_fraction = 0.0;
    std::size_t trials = 0;
};

struct KhinchineCheckpoint {
    std::uint64_t n = 0;
    std::size_t trials = 0;
    double median_ratio = 0.0;      // median S_n/(n log n)
    double corrected_target = 0.0;  // C (log n + log log n)/log n
    double limit = 0.0;             // C
    double truncated_variance = 0.0;  // across-trial variance of truncated_S/(n log n)
    double remainder_fraction = 0.0;  // fraction of trials with remainder_R > 0
    double remainder_bound = 0.0;     // C/log n + 3 binomial SE
};

struct KhinchineReport {
    std::vector<KhinchineRow> rows;
    std::vector<KhinchineCheckpoint> checkpoints;
};

KhinchineReport khinchine_experiment(const SimulationResult& sim);
KhinchineReport khinchine_experiment(const ExperimentConfig& cfg);

struct TrimmedCheckpoint {
    std::uint64_t n = 0;
    double median_trimmed = 0.0;
    double iqr_trimmed = 0.0;
    double iqr_untrimmed = 0.0;
    double corrected_target = 0.0;
};

struct TrialFluctuation {
    std::size_t trial = 0;
    double trimmed = 0.0;    // max over the last decade of |ratio - median| (trimmed series)
    double untrimmed = 0.0;  // same for the untrimmed series
};

struct DiamondVaalerReport {
    std::vector<TrimmedCheckpoint> checkpoints;
    std::vector<TrialFluctuation> fluctuations;
    double fraction_trimmed_smaller = 0.0;
    bool trimmed_le_untrimmed = true;  // pathwise at every recorded point
};

DiamondVaalerReport diamond_vaaler_experiment(const SimulationResult& sim);
DiamondVaalerReport diamond_vaaler_experiment(const ExperimentConfig& cfg);

struct MaxDigitRow {
    std::uint64_t n = 0;
    double epsilon = 0.0;
    double probability = 0.0;  // empirical P(L_n > eps n log n)
    double bound = 0.0;        // C/(eps log n)
    double standard_error = 0.0;
    bool holds = false;        // probability <= bound + 3 SE
    std::size_t trials = 0;
};

struct MaxDigitReport {
    std::vector<MaxDigitRow> rows;
};

MaxDigitReport max_digit_experiment(const SimulationResult& sim);
MaxDigitReport max_digit_experiment(const ExperimentConfig& cfg);

struct PhilippCheckpoint {
    std::uint64_t n = 0;
    double median = 0.0;  // median S_n/a(n)
    double max = 0.0;
};

struct PhilippReport {
    std::string norming;
    NormingClassification classification;
    bool regular = true;
    std::vector<PhilippCheckpoint> checkpoints;  // both branches
    // divergent branch
    double M = 1.0;
    double mean_exceedances = 0.0;
    double prediction = 0.0;           // sum_{k <= n, a(k) > 0} C/(M a(k))
    std::optional<double> prediction_integral;  // integral of C/(M a(t)) over [2, n]; absent for tables
    double fraction_with_exceedance = 0.0;
    double median_max_normed_sum = 0.0;
    std::vector<std::uint64_t> exceedances;  // per trial
    std::vector<double> max_normed_sums;     // per trial
};

// The divergent branch needs the per-step statistics of the simulation's own
// norming; a different divergent norming raises config_error.
PhilippReport philipp_experiment(const SimulationResult& sim, const NormingSequence& norming);
PhilippReport philipp_experiment(const ExperimentConfig& cfg);

double median(std::vector<double> values);
// Type-7 quantile of a sample, q in [0, 1].
double sample_quantile(std::vector<double> values, double q);

}  // namespace thetaexp
