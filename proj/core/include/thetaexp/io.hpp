#pragma once

// JSON records and CSV tables. Every record carries {m, formula_id}.

#include <iosfwd>
#include <string>

#include <nlohmann/json.hpp>

#include "thetaexp/expansion.hpp"
#include "thetaexp/montecarlo.hpp"
#include "thetaexp/transfer.hpp"

namespace thetaexp {

using json = nlohmann::ordered_json;

json make_record(std::int64_t m, const std::string& formula_id);

// {m, formula_id, mode, digits, terminated, final_point_decimal}
json expansion_json(const Expansion& e, unsigned decimals = 20);

json config_json(const ExperimentConfig& cfg);
json classification_json(const NormingClassification& c);

// {m, formula_id, config, targets, estimates, bounds}
json summary_json(const SimulationResult& sim, const KhinchineReport& r);
json summary_json(const SimulationResult& sim, const DiamondVaalerReport& r);
json summary_json(const SimulationResult& sim, const MaxDigitReport& r);
json summary_json(const SimulationResult& sim, const PhilippReport& r);

json mixing_json(std::int64_t m, const MixingEstimate& e);
json fit_json(std::int64_t m, const ExponentialFit& f);

// One row per trial x checkpoint.
inline constexpr const char* kTrialCsvHeader =
    "m,formula_id,trial,start,n,S_n,L_n,trimmed,level,truncated_S,remainder_R,exceedance_count,max_normed_sum,"
    "short_orbit";
void write_trials_csv(std::ostream& out, const SimulationResult& sim, const std::string& formula_id);

// One row per trial x running point.
inline constexpr const char* kRunningCsvHeader = "m,formula_id,trial,k,untrimmed_ratio,trimmed_ratio";
void write_running_csv(std::ostream& out, const SimulationResult& sim);

inline constexpr const char* kMixingCsvHeader = "m,formula_id,lag,psi_hat,pairs_evaluated,method,argmax_i,argmax_j";
void write_mixing_csv(std::ostream& out, std::int64_t m, const std::vector<MixingEstimate>& curve);

// Flat key/value records as a two-line CSV (header, values).
void write_record_csv(std::ostream& out, const json& record);

}  // namespace thetaexp
