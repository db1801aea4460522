#include "thetaexp/io.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace thetaexp {

namespace {

std::string csv_number(double v) {
    std::ostringstream out;
    out << std::setprecision(17) << v;
    return out.str();
}

std::string csv_cell(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_float()) return csv_number(v.get<double>());
    return v.dump();
}

}  // namespace

json make_record(std::int64_t m, const std::string& formula_id) {
    json r;
    r["m"] = m;
    r["formula_id"] = formula_id;
    return r;
}

json expansion_json(const Expansion& e, unsigned decimals) {
    json r = make_record(e.m, "expansion");
    r["mode"] = e.mode.name();
    r["digits"] = e.digits;
    r["terminated"] = e.terminated;
    r["final_point_decimal"] = e.final_point_decimal(decimals);
    if (e.mode.kind == NumericKind::interval) r["certified_precision"] = e.certified_precision;
    return r;
}

json config_json(const ExperimentConfig& cfg) {
    json r;
    r["m"] = cfg.m;
    r["n"] = cfg.n;
    r["trials"] = cfg.trials;
    r["seed"] = cfg.seed;
    r["epsilons"] = cfg.epsilons;
    r["norming"] = cfg.norming.name();
    r["M"] = cfg.M;
    r["checkpoints"] = cfg.resolved_checkpoints();
    r["running_per_decade"] = cfg.running_per_decade;
    return r;
}

json classification_json(const NormingClassification& c) {
    json r;
    r["kind"] = to_string(c.kind);
    r["analytic"] = c.analytic;
    r["warnings"] = c.warnings;
    return r;
}

json summary_json(const SimulationResult& sim, const KhinchineReport& rep) {
    json r = make_record(sim.config.m, "khinchine_weak_law");
    r["config"] = config_json(sim.config);
    json targets = json::array(), estimates = json::array(), bounds = json::array();
    for (const auto& c : rep.checkpoints) {
        targets.push_back({{"n", c.n}, {"limit", c.limit}, {"corrected_target", c.corrected_target}});
        estimates.push_back({{"n", c.n},
                             {"trials", c.trials},
                             {"median_ratio", c.median_ratio},
                             {"relative_gap_corrected", c.median_ratio / c.corrected_target - 1.0},
                             {"relative_gap_limit", c.median_ratio / c.limit - 1.0},
                             {"truncated_variance", c.truncated_variance},
                             {"remainder_fraction", c.remainder_fraction}});
        bounds.push_back({{"n", c.n}, {"remainder_bound", c.remainder_bound}});
    }
    json rows = json::array();
    for (const auto& row : rep.rows)
        rows.push_back({{"n", row.n}, {"epsilon", row.epsilon}, {"exceedance_fraction", row.exceedance_fraction}});
    estimates.push_back({{"exceedance", rows}});
    r["targets"] = targets;
    r["estimates"] = estimates;
    r["bounds"] = bounds;
    return r;
}

json summary_json(const SimulationResult& sim, const DiamondVaalerReport& rep) {
    json r = make_record(sim.config.m, "diamond_vaaler_trimmed");
    r["config"] = config_json(sim.config);
    json targets = json::array(), estimates = json::array();
    for (const auto& c : rep.checkpoints) {
        targets.push_back({{"n", c.n}, {"corrected_target", c.corrected_target}});
        estimates.push_back({{"n", c.n},
                             {"median_trimmed_ratio", c.median_trimmed},
                             {"iqr_trimmed", c.iqr_trimmed},
                             {"iqr_untrimmed", c.iqr_untrimmed}});
    }
    r["targets"] = targets;
    r["estimates"] = estimates;
    r["fluctuation"] = {{"fraction_trimmed_smaller", rep.fraction_trimmed_smaller},
                        {"trimmed_le_untrimmed", rep.trimmed_le_untrimmed}};
    r["bounds"] = json::object();
    return r;
}

json summary_json(const SimulationResult& sim, const MaxDigitReport& rep) {
    json r = make_record(sim.config.m, "max_digit_negligible");
    r["config"] = config_json(sim.config);
    json estimates = json::array(), bounds = json::array();
    for (const auto& row : rep.rows) {
        estimates.push_back({{"n", row.n}, {"epsilon", row.epsilon}, {"probability", row.probability},
                             {"trials", row.trials}});
        bounds.push_back({{"n", row.n},
                          {"epsilon", row.epsilon},
                          {"bound", row.bound},
                          {"standard_error", row.standard_error},
                          {"holds", row.holds}});
    }
    r["targets"] = json::object();
    r["estimates"] = estimates;
    r["bounds"] = bounds;
    return r;
}

json summary_json(const SimulationResult& sim, const PhilippReport& rep) {
    json r = make_record(sim.config.m, "philipp_dichotomy");
    r["config"] = config_json(sim.config);
    r["norming"] = rep.norming;
    r["classification"] = classification_json(rep.classification);
    r["regular"] = rep.regular;
    json estimates = json::array();
    for (const auto& c : rep.checkpoints)
        estimates.push_back({{"n", c.n}, {"median_ratio", c.median}, {"max_ratio", c.max}});
    r["estimates"] = estimates;
    if (rep.classification.kind == Summability::divergent) {
        r["targets"] = {{"prediction", rep.prediction}, {"prediction_integral", rep.prediction_integral ? json(*rep.prediction_integral) : json(nullptr)}};
        r["divergent"] = {{"M", rep.M},
                          {"mean_exceedances", rep.mean_exceedances},
                          {"fraction_with_exceedance", rep.fraction_with_exceedance},
                          {"median_max_normed_sum", rep.median_max_normed_sum}};
    } else {
        r["targets"] = json::object();
    }
    r["bounds"] = json::object();
    return r;
}

json mixing_json(std::int64_t m, const MixingEstimate& e) {
    json r = make_record(m, "psi_mixing");
    r["lag"] = e.lag;
    r["psi_hat"] = e.psi_hat;
    r["pairs_evaluated"] = e.pairs_evaluated;
    r["method"] = to_string(e.method);
    r["argmax_i"] = e.argmax_i;
    r["argmax_j"] = e.argmax_j;
    return r;
}

json fit_json(std::int64_t m, const ExponentialFit& f) {
    json r = make_record(m, "psi_fit");
    r["K_fit"] = f.amplitude;
    r["rho_fit"] = f.rate;
    r["r_squared"] = f.r_squared;
    r["points"] = f.points;
    return r;
}

void write_trials_csv(std::ostream& out, const SimulationResult& sim, const std::string& formula_id) {
    out << kTrialCsvHeader << '\n';
    for (const auto& rec : sim.trials)
        for (const auto& st : rec.checkpoints) {
            out << sim.config.m << ',' << formula_id << ',' << rec.trial << ',' << csv_number(rec.start) << ','
                << st.n << ',' << st.S.get_str() << ',' << st.L << ',' << st.trimmed.get_str() << ','
                << (st.level ? std::to_string(*st.level) : std::string("inf")) << ',' << st.truncated_S.get_str()
                << ',' << st.remainder_R.get_str() << ',' << st.exceedance_count << ','
                << csv_number(st.max_normed_sum) << ',' << (st.short_orbit ? 1 : 0) << '\n';
        }
}

void write_running_csv(std::ostream& out, const SimulationResult& sim) {
    out << kRunningCsvHeader << '\n';
    for (const auto& rec : sim.trials) {
        for (const auto& p : rec.checkpoints.back().running) {
            const double norm = static_cast<double>(p.k) * std::log(static_cast<double>(p.k));
            out << sim.config.m << ",running_ratio," << rec.trial << ',' << p.k << ',' << csv_number(p.S / norm) << ','
                << csv_number((p.S - static_cast<double>(p.L)) / norm) << '\n';
        }
    }
}

void write_mixing_csv(std::ostream& out, std::int64_t m, const std::vector<MixingEstimate>& curve) {
    out << kMixingCsvHeader << '\n';
    for (const auto& e : curve)
        out << m << ",psi_mixing," << e.lag << ',' << csv_number(e.psi_hat) << ',' << e.pairs_evaluated << ','
            << to_string(e.method) << ',' << e.argmax_i << ',' << e.argmax_j << '\n';
}

void write_record_csv(std::ostream& out, const json& record) {
    bool first = true;
    for (auto it = record.begin(); it != record.end(); ++it) {
        out << (first ? "" : ",") << it.key();
        first = false;
    }
    out << '\n';
    first = true;
    for (auto it = record.begin(); it != record.end(); ++it) {
        std::string cell = csv_cell(it.value());
        if (cell.find_first_of(",\"\n") != std::string::npos) {
            std::string quoted = "\"";
            for (char ch : cell) quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
            cell = quoted + "\"";
        }
        out << (first ? "" : ",") << cell;
        first = false;
    }
    out << '\n';
}

}  // namespace thetaexp
