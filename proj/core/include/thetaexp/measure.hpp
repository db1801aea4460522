#pragma once

// The invariant measure gamma with density h(x) = C theta / (1 + theta x) on
// [0, theta], C = 1/log(1 + 1/m). Everything here is closed form; masses are
// formed as log1p(...)/log1p(1/m) so that full-range masses come out as 1
// exactly and large-k tails keep their relative accuracy.

#include <cstddef>
#include <cstdint>

#include "thetaexp/params.hpp"

namespace thetaexp {

struct MeasureContext {
    ThetaParams params;
    double C = 0.0;

    static MeasureContext make(std::int64_t m) {
        MeasureContext ctx;
        ctx.params = ThetaParams::make(m);
        ctx.C = 1.0 / ctx.params.log1p_theta2;
        return ctx;
    }

    double theta() const { return params.theta; }
    std::int64_t m() const { return params.m; }
};

double density(double x, const MeasureContext& ctx);
// gamma([a, b]) for 0 <= a <= b <= theta.
double measure_interval(double a, double b, const MeasureContext& ctx);
// gamma(I(i)) = log((i+1)^2/(i(i+2))) / log(1 + 1/m).
double digit_mass(std::int64_t i, const MeasureContext& ctx);
// gamma(first digit >= k) = log(1 + 1/k) / log(1 + 1/m).
double tail_mass(std::int64_t k, const MeasureContext& ctx);
// sum_{i=m}^{N} i^order gamma(I(i)), order 1 or 2, by direct summation.
double truncated_moment(std::int64_t N, int order, const MeasureContext& ctx);
// Inverse CDF: ((1+theta^2)^u - 1)/theta.
double quantile(double u, const MeasureContext& ctx);
double cdf(double x, const MeasureContext& ctx);
double khinchine_constant(const MeasureContext& ctx);

struct PreimageMass {
    double value = 0.0;          // gamma(T^{-1}(a, b])
    std::int64_t explicit_terms = 0;
    double remainder = 0.0;      // Euler-Maclaurin estimate of the unsummed branches
};

// sum_{i>=m} gamma(w_i((a, b])): branch masses are added until one drops below
// `term_cutoff` or `switch_index` is reached; any remaining branches are
// evaluated by Euler-Maclaurin on the same branch-mass function.
PreimageMass preimage_mass(double a, double b, const MeasureContext& ctx, double term_cutoff = 1e-15,
                           std::int64_t switch_index = std::int64_t{1} << 17);

}  // namespace thetaexp
