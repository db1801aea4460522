#include "thetaexp/measure.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "numeric.hpp"
#include "thetaexp/error.hpp"
#include "thetaexp/expansion.hpp"

namespace thetaexp {

namespace {

void require_point(double x, const MeasureContext& ctx, const char* what) {
    if (!(x >= 0.0 && x <= ctx.theta()))
        throw domain_error(std::string(what) + "=" + std::to_string(x) + " outside [0, theta]");
}

void require_digit(std::int64_t i, const MeasureContext& ctx) {
    if (i < ctx.m()) throw domain_error("digit " + std::to_string(i) + " is below m=" + std::to_string(ctx.m()));
}

// gamma(w_t((a, b])) for a real branch index t, with the image width
// w_t(a) - w_t(b) = (b - a)/((a + t theta)(b + t theta)) formed without cancellation.
double branch_image_mass(double t, double a, double b, const MeasureContext& ctx) {
    const double theta = ctx.theta();
    const double wa_plus = a + t * theta;
    const double wb_plus = b + t * theta;
    const double w_b = 1.0 / wb_plus;
    const double width = (b - a) / (wa_plus * wb_plus);
    return std::log1p(theta * width / (1.0 + theta * w_b)) / ctx.params.log1p_theta2;
}

}  // namespace

double density(double x, const MeasureContext& ctx) {
    require_point(x, ctx, "x");
    return ctx.C * ctx.theta() / (1.0 + ctx.theta() * x);
}

double measure_interval(double a, double b, const MeasureContext& ctx) {
    require_point(a, ctx, "a");
    require_point(b, ctx, "b");
    if (a > b) throw domain_error("measure_interval needs a <= b");
    // theta * theta is rounded; the right endpoint uses the stored 1/m instead.
    const auto scaled = [&](double x) { return x == ctx.theta() ? ctx.params.theta_squared : ctx.theta() * x; };
    const double ta = scaled(a), tb = scaled(b);
    const double v = std::log1p((tb - ta) / (1.0 + ta)) / ctx.params.log1p_theta2;
    return std::clamp(v, 0.0, 1.0);
}

double digit_mass(std::int64_t i, const MeasureContext& ctx) {
    require_digit(i, ctx);
    const double di = static_cast<double>(i);
    return std::log1p(1.0 / (di * (di + 2.0))) / ctx.params.log1p_theta2;
}

double tail_mass(std::int64_t k, const MeasureContext& ctx) {
    require_digit(k, ctx);
    return std::log1p(1.0 / static_cast<double>(k)) / ctx.params.log1p_theta2;
}

double truncated_moment(std::int64_t N, int order, const MeasureContext& ctx) {
    require_digit(N, ctx);
    if (order != 1 && order != 2) throw domain_error("truncated_moment order must be 1 or 2");
    detail::CompensatedSum sum;
    for (std::int64_t i = ctx.m(); i <= N; ++i) {
        const double di = static_cast<double>(i);
        sum.add((order == 1 ? di : di * di) * digit_mass(i, ctx));
    }
    return sum.value();
}

double quantile(double u, const MeasureContext& ctx) {
    if (!(u >= 0.0 && u <= 1.0)) throw domain_error("quantile needs u in [0, 1]");
    if (u == 1.0) return ctx.theta();
    const double x = std::expm1(u * ctx.params.log1p_theta2) / ctx.theta();
    return std::min(x, ctx.theta());
}

double cdf(double x, const MeasureContext& ctx) {
    return measure_interval(0.0, x, ctx);
}

double khinchine_constant(const MeasureContext& ctx) {
    return ctx.C;
}

PreimageMass preimage_mass(double a, double b, const MeasureContext& ctx, double term_cutoff,
                           std::int64_t switch_index) {
    require_point(a, ctx, "a");
    require_point(b, ctx, "b");
    if (a > b) throw domain_error("preimage_mass needs a <= b");
    PreimageMass out;
    if (a == b) return out;

    detail::CompensatedSum sum;
    std::int64_t i = ctx.m();
    for (;; ++i) {
        const double term = measure_interval(inverse_branch(i, b, ctx.params), inverse_branch(i, a, ctx.params), ctx);
        sum.add(term);
        ++out.explicit_terms;
        if (term < term_cutoff || i >= switch_index) break;
    }

    // Remaining branches i+1, i+2, ...: Euler-Maclaurin with the integral taken
    // in s = 1/t, where f(1/s)/s^2 is smooth down to s = 0.
    const double K = static_cast<double>(i);
    auto f = [&](double t) { return branch_image_mass(t, a, b, ctx); };
    static const detail::QuadratureRule rule = detail::gauss_legendre(20);
    const double integral = detail::integrate(rule, 0.0, 1.0 / K, [&](double s) {
        if (s == 0.0) return 0.0;
        return f(1.0 / s) / (s * s);
    });
    const double derivative = 0.5 * (f(K + 1.0) - f(K - 1.0));
    out.remainder = integral - 0.5 * f(K) - derivative / 12.0;
    sum.add(out.remainder);
    out.value = sum.value();
    return out;
}

}  // namespace thetaexp
