#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "generators.hpp"
#include "thetaexp/error.hpp"
#include "thetaexp/expansion.hpp"
#include "thetaexp/measure.hpp"

using namespace thetaexp;

namespace {

const MeasureContext c2 = MeasureContext::make(2);

double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
               double whole, double tol, int depth) {
    const double m = 0.5 * (a + b), lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6 * (fa + 4 * flm + fm), right = (b - m) / 6 * (fm + 4 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15 * tol) return left + right + (left + right - whole) / 15;
    return simpson(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
           simpson(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

double adaptive(const std::function<double(double)>& f, double a, double b, double tol = 1e-14) {
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    return simpson(f, a, b, fa, fm, fb, (b - a) / 6 * (fa + 4 * fm + fb), tol, 50);
}

}  // namespace

TEST(Measure, Density) {
    EXPECT_NEAR(density(0.0, c2), 1.7439399027102360, 1e-15);
    EXPECT_NEAR(density(c2.theta(), c2), 1.1626266018068240, 1e-15);
    EXPECT_THROW(density(-0.01, c2), domain_error);
    EXPECT_THROW(density(0.8, c2), domain_error);
}

TEST(Measure, Interval) {
    EXPECT_EQ(measure_interval(0.0, c2.theta(), c2), 1.0);
    EXPECT_NEAR(measure_interval(0.0, c2.theta() / 2, c2), 0.5503397132132085, 1e-15);
    EXPECT_NEAR(measure_interval(0.0, c2.theta() / 2, c2), tail_mass(4, c2), 1e-15);
    EXPECT_EQ(measure_interval(0.3, 0.3, c2), 0.0);
    EXPECT_THROW(measure_interval(0.4, 0.3, c2), domain_error);
    EXPECT_THROW(measure_interval(-0.1, 0.3, c2), domain_error);
}

TEST(Measure, DigitMass) {
    EXPECT_NEAR(digit_mass(2, c2), 0.2904887086485452, 1e-15);
    EXPECT_NEAR(digit_mass(3, c2), 0.1591715781382463, 1e-15);
    EXPECT_THROW(digit_mass(1, c2), domain_error);
}

TEST(Measure, TailMass) {
    EXPECT_EQ(tail_mass(2, c2), 1.0);
    EXPECT_NEAR(tail_mass(3, c2), 0.7095112913514548, 1e-15);
    EXPECT_NEAR(tail_mass(1000000, c2) / (c2.C * 1e-6), 1.0, 1e-6);
    EXPECT_NEAR(tail_mass(1000000, c2), 2.466302229225523e-06, 1e-20);
    EXPECT_THROW(tail_mass(1, c2), domain_error);
}

TEST(Measure, TruncatedMoment) {
    EXPECT_NEAR(truncated_moment(2, 1, c2), 0.5809774172970904, 1e-15);
    EXPECT_NEAR(truncated_moment(3, 1, c2), 1.0584921517118294, 1e-14);
    EXPECT_NEAR(truncated_moment(10000, 1, c2), 19.540296101339470, 1e-10);
    EXPECT_NEAR(truncated_moment(10000, 1, c2) / (c2.C * std::log(1e4)), 1.0, 0.15);
    EXPECT_NEAR(truncated_moment(100, 2, c2), 227.19485202445873, 1e-9);
    EXPECT_THROW(truncated_moment(1, 1, c2), domain_error);
    EXPECT_THROW(truncated_moment(5, 3, c2), domain_error);
}

TEST(Measure, Quantile) {
    EXPECT_EQ(quantile(0.0, c2), 0.0);
    EXPECT_NEAR(quantile(1.0, c2), c2.theta(), 1e-16);
    EXPECT_NEAR(quantile(0.5, c2), 0.3178372451957822, 1e-15);
    EXPECT_THROW(quantile(1.5, c2), domain_error);
    EXPECT_THROW(quantile(-0.1, c2), domain_error);
}

TEST(Measure, KhinchineConstant) {
    EXPECT_NEAR(khinchine_constant(c2), 2.4663034623764317, 1e-15);
    EXPECT_NEAR(khinchine_constant(MeasureContext::make(3)), 3.4760594967822069, 1e-15);
}

TEST(MeasureProperty, ClosedFormsMatchQuadrature) {
    for (std::int64_t m : {2, 3, 5}) {
        const auto ctx = MeasureContext::make(m);
        const auto h = [&](double x) { return density(x, ctx); };
        for (std::int64_t i = m; i <= 1000; i += (i < 30 ? 1 : 37)) {
            const auto cyl = cylinder(i, ctx.params);
            ASSERT_NEAR(digit_mass(i, ctx), adaptive(h, cyl.lo, cyl.hi), 1e-10) << i;
            ASSERT_NEAR(tail_mass(i, ctx), adaptive(h, 0.0, cyl.hi), 1e-10) << i;
        }
    }
}

TEST(MeasureProperty, QuantileInvertsCdf) {
    gen::Gen g(31);
    for (int t = 0; t < 5000; ++t) {
        const auto ctx = MeasureContext::make(g.non_square(2, 30));
        const double u = g.uniform(0.0, 1.0);
        ASSERT_NEAR(cdf(quantile(u, ctx), ctx), u, 1e-14);
    }
}

TEST(MeasureProperty, PushforwardInvariance) {
    gen::Gen g(32);
    for (std::int64_t m : {2, 3, 5}) {
        const auto ctx = MeasureContext::make(m);
        for (int t = 0; t < 30; ++t) {
            double a = g.uniform(0.0, ctx.theta()), b = g.uniform(0.0, ctx.theta());
            if (a > b) std::swap(a, b);
            ASSERT_NEAR(preimage_mass(a, b, ctx).value, measure_interval(a, b, ctx), 1e-9);
        }
    }
}

TEST(MeasureProperty, MeanDivergesLikeLog) {
    double prev = 0.0;
    for (std::int64_t N : {10, 100, 1000, 10000, 100000}) {
        const double v = truncated_moment(N, 1, c2);
        EXPECT_GT(v, prev);
        prev = v;
    }
    const double r5 = truncated_moment(100000, 1, c2) / std::log(1e5);
    const double r4 = truncated_moment(10000, 1, c2) / std::log(1e4);
    EXPECT_LT(std::abs(r5 - c2.C), std::abs(r4 - c2.C));
}

TEST(MeasureProperty, TailAsymptotic) {
    for (std::int64_t m : {2, 3, 5}) {
        const auto ctx = MeasureContext::make(m);
        for (std::int64_t k = m; k <= 1000000; k = k < 100 ? k + 1 : k * 3 / 2) {
            const double r = static_cast<double>(k) * tail_mass(k, ctx) / ctx.C;
            ASSERT_LE(r, 1.0 + 1e-15) << k;
            ASSERT_GE(r, 1.0 - 2.0 / static_cast<double>(k)) << k;
        }
    }
}
