#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "generators.hpp"
#include "thetaexp/error.hpp"
#include "thetaexp/expansion.hpp"
#include "thetaexp/transfer.hpp"

using namespace thetaexp;

namespace {

const MeasureContext c2 = MeasureContext::make(2);

const UlamOperator& ulam4096() {
    static const UlamOperator P = build_ulam(4096, c2);
    return P;
}

const StationaryDensity& pi4096() {
    static const StationaryDensity d = stationary_density(ulam4096(), c2);
    return d;
}

}  // namespace

TEST(Transfer, FixedPointOfInvariantDensity) {
    for (std::int64_t m : {2, 3, 5}) {
        const auto ctx = MeasureContext::make(m);
        const auto h = Observable::invariant_density(ctx);
        for (int k = 0; k <= 1000; ++k) {
            const double x = ctx.theta() * k / 1000.0;
            const auto v = transfer_apply(h, x, 1000, ctx);
            ASSERT_TRUE(v.tail_exact);
            ASSERT_NEAR(v.value, density(x, ctx), 1e-10) << m << ' ' << x;
        }
    }
}

TEST(Transfer, ConstantObservables) {
    const auto one = transfer_apply(Observable::constant(1.0), 0.0, 1000, c2);
    EXPECT_NEAR(one.value, 1.2898681336964529, 1e-9);
    EXPECT_LE(std::abs(one.value - 1.2898681336964529), one.tail_bound);
    const auto zero = transfer_apply(Observable::constant(0.0), 0.3, 1000, c2);
    EXPECT_EQ(zero.value, 0.0);
    EXPECT_THROW(transfer_apply(Observable::constant(1.0), 0.3, 1, c2), domain_error);
}

TEST(Transfer, BranchWeightTail) {
    // sum_{i>K} (i theta)^-2 at x = 0 equals m (zeta(2) - H_K^(2)).
    double head = 0.0;
    for (int i = 1; i <= 100; ++i) head += 1.0 / (static_cast<double>(i) * i);
    const double expected = 2.0 * (M_PI * M_PI / 6 - head);
    EXPECT_NEAR(branch_weight_tail(0.0, 100, 2, c2.params), expected, 1e-13);
}

TEST(Transfer, UlamRowsStochastic) {
    const auto& P = ulam4096();
    for (std::size_t i = 0; i < P.cells; i += 97) ASSERT_NEAR(P.row_sum(i), 1.0, 1e-13);
    EXPECT_LT(P.max_neglected_mass, 1e-10);
}

TEST(Transfer, UlamRecoversDensity) {
    const auto& d = pi4096();
    double total = 0.0;
    for (double v : d.cell_mass()) total += v;
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_LT(l1_distance_to_invariant(d, c2), 1e-2);
}

TEST(Transfer, UlamRefinementImproves) {
    double prev = 1.0;
    for (std::size_t cells = 256; cells <= 4096; cells *= 2) {
        const auto P = build_ulam(cells, c2);
        const double l1 = l1_distance_to_invariant(stationary_density(P, c2), c2);
        EXPECT_LT(l1, prev) << cells;
        prev = l1;
    }
}

TEST(Transfer, UlamDigitMasses) {
    const auto& P = ulam4096();
    const auto& d = pi4096();
    const auto mass = d.cell_mass();
    for (Digit i = 2; i <= 10; ++i) {
        const auto cyl = cylinder(i, c2.params);
        const auto w = cell_overlap_weights(P, cyl.lo, cyl.hi);
        double s = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k) s += w[k] * mass[k];
        EXPECT_NEAR(s, digit_mass(i, c2), 1e-2) << i;
    }
}

TEST(Transfer, SpectralGap) {
    const auto P = build_ulam(2048, c2);
    const auto gap = spectral_gap(P);
    EXPECT_LT(gap.modulus, 1.0);
    EXPECT_GT(gap.modulus, 0.0);
    const double coll = SpectralTransfer(c2).spectral_gap().modulus;
    EXPECT_NEAR(gap.modulus, coll, 0.01);
}

TEST(Transfer, SpectralGapNonConvergence) {
    const auto P = build_ulam(256, c2);
    EXPECT_THROW(spectral_gap(P, IterationControl{1e-30, 3}), numerical_error);
}

TEST(Transfer, JointMassLagOne) {
    EXPECT_NEAR(joint_digit_mass(2, 2, 1, c2, JointMethod::exact), 0.07589224831288035, 1e-15);
    EXPECT_NEAR(joint_digit_mass(2, 2, 1, c2, JointMethod::quadrature), 0.07589224831288035, 1e-12);
    EXPECT_NEAR(joint_digit_mass(2, 2, 1, c2, JointMethod::ulam), 0.07589224831288035, 1e-3);
    EXPECT_THROW(joint_digit_mass(2, 2, 2, c2, JointMethod::exact), parameter_error);
    EXPECT_THROW(joint_digit_mass(1, 2, 1, c2, JointMethod::exact), domain_error);
}

TEST(Transfer, JointMassApproachesProduct) {
    const double product = digit_mass(2, c2) * digit_mass(3, c2);
    const double far = joint_digit_mass(2, 3, 10, c2, JointMethod::quadrature);
    EXPECT_NEAR(far / product, 1.0, 1e-5);
    const double ulam_far = joint_digit_mass(2, 3, 10, c2, JointMethod::ulam);
    EXPECT_NEAR(ulam_far / product, 1.0, 1e-2);
}

TEST(Transfer, PsiSinglePair) {
    const auto e = psi_estimate(1, 2, c2);
    EXPECT_NEAR(e.psi_hat, 0.10062894327425116, 1e-10);
    EXPECT_EQ(e.pairs_evaluated, 1u);
    EXPECT_EQ(e.argmax_i, 2);
    EXPECT_EQ(e.argmax_j, 2);
}

TEST(Transfer, PsiCurveLogLinear) {
    const auto curve = psi_curve(12, 50, c2);
    for (std::size_t k = 1; k < curve.size(); ++k) EXPECT_LT(curve[k].psi_hat, curve[k - 1].psi_hat);
    const auto fit = fit_psi(curve, 1, 12);
    EXPECT_LT(fit.rate, 1.0);
    EXPECT_GT(fit.r_squared, 0.95);
}

TEST(Transfer, FitNeedsThreePoints) {
    EXPECT_THROW(fit_exponential({1.0, 2.0}, {0.5, 0.25}), fit_error);
    EXPECT_THROW(fit_exponential({1.0, 2.0, 3.0}, {0.5, 0.0, -1.0}), fit_error);
    const auto f = fit_exponential({1.0, 2.0, 3.0}, {0.5, 0.25, 0.125});
    EXPECT_NEAR(f.rate, 0.5, 1e-14);
    EXPECT_NEAR(f.amplitude, 1.0, 1e-14);
    EXPECT_NEAR(f.r_squared, 1.0, 1e-14);
}

TEST(Transfer, CovarianceInequality) {
    const auto rows = covariance_check(10, 20, 50, c2);
    ASSERT_EQ(rows.size(), 10u);
    for (const auto& r : rows) EXPECT_TRUE(r.holds) << r.lag;
}

TEST(Transfer, UlamCorrelationsDecay) {
    const auto& P = ulam4096();
    const auto& d = pi4096();
    const auto c = cylinder(2, c2.params);
    const auto w = cell_overlap_weights(P, c.lo, c.hi);
    const auto cor = ulam_correlations(P, d, w, w, 8);
    ASSERT_EQ(cor.size(), 8u);
    EXPECT_GT(std::abs(cor[0]), std::abs(cor[7]));
}

TEST(Transfer, Exports) {
    const auto P = build_ulam(16, c2);
    std::ostringstream m;
    write_ulam_coordinates(m, P);
    std::istringstream in(m.str());
    std::size_t r, c, lines = 0;
    double v;
    while (in >> r >> c >> v) {
        ASSERT_NEAR(P.entry(r, c), v, 1e-17);
        ++lines;
    }
    EXPECT_EQ(lines, P.nonzeros());

    std::ostringstream d;
    write_density_csv(d, stationary_density(P, c2));
    EXPECT_EQ(d.str().substr(0, d.str().find('\n')), "cell_midpoint,density");
}

TEST(TransferProperty, GenericObservableBoundedByTail) {
    gen::Gen g(41);
    for (int t = 0; t < 200; ++t) {
        const double x = g.uniform(0.0, c2.theta());
        const double a = g.uniform(-2, 2), b = g.uniform(-2, 2);
        Observable f{[a, b](double y) { return a + b * y; }, std::abs(a) + std::abs(b), false};
        const auto coarse = transfer_apply(f, x, 100, c2);
        const auto fine = transfer_apply(f, x, 20000, c2);
        ASSERT_LE(std::abs(coarse.value - fine.value), coarse.tail_bound + fine.tail_bound + 1e-12);
    }
}

TEST(TransferProperty, UlamMassPreserved) {
    gen::Gen g(42);
    const auto P = build_ulam(512, c2);
    for (int t = 0; t < 20; ++t) {
        std::vector<double> v(P.cells), out;
        double s = 0.0;
        for (auto& x : v) s += x = g.uniform(0.0, 1.0);
        P.left_multiply(v, out);
        double so = 0.0;
        for (double x : out) so += x;
        ASSERT_NEAR(so, s, 1e-10 * s);
    }
}
