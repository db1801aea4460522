#pragma once

// Transfer-operator numerics for T:
//   (Lf)(x) = sum_{i>=m} f(w_i(x)) / (x + i theta)^2,  w_i(x) = 1/(x + i theta).
//
// Three discretizations live here:
//   * pointwise evaluation of L with a tail term (fixed-point checks);
//   * an Ulam matrix on a uniform grid (blind density recovery, |lambda_2|);
//   * a Chebyshev collocation of L on [0, theta] (accurate joint digit
//     masses at long lags, used for the mixing estimates).

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "thetaexp/measure.hpp"
#include "thetaexp/parallel.hpp"
#include "thetaexp/params.hpp"

namespace thetaexp {

// A bounded function on [0, theta].
struct Observable {
    std::function<double(double)> f;
    double sup_abs = 0.0;
    // Enables the exact telescoped tail C/(x + (K+1) theta).
    bool is_invariant_density = false;

    static Observable invariant_density(const MeasureContext& ctx);
    static Observable constant(double c);
};

struct TransferValue {
    double value = 0.0;       // partial + tail
    double partial = 0.0;     // sum over branches m..K
    double tail = 0.0;        // exact for h, else f(w_{K+1}(x)) * sum_{i>K}(x + i theta)^-2
    double tail_bound = 0.0;  // 0 when the tail is exact, else sup|f| * sum_{i>K}(x + i theta)^-2
    bool tail_exact = false;
};

TransferValue transfer_apply(const Observable& f, double x, Digit cutoff, const MeasureContext& ctx);

// sum_{i>K} (x + i theta)^-p for p >= 2.
double branch_weight_tail(double x, Digit K, int p, const ThetaParams& params);

// ---- Ulam discretization --------------------------------------------------------

struct UlamOperator {
    std::int64_t m = 2;
    std::size_t cells = 0;
    double cell_width = 0.0;
    // Branches up to branch_cutoff are enumerated; the rest (all inside the
    // cell at 0) are summed by Euler-Maclaurin.
    Digit branch_cutoff = 0;
    // Largest |1 - row sum| before the residual was moved to column 0.
    double max_neglected_mass = 0.0;
    // CSR, rows = source cells: P[i][j] = lambda(cell_i ∩ T^{-1} cell_j)/lambda(cell_i).
    std::vector<std::size_t> row_ptr;
    std::vector<std::uint32_t> col;
    std::vector<double> val;

    std::size_t nonzeros() const { return val.size(); }
    double row_sum(std::size_t i) const;
    double entry(std::size_t i, std::size_t j) const;
    // out = v P
    void left_multiply(const std::vector<double>& v, std::vector<double>& out) const;
    // out = P v
    void right_multiply(const std::vector<double>& v, std::vector<double>& out) const;
    double cell_lo(std::size_t i) const { return static_cast<double>(i) * cell_width; }
    double cell_mid(std::size_t i) const { return (static_cast<double>(i) + 0.5) * cell_width; }
};

UlamOperator build_ulam(std::size_t cells, const MeasureContext& ctx, unsigned threads = default_thread_count());

struct IterationControl {
    double tolerance = 1e-12;
    std::size_t max_iterations = 20000;
};

struct StationaryDensity {
    std::vector<double> density;  // per cell, integrates to 1 over [0, theta]
    double cell_width = 0.0;
    std::size_t iterations = 0;
    double final_change = 0.0;

    // Probability mass of each cell.
    std::vector<double> cell_mass() const;
};

StationaryDensity stationary_density(const UlamOperator& P, const MeasureContext& ctx,
                                     const IterationControl& control = {});

// Exact integral of |d - h| over [0, theta] for a cellwise-constant d.
double l1_distance_to_invariant(const StationaryDensity& d, const MeasureContext& ctx);

struct SpectralGapEstimate {
    double modulus = 0.0;  // |lambda_2|
    std::size_t iterations = 0;
    double last_change = 0.0;
};

// |lambda_2| by power iteration on the complement of the stationary direction.
SpectralGapEstimate spectral_gap(const UlamOperator& P, const IterationControl& control = {1e-11, 20000});
SpectralGapEstimate spectral_gap(const UlamOperator& P, const StationaryDensity& pi,
                                 const IterationControl& control = {1e-11, 20000});

// Correlation gamma(A ∩ T^{-n}B) - gamma(A)gamma(B) in the Ulam model for cell
// indicator weights a, b (1 inside, 0 outside, fractional allowed), n = 1..max_lag.
std::vector<double> ulam_correlations(const UlamOperator& P, const StationaryDensity& pi, const std::vector<double>& a,
                                      const std::vector<double>& b, std::size_t max_lag);

// Fraction of each cell covered by [lo, hi].
std::vector<double> cell_overlap_weights(const UlamOperator& P, double lo, double hi);

// ---- Chebyshev collocation of L --------------------------------------------------

class SpectralTransfer {
public:
    SpectralTransfer(const MeasureContext& ctx, std::size_t nodes = 48, Digit explicit_branches = 4000);

    std::size_t size() const { return nodes_.size(); }
    const std::vector<double>& nodes() const { return nodes_; }
    // Nodal values of L(h 1_{I(i)}) = h(w_i(y))/(y + i theta)^2.
    std::vector<double> first_image_of_digit(Digit i) const;
    // Nodal values of L g.
    std::vector<double> apply(const std::vector<double>& g) const;
    // Integral over I(j) of the interpolant through nodal values g.
    double integrate_digit(const std::vector<double>& g, Digit j) const;
    double interpolate(const std::vector<double>& g, double y) const;
    // |lambda_2| of the collocation matrix.
    SpectralGapEstimate spectral_gap(const IterationControl& control = {1e-13, 20000}) const;
    // Row q with q . g = integral over [lo, hi] of the interpolant.
    std::vector<double> integration_row(double lo, double hi) const;
    std::vector<double> digit_integration_row(Digit j) const;

private:
    std::vector<double> interpolation_row(double y) const;

    MeasureContext ctx_;
    std::vector<double> nodes_;
    std::vector<double> bary_;
    std::vector<double> matrix_;  // row-major N x N
};

enum class JointMethod { exact, ulam, quadrature };
std::string to_string(JointMethod method);
JointMethod parse_joint_method(const std::string& name);

struct JointMassOptions {
    std::size_t ulam_cells = 4096;
    std::size_t spectral_nodes = 48;
};

// gamma(first digit = i, digit 1+lag = j).
double joint_digit_mass(Digit i, Digit j, std::size_t lag, const MeasureContext& ctx, JointMethod method,
                        const JointMassOptions& options = {});

// Exact lag-1 joint mass: the rank-2 cylinder [i, j].
double joint_digit_mass_lag1(Digit i, Digit j, const MeasureContext& ctx);

struct MixingEstimate {
    std::size_t lag = 0;
    double psi_hat = 0.0;  // lower bound for psi(lag): rank-1 digit events only
    std::size_t pairs_evaluated = 0;
    JointMethod method = JointMethod::quadrature;
    Digit argmax_i = 0;
    Digit argmax_j = 0;
};

struct ExponentialFit {
    double amplitude = 0.0;  // K_fit
    double rate = 0.0;       // rho_fit
    double r_squared = 0.0;
    std::size_t points = 0;
};

// Least squares of log y against x; needs at least 3 positive finite points.
ExponentialFit fit_exponential(const std::vector<double>& x, const std::vector<double>& y);

// psi_hat for lags 1..max_lag, digits m..digit_cap, via the Chebyshev operator
// (lag 1 uses the closed form).
std::vector<MixingEstimate> psi_curve(std::size_t max_lag, Digit digit_cap, const MeasureContext& ctx,
                                      const SpectralTransfer* op = nullptr);
// Same estimate with joint masses from an Ulam model (coarser: discretization
// error of order cell width floors the curve).
std::vector<MixingEstimate> psi_curve_ulam(std::size_t max_lag, Digit digit_cap, const MeasureContext& ctx,
                                           std::size_t cells = 4096);
MixingEstimate psi_estimate(std::size_t lag, Digit digit_cap, const MeasureContext& ctx,
                            JointMethod method = JointMethod::quadrature);
ExponentialFit fit_psi(const std::vector<MixingEstimate>& curve, std::size_t first_lag, std::size_t last_lag);

// Covariance check for the truncated digit X = l 1{l <= level} at each lag:
// |Cov(X_0, X_lag)| <= psi_hat(lag) * Var(X) * (1 + slack).
struct CovarianceCheck {
    std::size_t lag = 0;
    double covariance = 0.0;
    double variance = 0.0;
    double psi_hat = 0.0;
    double bound = 0.0;
    bool holds = false;
};

std::vector<CovarianceCheck> covariance_check(std::size_t max_lag, Digit level, Digit digit_cap,
                                              const MeasureContext& ctx, double slack = 0.25);

// ---- exports --------------------------------------------------------------------

// "row col value" lines, 0-based indices, one nonzero per line.
void write_ulam_coordinates(std::ostream& out, const UlamOperator& P);
// "cell_midpoint,density"
void write_density_csv(std::ostream& out, const StationaryDensity& d);
// "lag,psi_hat"
void write_psi_csv(std::ostream& out, const std::vector<MixingEstimate>& curve);

}  // namespace thetaexp
