#pragma once

// The generalized Gauss map T(x) = 1/x - theta*floor(1/(theta x)) on (0, theta],
// its digits, cylinders and orbit diagnostics.
//
// One stepping algorithm is shared by three number types:
//   exact     QuadNumber, zero rounding error;
//   interval  MPFR enclosures, every digit certified, precision escalated on
//             ambiguity up to a cap;
//   double    binary64, used by the Monte Carlo harness.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "thetaexp/enclosure.hpp"
#include "thetaexp/params.hpp"
#include "thetaexp/qfield.hpp"

namespace thetaexp {

enum class NumericKind { exact, interval, float64 };

struct NumericMode {
    NumericKind kind = NumericKind::float64;
    unsigned long precision = 64;        // interval: starting precision in bits
    unsigned long precision_cap = 4096;  // interval: give up beyond this

    static NumericMode exact() { return {NumericKind::exact, 0, 0}; }
    static NumericMode float64() { return {NumericKind::float64, 53, 53}; }
    static NumericMode interval(unsigned long precision = 64, unsigned long cap = 4096) {
        return {NumericKind::interval, precision, cap};
    }

    std::string name() const;
};

NumericMode parse_mode(const std::string& name);

// A start point: binary64 or an exact field element. Interval mode encloses
// either one exactly.
using Point = std::variant<double, QuadNumber>;

using Orbit = std::variant<std::vector<double>, std::vector<QuadNumber>, std::vector<Enclosure>>;

struct Expansion {
    std::int64_t m = 2;
    NumericMode mode;
    std::vector<Digit> digits;
    // orbit[0] is the start point; orbit[k+1] = T(orbit[k]); digits.size()+1 entries.
    Orbit orbit;
    bool terminated = false;
    // Interval mode: precision at which every digit was certified.
    unsigned long certified_precision = 0;

    std::size_t size() const { return digits.size(); }
    // Decimal text of the last orbit point.
    std::string final_point_decimal(unsigned digits_after_point = 20) const;
};

template <class T>
struct StepResult {
    Digit digit;
    T next;
};

StepResult<double> gauss_step(double x, const ThetaParams& params);
// Same step without the domain check; for hot loops that keep x in (0, theta].
StepResult<double> gauss_step_unchecked(double x, const ThetaParams& params);
StepResult<QuadNumber> gauss_step(const QuadNumber& x, const ThetaParams& params);
// Certified step on a given enclosure. Throws certification_error if the
// enclosure of 1/(theta x) contains an integer.
StepResult<Enclosure> gauss_step(const Enclosure& x, const ThetaParams& params);
// Certified step from an exact source with precision escalation.
StepResult<Enclosure> gauss_step_interval(const QuadNumber& x, const ThetaParams& params,
                                          const NumericMode& mode = NumericMode::interval());

Expansion expand(double x, std::size_t n, const ThetaParams& params);
Expansion expand(const QuadNumber& x, std::size_t n, const ThetaParams& params);
Expansion expand_interval(const QuadNumber& x, std::size_t n, const ThetaParams& params,
                          const NumericMode& mode = NumericMode::interval());
Expansion expand(const Point& x, std::size_t n, const ThetaParams& params, const NumericMode& mode);

// Backward evaluation of [d1, ..., dn + tail]_theta.
double evaluate(std::span<const Digit> digits, const ThetaParams& params, double tail = 0.0);
QuadNumber evaluate_exact(std::span<const Digit> digits, const ThetaParams& params,
                          const std::optional<QuadNumber>& tail = std::nullopt);

// p_k/q_k with p_{-1}=1, p_0=0, q_{-1}=0, q_0=1 and
// p_k = theta d_k p_{k-1} + p_{k-2} (same for q). Index 0 holds k=0.
template <class T>
struct Convergents {
    std::vector<T> p;
    std::vector<T> q;

    // [d1..dn + tail] = (p_n + tail p_{n-1}) / (q_n + tail q_{n-1}).
    // Requires at least one digit.
    T value(const T& tail) const {
        const std::size_t n = p.size() - 1;
        return (p[n] + tail * p[n - 1]) / (q[n] + tail * q[n - 1]);
    }
};

Convergents<double> convergents(std::span<const Digit> digits, const ThetaParams& params);
Convergents<QuadNumber> convergents_exact(std::span<const Digit> digits, const ThetaParams& params);

template <class T>
struct BasicInterval {
    T lo;
    T hi;
    bool lo_open = true;
    bool hi_open = false;

    bool contains(const T& x) const {
        const bool above = lo_open ? lo < x : lo <= x;
        const bool below = hi_open ? x < hi : x <= hi;
        return above && below;
    }
    T diameter() const { return hi - lo; }
};

using Interval = BasicInterval<double>;
using ExactInterval = BasicInterval<QuadNumber>;

// I(i) = (1/(theta(i+1)), 1/(theta i)].
Interval cylinder(Digit i, const ThetaParams& params);
ExactInterval cylinder_exact(Digit i, const ThetaParams& params);

// Points whose expansion starts with `digits`; endpoint openness is exact.
Interval cylinder_rank_n(std::span<const Digit> digits, const ThetaParams& params);
ExactInterval cylinder_rank_n_exact(std::span<const Digit> digits, const ThetaParams& params);

// Inverse branch w_i(x) = 1/(x + i theta).
double inverse_branch(Digit i, double x, const ThetaParams& params);
QuadNumber inverse_branch(Digit i, const QuadNumber& x, const ThetaParams& params);

// log|(T^n)'(x)| = -2 sum_{j<n} log T^j(x).
double orbit_log_derivative(const Point& x, std::size_t n, const ThetaParams& params, const NumericMode& mode);

struct DistortionSample {
    double ratio_minus_1;  // |(T^n)'(x)/(T^n)'(y) - 1|
    double image_gap;      // |T^n x - T^n y|
};

DistortionSample distortion_ratio(std::span<const Digit> digits, double x, double y, const ThetaParams& params);

struct PeriodInfo {
    std::size_t preperiod;
    std::size_t period;  // 0 when the orbit terminates at 0
};

std::optional<PeriodInfo> detect_period(const QuadNumber& x, std::size_t cap, const ThetaParams& params);

// Throws domain_error unless every digit is >= m.
void validate_digits(std::span<const Digit> digits, const ThetaParams& params);

}  // namespace thetaexp
