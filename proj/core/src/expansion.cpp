#include "thetaexp/expansion.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include "thetaexp/error.hpp"

namespace thetaexp {

std::string NumericMode::name() const {
    switch (kind) {
        case NumericKind::exact: return "exact";
        case NumericKind::interval: return "interval";
        case NumericKind::float64: return "double";
    }
    return "unknown";
}

NumericMode parse_mode(const std::string& name) {
    if (name == "exact") return NumericMode::exact();
    if (name == "double" || name == "float64") return NumericMode::float64();
    if (name == "interval") return NumericMode::interval();
    if (name.rfind("interval:", 0) == 0) {
        const unsigned long bits = std::stoul(name.substr(9));
        if (bits < 16) throw parameter_error("interval precision must be >= 16 bits");
        return NumericMode::interval(bits, std::max(bits, 4096UL));
    }
    throw parameter_error("unknown numeric mode '" + name + "'");
}

void validate_digits(std::span<const Digit> digits, const ThetaParams& params) {
    for (Digit d : digits)
        if (d < params.m)
            throw domain_error("digit " + std::to_string(d) + " is below m=" + std::to_string(params.m));
}

namespace {

constexpr double kDigitLimit = 9.2e18;  // below 2^63

Digit checked_digit(const mpz_class& d) {
    if (!d.fits_slong_p()) throw domain_error("digit " + d.get_str() + " exceeds 64-bit storage");
    return d.get_si();
}

// ---- arithmetic policies ----------------------------------------------------

struct DoubleArith {
    using value_type = double;
    const ThetaParams& params;

    void check_domain(double x) const {
        if (!(x > 0.0 && x <= params.theta))
            throw domain_error("x=" + std::to_string(x) + " outside (0, theta]");
    }

    StepResult<double> branch(double x) const {
        const double t = params.sqrt_m / x;
        if (!(t < kDigitLimit)) throw domain_error("digit overflows 64-bit storage");
        Digit d = std::max<Digit>(static_cast<Digit>(std::floor(t)), params.m);
        const double inv = 1.0 / x;
        double next = std::fma(-static_cast<double>(d), params.theta, inv);
        // Rounding in t can land one branch off near cylinder endpoints.
        if (next < 0.0 && d > params.m) {
            --d;
            next = std::fma(-static_cast<double>(d), params.theta, inv);
        } else if (next >= params.theta) {
            ++d;
            next = std::fma(-static_cast<double>(d), params.theta, inv);
        }
        next = std::clamp(next, 0.0, params.theta);
        return {d, next};
    }

    static bool is_zero(double x) { return x == 0.0; }
};

struct ExactArith {
    using value_type = QuadNumber;
    const ThetaParams& params;
    QuadNumber theta;
    QuadNumber sqrt_m;

    explicit ExactArith(const ThetaParams& p)
        : params(p), theta(p.theta_exact()), sqrt_m(QuadNumber::sqrt_m(p.m)) {}

    void check_domain(const QuadNumber& x) const {
        if (x.m() != params.m) throw parameter_error("point lives in a different quadratic field");
        if (x.sign() <= 0 || (theta - x).sign() < 0)
            throw domain_error("x=" + x.to_string() + " outside (0, theta]");
    }

    StepResult<QuadNumber> branch(const QuadNumber& x) const {
        const QuadNumber inv = x.inverse();
        const Digit d = checked_digit((inv * sqrt_m).floor());
        return {d, inv - theta * QuadNumber(mpq_class(static_cast<long>(d)), 0, params.m)};
    }

    static bool is_zero(const QuadNumber& x) { return x.is_zero(); }
};

class IntervalArith {
public:
    using value_type = Enclosure;

    IntervalArith(const ThetaParams& p, mpfr_prec_t precision)
        : params_(p), precision_(precision), sqrt_m_(QuadNumber::sqrt_m(p.m), precision),
          theta_(p.theta_exact(), precision) {}

    void check_domain(const Enclosure& x) const {
        if (mpfr_sgn(x.hi()) <= 0 || mpfr_cmp(x.lo(), theta_.hi()) > 0)
            throw domain_error("enclosure " + x.to_string() + " outside (0, theta]");
    }

    StepResult<Enclosure> branch(const Enclosure& x) const {
        check_domain(x);
        mpfr_t inv_lo, inv_hi, t_lo, t_hi, tmp;
        mpfr_inits2(precision_, inv_lo, inv_hi, t_lo, t_hi, tmp, static_cast<mpfr_ptr>(nullptr));
        struct Guard {
            mpfr_ptr a, b, c, d, e;
            ~Guard() { mpfr_clears(a, b, c, d, e, static_cast<mpfr_ptr>(nullptr)); }
        } guard{inv_lo, inv_hi, t_lo, t_hi, tmp};

        mpz_class d_lo, d_hi;
        if (mpfr_sgn(x.lo()) <= 0) {
            // The orbit may have terminated; no digit can be certified.
            mpfr_ui_div(inv_lo, 1, x.hi(), MPFR_RNDD);
            mpfr_mul(t_lo, sqrt_m_.lo(), inv_lo, MPFR_RNDD);
            mpfr_get_z(d_lo.get_mpz_t(), t_lo, MPFR_RNDD);
            throw certification_error("enclosure " + x.to_string() + " touches 0", d_lo, precision_);
        }
        mpfr_ui_div(inv_lo, 1, x.hi(), MPFR_RNDD);
        mpfr_ui_div(inv_hi, 1, x.lo(), MPFR_RNDU);
        mpfr_mul(t_lo, sqrt_m_.lo(), inv_lo, MPFR_RNDD);
        mpfr_mul(t_hi, sqrt_m_.hi(), inv_hi, MPFR_RNDU);
        mpfr_get_z(d_lo.get_mpz_t(), t_lo, MPFR_RNDD);
        mpfr_get_z(d_hi.get_mpz_t(), t_hi, MPFR_RNDD);
        if (d_lo != d_hi)
            throw certification_error("floor of 1/(theta x) is ambiguous near " + d_hi.get_str(), d_hi,
                                      precision_);
        if (d_lo < params_.m) throw domain_error("enclosure " + x.to_string() + " lies above theta");
        const Digit d = checked_digit(d_lo);

        Enclosure next(precision_);
        mpfr_mul_z(tmp, theta_.hi(), d_lo.get_mpz_t(), MPFR_RNDU);
        mpfr_sub(next.lo(), inv_lo, tmp, MPFR_RNDD);
        mpfr_mul_z(tmp, theta_.lo(), d_lo.get_mpz_t(), MPFR_RNDD);
        mpfr_sub(next.hi(), inv_hi, tmp, MPFR_RNDU);
        // The true image lies in [0, theta).
        if (mpfr_sgn(next.lo()) < 0) mpfr_set_zero(next.lo(), 1);
        if (mpfr_cmp(next.hi(), theta_.hi()) > 0) mpfr_set(next.hi(), theta_.hi(), MPFR_RNDU);
        return {d, std::move(next)};
    }

    static bool is_zero(const Enclosure& x) { return x.is_point_zero(); }

private:
    const ThetaParams& params_;
    mpfr_prec_t precision_;
    Enclosure sqrt_m_;
    Enclosure theta_;
};

// ---- the shared orbit loop ----------------------------------------------------

template <class Arith>
void run_orbit(typename Arith::value_type x, std::size_t n, const Arith& arith, Expansion& out) {
    using V = typename Arith::value_type;
    arith.check_domain(x);
    std::vector<V> orbit;
    orbit.reserve(n + 1);
    orbit.push_back(std::move(x));
    out.digits.clear();
    out.digits.reserve(n);
    out.terminated = false;
    for (std::size_t k = 0; k < n; ++k) {
        auto step = arith.branch(orbit.back());
        out.digits.push_back(step.digit);
        const bool hit_zero = Arith::is_zero(step.next);
        orbit.push_back(std::move(step.next));
        if (hit_zero) {
            out.terminated = true;
            break;
        }
    }
    out.orbit = std::move(orbit);
}

Expansion make_expansion(const ThetaParams& params, const NumericMode& mode) {
    Expansion e;
    e.m = params.m;
    e.mode = mode;
    return e;
}

QuadNumber as_exact(const Point& x, const ThetaParams& params) {
    if (const auto* q = std::get_if<QuadNumber>(&x)) return *q;
    return QuadNumber(rational_from_double(std::get<double>(x)), 0, params.m);
}

template <class T, class Branch>
BasicInterval<T> compose_cylinder(std::span<const Digit> digits, const ThetaParams& params,
                                  BasicInterval<T> inner, Branch&& w) {
    // `inner` is I(d_n). The branch onto I(d_k) only reaches [0, theta), so the
    // right endpoint theta of I(m) drops out as soon as one branch is applied.
    BasicInterval<T> j = std::move(inner);
    const std::size_t n = digits.size();
    for (std::size_t k = n - 1; k-- > 0;) {
        if (k == n - 2 && digits[n - 1] == params.m) j.hi_open = true;
        BasicInterval<T> image{w(digits[k], j.hi), w(digits[k], j.lo), j.hi_open, j.lo_open};
        j = std::move(image);
    }
    return j;
}

}  // namespace

std::string Expansion::final_point_decimal(unsigned digits_after_point) const {
    return std::visit(
        [&](const auto& points) -> std::string {
            using V = typename std::decay_t<decltype(points)>::value_type;
            if (points.empty()) return "";
            const auto& last = points.back();
            char buf[64];
            if constexpr (std::is_same_v<V, QuadNumber>) {
                return last.to_decimal(digits_after_point);
            } else if constexpr (std::is_same_v<V, Enclosure>) {
                std::snprintf(buf, sizeof buf, "%.*Lf", static_cast<int>(std::min(digits_after_point, 18U)),
                              last.mid_long_double());
                return buf;
            } else {
                std::snprintf(buf, sizeof buf, "%.*f", static_cast<int>(std::min(digits_after_point, 17U)), last);
                return buf;
            }
        },
        orbit);
}

StepResult<double> gauss_step(double x, const ThetaParams& params) {
    DoubleArith arith{params};
    arith.check_domain(x);
    return arith.branch(x);
}

StepResult<double> gauss_step_unchecked(double x, const ThetaParams& params) {
    return DoubleArith{params}.branch(x);
}

StepResult<QuadNumber> gauss_step(const QuadNumber& x, const ThetaParams& params) {
    ExactArith arith(params);
    arith.check_domain(x);
    return arith.branch(x);
}

StepResult<Enclosure> gauss_step(const Enclosure& x, const ThetaParams& params) {
    IntervalArith arith(params, x.precision());
    return arith.branch(x);
}

StepResult<Enclosure> gauss_step_interval(const QuadNumber& x, const ThetaParams& params,
                                          const NumericMode& mode) {
    Expansion e = expand_interval(x, 1, params, mode);
    auto& orbit = std::get<std::vector<Enclosure>>(e.orbit);
    return {e.digits.front(), std::move(orbit.back())};
}

Expansion expand(double x, std::size_t n, const ThetaParams& params) {
    Expansion e = make_expansion(params, NumericMode::float64());
    run_orbit(x, n, DoubleArith{params}, e);
    return e;
}

Expansion expand(const QuadNumber& x, std::size_t n, const ThetaParams& params) {
    Expansion e = make_expansion(params, NumericMode::exact());
    run_orbit(x, n, ExactArith(params), e);
    return e;
}

Expansion expand_interval(const QuadNumber& x, std::size_t n, const ThetaParams& params,
                          const NumericMode& mode) {
    if (x.m() != params.m) throw parameter_error("point lives in a different quadratic field");
    const unsigned long cap = std::max(mode.precision_cap, mode.precision);
    unsigned long precision = std::max(mode.precision, 16UL);
    for (;;) {
        Expansion e = make_expansion(params, mode);
        try {
            IntervalArith arith(params, static_cast<mpfr_prec_t>(precision));
            run_orbit(Enclosure(x, static_cast<mpfr_prec_t>(precision)), n, arith, e);
            e.certified_precision = precision;
            return e;
        } catch (const certification_error& err) {
            if (precision >= cap)
                throw certification_error(std::string(err.what()) + " (precision cap " + std::to_string(cap) +
                                              " bits reached)",
                                          err.ambiguous_integer(), precision);
            precision = std::min(precision * 2, cap);
        }
    }
}

Expansion expand(const Point& x, std::size_t n, const ThetaParams& params, const NumericMode& mode) {
    switch (mode.kind) {
        case NumericKind::float64:
            if (const auto* d = std::get_if<double>(&x)) return expand(*d, n, params);
            return expand(std::get<QuadNumber>(x).to_double(), n, params);
        case NumericKind::exact:
            if (!std::holds_alternative<QuadNumber>(x))
                throw parameter_error("exact mode needs an exact input (rational or a+b√m)");
            return expand(std::get<QuadNumber>(x), n, params);
        case NumericKind::interval:
            return expand_interval(as_exact(x, params), n, params, mode);
    }
    throw parameter_error("unknown numeric mode");
}

double evaluate(std::span<const Digit> digits, const ThetaParams& params, double tail) {
    if (digits.empty()) throw domain_error("evaluate needs at least one digit");
    validate_digits(digits, params);
    if (!(tail >= 0.0 && tail <= params.theta)) throw domain_error("tail outside [0, theta]");
    double v = tail;
    for (auto it = digits.rbegin(); it != digits.rend(); ++it)
        v = 1.0 / (params.theta * static_cast<double>(*it) + v);
    return v;
}

QuadNumber evaluate_exact(std::span<const Digit> digits, const ThetaParams& params,
                          const std::optional<QuadNumber>& tail) {
    if (digits.empty()) throw domain_error("evaluate needs at least one digit");
    validate_digits(digits, params);
    const QuadNumber theta = params.theta_exact();
    QuadNumber v = tail.value_or(QuadNumber(0, 0, params.m));
    if (v.sign() < 0 || (theta - v).sign() < 0) throw domain_error("tail outside [0, theta]");
    for (auto it = digits.rbegin(); it != digits.rend(); ++it)
        v = (theta * QuadNumber(mpq_class(static_cast<long>(*it)), 0, params.m) + v).inverse();
    return v;
}

namespace {

template <class T>
Convergents<T> convergents_impl(std::span<const Digit> digits, const T& theta, const T& zero, const T& one,
                                auto&& lift) {
    Convergents<T> c;
    c.p.reserve(digits.size() + 1);
    c.q.reserve(digits.size() + 1);
    T p_prev = one, q_prev = zero;
    c.p.push_back(zero);
    c.q.push_back(one);
    for (Digit d : digits) {
        const T a = theta * lift(d);
        T p_next = a * c.p.back() + p_prev;
        T q_next = a * c.q.back() + q_prev;
        p_prev = c.p.back();
        q_prev = c.q.back();
        c.p.push_back(std::move(p_next));
        c.q.push_back(std::move(q_next));
    }
    return c;
}

}  // namespace

Convergents<double> convergents(std::span<const Digit> digits, const ThetaParams& params) {
    validate_digits(digits, params);
    return convergents_impl<double>(digits, params.theta, 0.0, 1.0, [](Digit d) { return static_cast<double>(d); });
}

Convergents<QuadNumber> convergents_exact(std::span<const Digit> digits, const ThetaParams& params) {
    validate_digits(digits, params);
    const std::int64_t m = params.m;
    return convergents_impl<QuadNumber>(digits, params.theta_exact(), QuadNumber(0, 0, m), QuadNumber(1, 0, m),
                                        [m](Digit d) { return QuadNumber(mpq_class(static_cast<long>(d)), 0, m); });
}

Interval cylinder(Digit i, const ThetaParams& params) {
    if (i < params.m) throw domain_error("cylinder index " + std::to_string(i) + " is below m");
    const double hi = i == params.m ? params.theta : params.sqrt_m / static_cast<double>(i);
    return {params.sqrt_m / static_cast<double>(i + 1), hi, true, false};
}

ExactInterval cylinder_exact(Digit i, const ThetaParams& params) {
    if (i < params.m) throw domain_error("cylinder index " + std::to_string(i) + " is below m");
    return {QuadNumber(0, mpq_class(1, static_cast<unsigned long>(i + 1)), params.m),
            QuadNumber(0, mpq_class(1, static_cast<unsigned long>(i)), params.m), true, false};
}

double inverse_branch(Digit i, double x, const ThetaParams& params) {
    return 1.0 / (x + static_cast<double>(i) * params.theta);
}

QuadNumber inverse_branch(Digit i, const QuadNumber& x, const ThetaParams& params) {
    return (x + params.theta_exact() * QuadNumber(mpq_class(static_cast<long>(i)), 0, params.m)).inverse();
}

Interval cylinder_rank_n(std::span<const Digit> digits, const ThetaParams& params) {
    if (digits.empty()) throw domain_error("cylinder needs at least one digit");
    validate_digits(digits, params);
    return compose_cylinder<double>(digits, params, cylinder(digits.back(), params),
                                    [&](Digit i, double x) { return inverse_branch(i, x, params); });
}

ExactInterval cylinder_rank_n_exact(std::span<const Digit> digits, const ThetaParams& params) {
    if (digits.empty()) throw domain_error("cylinder needs at least one digit");
    validate_digits(digits, params);
    return compose_cylinder<QuadNumber>(digits, params, cylinder_exact(digits.back(), params),
                                        [&](Digit i, const QuadNumber& x) { return inverse_branch(i, x, params); });
}

double orbit_log_derivative(const Point& x, std::size_t n, const ThetaParams& params, const NumericMode& mode) {
    const Expansion e = expand(x, n, params, mode);
    if (e.digits.size() < n)
        throw orbit_too_short("orbit reaches 0 after " + std::to_string(e.digits.size()) + " of " +
                                  std::to_string(n) + " steps",
                              e.digits.size());
    return std::visit(
        [n](const auto& points) {
            using V = typename std::decay_t<decltype(points)>::value_type;
            long double sum = 0.0L;
            for (std::size_t j = 0; j < n; ++j) {
                if constexpr (std::is_same_v<V, QuadNumber>) {
                    sum += std::log(points[j].to_long_double());
                } else if constexpr (std::is_same_v<V, Enclosure>) {
                    sum += std::log(points[j].mid_long_double());
                } else {
                    sum += std::log(static_cast<long double>(points[j]));
                }
            }
            return static_cast<double>(-2.0L * sum);
        },
        e.orbit);
}

DistortionSample distortion_ratio(std::span<const Digit> digits, double x, double y, const ThetaParams& params) {
    const Interval c = cylinder_rank_n(digits, params);
    if (!c.contains(x) || !c.contains(y)) throw domain_error("distortion points must lie in the given cylinder");
    // Follow the prescribed branches so boundary rounding cannot switch branch.
    double log_dx = 0.0, log_dy = 0.0;
    for (Digit d : digits) {
        if (!(x > 0.0 && y > 0.0)) throw orbit_too_short("orbit reaches 0 inside the cylinder", 0);
        log_dx -= 2.0 * std::log(x);
        log_dy -= 2.0 * std::log(y);
        x = std::fma(-static_cast<double>(d), params.theta, 1.0 / x);
        y = std::fma(-static_cast<double>(d), params.theta, 1.0 / y);
    }
    return {std::abs(std::expm1(log_dx - log_dy)), std::abs(x - y)};
}

std::optional<PeriodInfo> detect_period(const QuadNumber& x, std::size_t cap, const ThetaParams& params) {
    ExactArith arith(params);
    arith.check_domain(x);
    auto less = [](const QuadNumber& u, const QuadNumber& v) {
        if (const int c = cmp(u.a(), v.a()); c != 0) return c < 0;
        return cmp(u.b(), v.b()) < 0;
    };
    std::map<QuadNumber, std::size_t, decltype(less)> seen(less);
    seen.emplace(x, 0);
    QuadNumber current = x;
    for (std::size_t step = 1; step <= cap; ++step) {
        current = arith.branch(current).next;
        if (current.is_zero()) return PeriodInfo{step, 0};
        auto [it, inserted] = seen.emplace(current, step);
        if (!inserted) return PeriodInfo{it->second, step - it->second};
    }
    return std::nullopt;
}

}  // namespace thetaexp
