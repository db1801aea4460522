#pragma once

// Closed real interval with MPFR endpoints rounded outward. Only the handful of
// operations the certified Gauss step needs are provided.

#include <string>

#include <gmpxx.h>
#include <mpfr.h>

#include "thetaexp/qfield.hpp"

namespace thetaexp {

class Enclosure {
public:
    explicit Enclosure(mpfr_prec_t precision = 64);
    // Tightest outward-rounded enclosure of an exact field element.
    Enclosure(const QuadNumber& value, mpfr_prec_t precision);

    Enclosure(const Enclosure& other);
    Enclosure(Enclosure&& other) noexcept;
    Enclosure& operator=(Enclosure other) noexcept;
    ~Enclosure();

    friend void swap(Enclosure& x, Enclosure& y) noexcept;

    mpfr_prec_t precision() const { return precision_; }
    mpfr_srcptr lo() const { return lo_; }
    mpfr_srcptr hi() const { return hi_; }
    mpfr_ptr lo() { return lo_; }
    mpfr_ptr hi() { return hi_; }

    double lo_double() const { return mpfr_get_d(lo_, MPFR_RNDD); }
    double hi_double() const { return mpfr_get_d(hi_, MPFR_RNDU); }
    double mid_double() const;
    long double mid_long_double() const;
    // Width hi - lo rounded up.
    double width() const;

    bool contains(const QuadNumber& value) const;
    bool is_point_zero() const { return mpfr_zero_p(lo_) && mpfr_zero_p(hi_); }

    std::string to_string(int significant_digits = 20) const;

private:
    mpfr_prec_t precision_;
    mpfr_t lo_;
    mpfr_t hi_;
};

// Outward enclosure of a + b sqrt(m) written into [lo, hi].
void enclose_into(mpfr_ptr lo, mpfr_ptr hi, const QuadNumber& value);

}  // namespace thetaexp
