#pragma once

// Exact arithmetic in the real quadratic field Q(sqrt m).
//
// A QuadNumber holds a + b*sqrt(m) with a, b arbitrary-precision rationals in
// lowest terms. Since m is never a perfect square the representation is
// unique, so equality is componentwise and orbit points can be compared
// exactly.

#include <cstdint>
#include <compare>
#include <string>
#include <string_view>

#include <gmpxx.h>

namespace thetaexp {

// Throws parameter_error unless m >= 2 and m is not a perfect square.
void validate_field_parameter(std::int64_t m);

bool is_perfect_square(std::int64_t m);

class QuadNumber {
public:
    QuadNumber(mpq_class a, mpq_class b, std::int64_t m);

    static QuadNumber rational(const mpq_class& a, std::int64_t m) { return {a, 0, m}; }
    static QuadNumber sqrt_m(std::int64_t m) { return {0, 1, m}; }
    // theta = 1/sqrt(m) = sqrt(m)/m.
    static QuadNumber theta(std::int64_t m) { return {0, mpq_class(1, m), m}; }

    // Parses "a+b√m" (also "a+b*sqrt(m)" / "a+bsqrt m"), a bare rational "p/q",
    // or a plain decimal such as "0.25" (read exactly). A bare rational needs
    // `default_m` to fix the field.
    static QuadNumber parse(std::string_view text, std::int64_t default_m = 0);

    const mpq_class& a() const noexcept { return a_; }
    const mpq_class& b() const noexcept { return b_; }
    std::int64_t m() const noexcept { return m_; }

    bool is_zero() const { return sgn(a_) == 0 && sgn(b_) == 0; }
    bool is_rational() const { return sgn(b_) == 0; }

    QuadNumber operator-() const { return {-a_, -b_, m_}; }

    friend QuadNumber operator+(const QuadNumber& u, const QuadNumber& v);
    friend QuadNumber operator-(const QuadNumber& u, const QuadNumber& v);
    friend QuadNumber operator*(const QuadNumber& u, const QuadNumber& v);
    friend QuadNumber operator/(const QuadNumber& u, const QuadNumber& v);

    QuadNumber& operator+=(const QuadNumber& v) { return *this = *this + v; }
    QuadNumber& operator-=(const QuadNumber& v) { return *this = *this - v; }
    QuadNumber& operator*=(const QuadNumber& v) { return *this = *this * v; }

    // Reciprocal via the conjugate: (a - b sqrt m)/(a^2 - b^2 m).
    QuadNumber inverse() const;
    QuadNumber conjugate() const { return {a_, -b_, m_}; }
    // a^2 - b^2 m, never zero for a nonzero element.
    mpq_class norm() const { return a_ * a_ - b_ * b_ * m_; }

    // Exact sign in {-1, 0, +1}; no floating point involved.
    int sign() const;
    // Exact floor; integer square roots only.
    mpz_class floor() const;

    friend bool operator==(const QuadNumber& u, const QuadNumber& v) {
        return u.m_ == v.m_ && u.a_ == v.a_ && u.b_ == v.b_;
    }
    // Numeric order (same field required).
    friend std::strong_ordering operator<=>(const QuadNumber& u, const QuadNumber& v);

    // Canonical text "a+b√m" with rationals printed as "p/q".
    std::string to_string() const;
    // Decimal rendering truncated toward -infinity after `digits` places; exact.
    std::string to_decimal(unsigned digits) const;
    double to_double() const;
    long double to_long_double() const;

private:
    void require_same_field(const QuadNumber& v) const;

    mpq_class a_;
    mpq_class b_;
    std::int64_t m_;
};

enum class QuadOp { add, sub, mul };

QuadNumber q_arith(QuadOp op, const QuadNumber& u, const QuadNumber& v);
inline QuadNumber q_inv(const QuadNumber& u) { return u.inverse(); }
inline int q_sign(const QuadNumber& u) { return u.sign(); }
inline mpz_class q_floor(const QuadNumber& u) { return u.floor(); }

// Exact rational value of a finite double.
mpq_class rational_from_double(double x);
// Exact rational value of a decimal literal like "-12.5e-3"; throws domain_error
// on malformed input.
mpq_class rational_from_decimal(std::string_view text);

}  // namespace thetaexp
