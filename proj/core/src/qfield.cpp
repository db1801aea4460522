#include "thetaexp/qfield.hpp"

#include <cassert>
#include <cctype>
#include <string>

#include <mpfr.h>

#include "thetaexp/error.hpp"

namespace thetaexp {

namespace {

constexpr std::string_view kSqrtGlyph = "\xE2\x88\x9A";  // U+221A

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool all_digits(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    return true;
}

mpz_class parse_integer(std::string_view s) {
    s = trim(s);
    bool neg = false;
    if (!s.empty() && (s.front() == '+' || s.front() == '-')) {
        neg = s.front() == '-';
        s.remove_prefix(1);
    }
    if (!all_digits(s)) throw domain_error("malformed integer '" + std::string(s) + "'");
    mpz_class z(std::string(s), 10);
    return neg ? mpz_class(-z) : z;
}

// "p/q", an integer, or a decimal literal.
mpq_class parse_rational(std::string_view s) {
    s = trim(s);
    if (auto slash = s.find('/'); slash != std::string_view::npos) {
        mpz_class num = parse_integer(s.substr(0, slash));
        mpz_class den = parse_integer(s.substr(slash + 1));
        if (den == 0) throw domain_error("zero denominator in '" + std::string(s) + "'");
        mpq_class q(num, den);
        q.canonicalize();
        return q;
    }
    return rational_from_decimal(s);
}

// floor(b*sqrt(m)) for b != 0. For b = p/q > 0 this is floor(isqrt(p^2 m)/q);
// negative b uses floor(-y) = -ceil(y) = -(floor(y)+1) since b*sqrt(m) is
// irrational.
mpz_class floor_b_sqrt_m(const mpq_class& b, std::int64_t m) {
    const mpz_class p = abs(b.get_num());
    const mpz_class& q = b.get_den();
    const mpz_class radicand = p * p * m;
    mpz_class root;
    mpz_sqrt(root.get_mpz_t(), radicand.get_mpz_t());
    mpz_class k;
    mpz_fdiv_q(k.get_mpz_t(), root.get_mpz_t(), q.get_mpz_t());
    // k^2 q^2 <= p^2 m < (k+1)^2 q^2
    assert(k * k * q * q <= radicand);
    assert(radicand < (k + 1) * (k + 1) * q * q);
    return sgn(b) > 0 ? k : mpz_class(-(k + 1));
}

mpz_class floor_rational(const mpq_class& a) {
    mpz_class r;
    mpz_fdiv_q(r.get_mpz_t(), a.get_num_mpz_t(), a.get_den_mpz_t());
    return r;
}

std::string rational_text(const mpq_class& q) {
    return q.get_str(10);
}

}  // namespace

bool is_perfect_square(std::int64_t m) {
    if (m < 0) return false;
    mpz_class z(static_cast<long>(m));
    return mpz_perfect_square_p(z.get_mpz_t()) != 0;
}

void validate_field_parameter(std::int64_t m) {
    if (m < 2) throw parameter_error("m must be >= 2, got " + std::to_string(m));
    if (is_perfect_square(m))
        throw parameter_error("m must not be a perfect square, got " + std::to_string(m));
}

QuadNumber::QuadNumber(mpq_class a, mpq_class b, std::int64_t m)
    : a_(std::move(a)), b_(std::move(b)), m_(m) {
    validate_field_parameter(m_);
    a_.canonicalize();
    b_.canonicalize();
}

void QuadNumber::require_same_field(const QuadNumber& v) const {
    if (m_ != v.m_)
        throw parameter_error("quadratic field mismatch: m=" + std::to_string(m_) +
                              " vs m=" + std::to_string(v.m_));
}

QuadNumber operator+(const QuadNumber& u, const QuadNumber& v) {
    u.require_same_field(v);
    return {u.a_ + v.a_, u.b_ + v.b_, u.m_};
}

QuadNumber operator-(const QuadNumber& u, const QuadNumber& v) {
    u.require_same_field(v);
    return {u.a_ - v.a_, u.b_ - v.b_, u.m_};
}

QuadNumber operator*(const QuadNumber& u, const QuadNumber& v) {
    u.require_same_field(v);
    return {u.a_ * v.a_ + u.b_ * v.b_ * u.m_, u.a_ * v.b_ + u.b_ * v.a_, u.m_};
}

QuadNumber operator/(const QuadNumber& u, const QuadNumber& v) {
    u.require_same_field(v);
    return u * v.inverse();
}

QuadNumber QuadNumber::inverse() const {
    if (is_zero()) throw division_by_zero("reciprocal of zero in Q(sqrt " + std::to_string(m_) + ")");
    const mpq_class n = norm();
    assert(sgn(n) != 0);
    return {a_ / n, -b_ / n, m_};
}

int QuadNumber::sign() const {
    const int sa = sgn(a_);
    const int sb = sgn(b_);
    if (sb == 0) return sa;
    if (sa == 0 || sa == sb) return sb;
    // Opposite signs: the term with the larger square wins.
    const int cmp_squares = ::cmp(mpq_class(a_ * a_), mpq_class(b_ * b_ * m_));
    assert(cmp_squares != 0);
    return cmp_squares > 0 ? sa : sb;
}

mpz_class QuadNumber::floor() const {
    const mpz_class fa = floor_rational(a_);
    if (sgn(b_) == 0) return fa;
    const mpz_class k = floor_b_sqrt_m(b_, m_);
    // a + b sqrt m = fa + k + (frac(a) + frac(b sqrt m)), the bracket lies in (0, 2).
    const mpz_class candidate = fa + k + 1;
    const QuadNumber rest = *this - QuadNumber(mpq_class(candidate), 0, m_);
    return rest.sign() >= 0 ? candidate : mpz_class(fa + k);
}

std::strong_ordering operator<=>(const QuadNumber& u, const QuadNumber& v) {
    const int s = (u - v).sign();
    if (s < 0) return std::strong_ordering::less;
    if (s > 0) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
}

std::string QuadNumber::to_string() const {
    std::string out = rational_text(a_);
    out += sgn(b_) < 0 ? "-" : "+";
    out += rational_text(abs(b_));
    out += kSqrtGlyph;
    out += std::to_string(m_);
    return out;
}

std::string QuadNumber::to_decimal(unsigned digits) const {
    mpz_class scale;
    mpz_ui_pow_ui(scale.get_mpz_t(), 10, digits);
    // Truncated toward zero, so the printed digits are a prefix of the expansion of |x|.
    const QuadNumber magnitude = sign() < 0 ? -*this : *this;
    mpz_class scaled = (magnitude * QuadNumber(mpq_class(scale), 0, m_)).floor();
    if (sign() < 0) scaled = -scaled;
    std::string body = mpz_class(abs(scaled)).get_str(10);
    if (body.size() <= digits) body.insert(0, digits + 1 - body.size(), '0');
    std::string out = sgn(scaled) < 0 ? "-" : "";
    out += body.substr(0, body.size() - digits);
    if (digits > 0) {
        out += '.';
        out += body.substr(body.size() - digits);
    }
    return out;
}

namespace {

void evaluate_mpfr(mpfr_t out, const QuadNumber& u) {
    mpfr_t t;
    mpfr_init2(t, mpfr_get_prec(out));
    mpfr_set_si(t, static_cast<long>(u.m()), MPFR_RNDN);
    mpfr_sqrt(t, t, MPFR_RNDN);
    mpfr_mul_q(t, t, u.b().get_mpq_t(), MPFR_RNDN);
    mpfr_set_q(out, u.a().get_mpq_t(), MPFR_RNDN);
    mpfr_add(out, out, t, MPFR_RNDN);
    mpfr_clear(t);
}

}  // namespace

double QuadNumber::to_double() const {
    mpfr_t v;
    mpfr_init2(v, 256);
    evaluate_mpfr(v, *this);
    const double d = mpfr_get_d(v, MPFR_RNDN);
    mpfr_clear(v);
    return d;
}

long double QuadNumber::to_long_double() const {
    mpfr_t v;
    mpfr_init2(v, 256);
    evaluate_mpfr(v, *this);
    const long double d = mpfr_get_ld(v, MPFR_RNDN);
    mpfr_clear(v);
    return d;
}

QuadNumber QuadNumber::parse(std::string_view text, std::int64_t default_m) {
    std::string_view s = trim(text);
    if (s.empty()) throw domain_error("empty number");

    std::size_t root_pos = s.find(kSqrtGlyph);
    std::size_t root_len = kSqrtGlyph.size();
    if (root_pos == std::string_view::npos) {
        root_pos = s.find("sqrt");
        root_len = 4;
    }
    if (root_pos == std::string_view::npos) {
        if (default_m == 0)
            throw parameter_error("rational input '" + std::string(s) + "' needs an explicit m");
        return {parse_rational(s), 0, default_m};
    }

    // Radicand: a parenthesised group or a run of digits; the rest may hold "/q" and a trailing "+a".
    std::string_view after = trim(s.substr(root_pos + root_len));
    std::string_view radicand;
    std::string_view rest;
    if (!after.empty() && after.front() == '(') {
        const std::size_t close = after.find(')');
        if (close == std::string_view::npos) throw domain_error("unbalanced parenthesis in '" + std::string(s) + "'");
        radicand = trim(after.substr(1, close - 1));
        rest = trim(after.substr(close + 1));
    } else {
        std::size_t end = 0;
        while (end < after.size() && std::isdigit(static_cast<unsigned char>(after[end]))) ++end;
        radicand = after.substr(0, end);
        rest = trim(after.substr(end));
    }
    const mpz_class mz = parse_integer(radicand);
    if (!mz.fits_slong_p()) throw parameter_error("m out of range");
    const std::int64_t m = mz.get_si();

    mpz_class b_den = 1;
    if (!rest.empty() && rest.front() == '/') {
        std::size_t end = 1;
        while (end < rest.size() && std::isdigit(static_cast<unsigned char>(rest[end]))) ++end;
        b_den = parse_integer(rest.substr(1, end - 1));
        if (b_den == 0) throw division_by_zero("zero denominator in '" + std::string(s) + "'");
        rest = trim(rest.substr(end));
    }
    std::string_view trailing;
    if (!rest.empty()) {
        if (rest.front() != '+' && rest.front() != '-')
            throw domain_error("unexpected text after radical in '" + std::string(s) + "'");
        trailing = rest;
    }

    std::string_view left = trim(s.substr(0, root_pos));
    if (!left.empty() && left.back() == '*') left = trim(left.substr(0, left.size() - 1));

    // Split "a+b" at the last sign that is not leading and not an exponent sign.
    std::size_t split = std::string_view::npos;
    for (std::size_t i = left.size(); i-- > 1;) {
        if ((left[i] == '+' || left[i] == '-') && left[i - 1] != 'e' && left[i - 1] != 'E') {
            split = i;
            break;
        }
    }
    std::string_view a_text = split == std::string_view::npos ? std::string_view{} : left.substr(0, split);
    std::string_view b_text = split == std::string_view::npos ? left : left.substr(split);
    if (!a_text.empty() && !trailing.empty())
        throw domain_error("two rational parts in '" + std::string(s) + "'");

    mpq_class a = 0;
    if (!a_text.empty()) {
        a = parse_rational(a_text);
    } else if (!trailing.empty()) {
        std::string_view t = trim(trailing.substr(1));
        a = parse_rational(t);
        if (trailing.front() == '-') a = -a;
    }
    mpq_class b;
    b_text = trim(b_text);
    if (b_text.empty() || b_text == "+") {
        b = 1;
    } else if (b_text == "-") {
        b = -1;
    } else {
        // Optional parentheses around the coefficient: "+(1/2)".
        std::string_view body = b_text;
        const bool negative = body.front() == '-';
        if (body.front() == '+' || body.front() == '-') body = trim(body.substr(1));
        if (body.size() >= 2 && body.front() == '(' && body.back() == ')') body = trim(body.substr(1, body.size() - 2));
        b = parse_rational(body);
        if (negative) b = -b;
    }
    b /= b_den;
    b.canonicalize();
    return {a, b, m};
}

QuadNumber q_arith(QuadOp op, const QuadNumber& u, const QuadNumber& v) {
    switch (op) {
        case QuadOp::add: return u + v;
        case QuadOp::sub: return u - v;
        case QuadOp::mul: return u * v;
    }
    throw parameter_error("unknown quadratic-field operation");
}

mpq_class rational_from_double(double x) {
    mpq_class q;
    mpq_set_d(q.get_mpq_t(), x);
    q.canonicalize();
    return q;
}

mpq_class rational_from_decimal(std::string_view text) {
    std::string_view s = trim(text);
    const std::string original(s);
    bool neg = false;
    if (!s.empty() && (s.front() == '+' || s.front() == '-')) {
        neg = s.front() == '-';
        s.remove_prefix(1);
    }
    long exponent = 0;
    if (auto e = s.find_first_of("eE"); e != std::string_view::npos) {
        const mpz_class ez = parse_integer(s.substr(e + 1));
        if (!ez.fits_slong_p() || abs(ez) > 100000) throw domain_error("exponent out of range in '" + original + "'");
        exponent = ez.get_si();
        s = s.substr(0, e);
    }
    std::string digits;
    bool seen_point = false;
    bool seen_digit = false;
    for (char c : s) {
        if (c == '.' && !seen_point) {
            seen_point = true;
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            digits += c;
            seen_digit = true;
            if (seen_point) --exponent;
        } else {
            throw domain_error("malformed number '" + original + "'");
        }
    }
    if (!seen_digit) throw domain_error("malformed number '" + original + "'");
    mpz_class num(digits, 10);
    mpz_class pow10;
    mpz_ui_pow_ui(pow10.get_mpz_t(), 10, static_cast<unsigned long>(exponent < 0 ? -exponent : exponent));
    mpq_class q = exponent < 0 ? mpq_class(num, pow10) : mpq_class(num * pow10);
    q.canonicalize();
    return neg ? mpq_class(-q) : q;
}

}  // namespace thetaexp
