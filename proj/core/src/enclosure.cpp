#include "thetaexp/enclosure.hpp"

#include <utility>
#include <vector>

namespace thetaexp {

namespace {

mpq_class exact_value(mpfr_srcptr x) {
    mpq_class q;
    mpfr_get_q(q.get_mpq_t(), x);
    return q;
}

}  // namespace

Enclosure::Enclosure(mpfr_prec_t precision) : precision_(precision) {
    mpfr_init2(lo_, precision_);
    mpfr_init2(hi_, precision_);
    mpfr_set_zero(lo_, 1);
    mpfr_set_zero(hi_, 1);
}

Enclosure::Enclosure(const QuadNumber& value, mpfr_prec_t precision) : Enclosure(precision) {
    enclose_into(lo_, hi_, value);
}

Enclosure::Enclosure(const Enclosure& other) : precision_(other.precision_) {
    mpfr_init2(lo_, precision_);
    mpfr_init2(hi_, precision_);
    mpfr_set(lo_, other.lo_, MPFR_RNDD);
    mpfr_set(hi_, other.hi_, MPFR_RNDU);
}

Enclosure::Enclosure(Enclosure&& other) noexcept : Enclosure(MPFR_PREC_MIN) {
    swap(*this, other);
}

Enclosure& Enclosure::operator=(Enclosure other) noexcept {
    swap(*this, other);
    return *this;
}

Enclosure::~Enclosure() {
    mpfr_clear(lo_);
    mpfr_clear(hi_);
}

void swap(Enclosure& x, Enclosure& y) noexcept {
    std::swap(x.precision_, y.precision_);
    mpfr_swap(x.lo_, y.lo_);
    mpfr_swap(x.hi_, y.hi_);
}

double Enclosure::mid_double() const {
    return static_cast<double>(mid_long_double());
}

long double Enclosure::mid_long_double() const {
    mpfr_t mid;
    mpfr_init2(mid, precision_ + 1);
    mpfr_add(mid, lo_, hi_, MPFR_RNDN);
    mpfr_div_2ui(mid, mid, 1, MPFR_RNDN);
    const long double v = mpfr_get_ld(mid, MPFR_RNDN);
    mpfr_clear(mid);
    return v;
}

double Enclosure::width() const {
    mpfr_t w;
    mpfr_init2(w, precision_);
    mpfr_sub(w, hi_, lo_, MPFR_RNDU);
    const double v = mpfr_get_d(w, MPFR_RNDU);
    mpfr_clear(w);
    return v;
}

bool Enclosure::contains(const QuadNumber& value) const {
    const QuadNumber lo(exact_value(lo_), 0, value.m());
    const QuadNumber hi(exact_value(hi_), 0, value.m());
    return lo <= value && value <= hi;
}

std::string Enclosure::to_string(int significant_digits) const {
    auto render = [&](mpfr_srcptr x, mpfr_rnd_t rnd) {
        std::vector<char> buf(static_cast<std::size_t>(significant_digits) + 32);
        mpfr_snprintf(buf.data(), buf.size(), rnd == MPFR_RNDD ? "%.*RDg" : "%.*RUg", significant_digits, x);
        return std::string(buf.data());
    };
    return "[" + render(lo_, MPFR_RNDD) + ", " + render(hi_, MPFR_RNDU) + "]";
}

void enclose_into(mpfr_ptr lo, mpfr_ptr hi, const QuadNumber& value) {
    const mpfr_prec_t prec = mpfr_get_prec(lo) + 8;
    mpfr_t root_lo, root_hi, t;
    mpfr_inits2(prec, root_lo, root_hi, t, static_cast<mpfr_ptr>(nullptr));
    mpfr_set_si(root_lo, static_cast<long>(value.m()), MPFR_RNDN);
    mpfr_sqrt(root_hi, root_lo, MPFR_RNDU);
    mpfr_sqrt(root_lo, root_lo, MPFR_RNDD);

    const bool b_nonneg = sgn(value.b()) >= 0;
    // lower bound
    mpfr_mul_q(t, b_nonneg ? root_lo : root_hi, value.b().get_mpq_t(), MPFR_RNDD);
    mpfr_add_q(lo, t, value.a().get_mpq_t(), MPFR_RNDD);
    // upper bound
    mpfr_mul_q(t, b_nonneg ? root_hi : root_lo, value.b().get_mpq_t(), MPFR_RNDU);
    mpfr_add_q(hi, t, value.a().get_mpq_t(), MPFR_RNDU);

    mpfr_clears(root_lo, root_hi, t, static_cast<mpfr_ptr>(nullptr));
}

}  // namespace thetaexp
