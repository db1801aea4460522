#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <gmpxx.h>

#include "thetaexp/params.hpp"
#include "thetaexp/qfield.hpp"

namespace thetaexp::gen {

// Seeded value generators for property tests.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    std::int64_t integer(std::int64_t lo, std::int64_t hi) {
        return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng_);
    }

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

    mpq_class rational(std::int64_t bound) {
        mpq_class q(mpz_class(static_cast<long>(integer(-bound, bound))), mpz_class(static_cast<long>(integer(1, bound))));
        q.canonicalize();
        return q;
    }

    QuadNumber quad(std::int64_t m, std::int64_t bound) { return {rational(bound), rational(bound), m}; }

    QuadNumber nonzero_quad(std::int64_t m, std::int64_t bound) {
        for (;;) {
            QuadNumber q = quad(m, bound);
            if (!q.is_zero()) return q;
        }
    }

    // Irrational field point strictly inside (0, theta).
    QuadNumber field_point(std::int64_t m) {
        const double theta = 1.0 / std::sqrt(static_cast<double>(m));
        for (;;) {
            const QuadNumber q{rational(40), mpq_class(integer(-40, 40), integer(1, 40)), m};
            if (q.is_rational()) continue;
            const double v = q.to_double();
            if (v > 1e-3 && v < theta - 1e-3) return q;
        }
    }

    std::vector<Digit> digits(std::int64_t m, std::size_t count, Digit max_digit) {
        std::vector<Digit> d(count);
        for (auto& x : d) x = integer(m, max_digit);
        return d;
    }

    std::int64_t non_square(std::int64_t lo, std::int64_t hi) {
        for (;;) {
            const std::int64_t m = integer(lo, hi);
            if (!is_perfect_square(m)) return m;
        }
    }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

}  // namespace thetaexp::gen
