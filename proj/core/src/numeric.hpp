#pragma once

// Small numerical helpers shared by the measure and transfer modules.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>
#include <vector>

namespace thetaexp::detail {

// Neumaier compensated summation.
class CompensatedSum {
public:
    void add(double v) {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v))
            comp_ += (sum_ - t) + v;
        else
            comp_ += (v - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

struct QuadratureRule {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;
};

// Gauss-Legendre nodes by Newton iteration on P_n.
inline QuadratureRule gauss_legendre(int n) {
    QuadratureRule rule;
    rule.nodes.resize(static_cast<std::size_t>(n));
    rule.weights.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        const auto lo = static_cast<std::size_t>(i);
        const auto hi = static_cast<std::size_t>(n - 1 - i);
        rule.nodes[lo] = -x;
        rule.nodes[hi] = x;
        rule.weights[lo] = rule.weights[hi] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return rule;
}

template <class F>
double integrate(const QuadratureRule& rule, double a, double b, F&& f) {
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    CompensatedSum s;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) s.add(rule.weights[k] * f(mid + half * rule.nodes[k]));
    return half * s.value();
}

// Hurwitz zeta sum_{j>=0} (q + j)^-s for integer s >= 2 and q > 0: direct terms
// until q >= 16, then Euler-Maclaurin with Bernoulli terms through B_10.
inline double hurwitz_zeta(int s, double q) {
    CompensatedSum sum;
    while (q < 16.0) {
        sum.add(std::pow(q, -s));
        q += 1.0;
    }
    static constexpr double bernoulli[] = {1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0};
    const double qs = std::pow(q, -s);
    sum.add(q * qs / (s - 1));
    sum.add(0.5 * qs);
    // rising factorial s (s+1) ... (s+2k-2) / (2k)!
    double coeff = s;
    double power = qs / q;
    double factorial = 2.0;
    for (int k = 1; k <= 5; ++k) {
        sum.add(bernoulli[k - 1] * coeff / factorial * power);
        coeff *= (s + 2.0 * k - 1.0) * (s + 2.0 * k);
        power /= q * q;
        factorial *= (2.0 * k + 1.0) * (2.0 * k + 2.0);
    }
    return sum.value();
}

// Deterministic pseudo-random values in [-1, 1] (splitmix64).
inline double splitmix_unit(std::uint64_t index) {
    std::uint64_t z = index * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return static_cast<double>(z >> 11) * 0x1.0p-52 - 1.0;
}

}  // namespace thetaexp::detail
