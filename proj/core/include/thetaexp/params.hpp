#pragma once

#include <cmath>
#include <cstdint>

#include "thetaexp/qfield.hpp"

namespace thetaexp {

using Digit = std::int64_t;

// theta = 1/sqrt(m) with m >= 2 not a perfect square.
struct ThetaParams {
    std::int64_t m = 2;
    double sqrt_m = 0.0;
    double theta = 0.0;
    double theta_squared = 0.0;  // 1/m
    double log1p_theta2 = 0.0;   // log(1 + 1/m)

    static ThetaParams make(std::int64_t m) {
        validate_field_parameter(m);
        ThetaParams p;
        p.m = m;
        p.sqrt_m = std::sqrt(static_cast<double>(m));
        p.theta = 1.0 / p.sqrt_m;
        p.theta_squared = 1.0 / static_cast<double>(m);
        p.log1p_theta2 = std::log1p(p.theta_squared);
        return p;
    }

    QuadNumber theta_exact() const { return QuadNumber::theta(m); }
};

}  // namespace thetaexp
