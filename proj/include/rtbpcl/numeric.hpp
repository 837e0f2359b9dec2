#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace rtbpcl {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// log(sum(exp(xs))) with max-subtraction. Returns -inf for an empty span or
// when every entry is -inf.
inline double log_sum_exp(std::span<const double> xs) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : xs) {
        m = std::max(m, x);
    }
    if (!std::isfinite(m)) {
        return m;
    }
    double s = 0.0;
    for (double x : xs) {
        s += std::exp(x - m);
    }
    return m + std::log(s);
}

inline double log_add_exp(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) {
        return b;
    }
    if (b == -std::numeric_limits<double>::infinity()) {
        return a;
    }
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace rtbpcl
