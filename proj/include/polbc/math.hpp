#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace polbc {

using Vec = std::vector<double>;

inline double log_sum_exp(const Vec& values) {
    if (values.empty()) throw std::invalid_argument("log_sum_exp: empty input");
    double m = *std::max_element(values.begin(), values.end());
    if (!std::isfinite(m)) return m; // all -inf, or a stray inf propagates
    double acc = 0.0;
    for (double v : values) acc += std::exp(v - m);
    return m + std::log(acc);
}

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double mean(const Vec& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Population (N-denominator) variance.
inline double variance(const Vec& v) {
    double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size());
}

inline bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

} // namespace polbc
