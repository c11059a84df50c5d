#pragma once

// Independent reference implementations used by the tests.

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

/// erf by its Maclaurin series in long double; accurate for |x| < 4.
inline long double erf_series(long double x) {
    long double term = x, sum = x;
    for (int n = 1; n < 200; ++n) {
        term *= -x * x / n;
        const long double add = term / (2 * n + 1);
        sum += add;
        if (std::fabs(add) < 1e-30L) break;
    }
    return sum * 2.0L / std::sqrt(3.14159265358979323846264338327950288L);
}

inline long double phi(long double z) { return 0.5L * (1.0L + erf_series(z / std::sqrt(2.0L))); }

/// Phi^{-1}(p) by bisection on the series CDF.
inline double inv_phi(double p) {
    long double lo = -6.0L, hi = 6.0L;
    for (int i = 0; i < 200; ++i) {
        const long double mid = 0.5L * (lo + hi);
        (phi(mid) < p ? lo : hi) = mid;
    }
    return static_cast<double>(0.5L * (lo + hi));
}

/// k-th smallest with k = ceil(level (n + 1)), by counting.
inline double order_statistic(std::vector<double> v, double level) {
    std::size_t k = 0;
    const double n1 = static_cast<double>(v.size() + 1);
    while (static_cast<double>(k) < level * n1 - 1e-9) ++k;
    if (k < 1) k = 1;
    if (k > v.size()) k = v.size();
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = i + 1; j < v.size(); ++j)
            if (v[j] < v[i]) std::swap(v[i], v[j]);
    return v[k - 1];
}

}  // namespace oracle
