#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

// Test-only numerics, deliberately independent of the library's
// Gauss-Kronrod machinery: Romberg integration on a fixed interval and a
// plain bisection root finder. These act as the oracles the library results
// are checked against.

namespace oracle {

// Romberg integration with trapezoid refinement and Richardson extrapolation.
inline double romberg(const std::function<double(double)>& f, double a, double b,
                      int max_level = 22, double tol = 1e-12) {
    std::vector<std::vector<double>> table(1);
    double h = b - a;
    table[0].push_back(0.5 * h * (f(a) + f(b)));
    for (int level = 1; level <= max_level; ++level) {
        h *= 0.5;
        double sum = 0.0;
        const std::size_t points = std::size_t(1) << (level - 1);
        for (std::size_t i = 0; i < points; ++i) sum += f(a + (2.0 * i + 1.0) * h);
        table.emplace_back();
        table[level].push_back(0.5 * table[level - 1][0] + h * sum);
        double factor = 1.0;
        for (int m = 1; m <= level; ++m) {
            factor *= 4.0;
            table[level].push_back(table[level][m - 1] +
                                   (table[level][m - 1] - table[level - 1][m - 1]) /
                                       (factor - 1.0));
        }
        if (level > 3) {
            const double cur = table[level][level];
            const double prev = table[level - 1][level - 1];
            if (std::abs(cur - prev) <= tol * (std::abs(cur) + 1e-300)) return cur;
        }
    }
    return table.back().back();
}

// Integrate over (a, b) split into geometric panels down to `a`; handles
// integrands whose mass is concentrated many decades below b.
inline double romberg_geometric(const std::function<double(double)>& f, double a, double b,
                                double tol = 1e-12) {
    double total = 0.0;
    double hi = b;
    while (hi > a * (1.0 + 1e-15)) {
        const double lo = std::max(a, hi / 8.0);
        total += romberg(f, lo, hi, 20, tol);
        hi = lo;
    }
    return total;
}

inline double bisect(const std::function<double(double)>& f, double lo, double hi,
                     double rel_tol = 1e-14, int max_iter = 400) {
    double flo = f(lo), fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0)) throw std::invalid_argument("bisect: root not bracketed");
    for (int i = 0; i < max_iter && hi - lo > rel_tol * std::abs(hi); ++i) {
        const double mid = 0.5 * (lo + hi);
        const double fmid = f(mid);
        if (fmid == 0.0) return mid;
        if ((fmid > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace oracle
