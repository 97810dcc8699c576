#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

// Globally adaptive Gauss-Kronrod (G7,K15) quadrature in the QUADPACK QAG
// style: keep a worklist of subintervals ordered by error estimate, split the
// worst one until the total estimated error meets the tolerance.

namespace wrcm {

struct QuadratureResult {
    double value = 0.0;
    double error_estimate = 0.0;
    std::size_t n_evals = 0;
    bool converged = false;
};

class QuadratureError : public std::runtime_error {
  public:
    explicit QuadratureError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

// QUADPACK dqk15 abscissae/weights on [-1, 1].
inline constexpr double kGk15Nodes[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
};
inline constexpr double kGk15Weights[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
};
inline constexpr double kG7Weights[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
};

struct Interval {
    double a, b;
    double value;
    double error;
    bool operator<(const Interval& other) const { return error < other.error; }
};

template <typename F>
Interval gk15(F&& f, double a, double b, std::size_t& n_evals) {
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double f_center = f(center);
    double result_gauss = kG7Weights[3] * f_center;
    double result_kronrod = kGk15Weights[7] * f_center;
    for (int j = 0; j < 7; ++j) {
        const double offset = half * kGk15Nodes[j];
        const double f1 = f(center - offset);
        const double f2 = f(center + offset);
        result_kronrod += kGk15Weights[j] * (f1 + f2);
        if (j % 2 == 1) result_gauss += kG7Weights[j / 2] * (f1 + f2);
    }
    n_evals += 15;
    const double value = result_kronrod * half;
    const double error = std::abs((result_kronrod - result_gauss) * half);
    return {a, b, value, error};
}

} // namespace detail

template <typename F>
QuadratureResult integrate(F&& f, double a, double b, double rel_tol = 1e-10,
                           double abs_tol = 0.0, std::size_t max_intervals = 4000) {
    QuadratureResult res;
    if (!(a < b)) {
        res.converged = true;
        return res;
    }
    std::priority_queue<detail::Interval> work;
    detail::Interval whole = detail::gk15(f, a, b, res.n_evals);
    double total_value = whole.value;
    double total_error = whole.error;
    work.push(whole);
    std::size_t n_intervals = 1;
    while (total_error > std::max(abs_tol, rel_tol * std::abs(total_value)) &&
           n_intervals < max_intervals) {
        const detail::Interval worst = work.top();
        work.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (mid <= worst.a || mid >= worst.b) {
            // Interval at floating-point resolution; keep its estimate as is.
            total_error -= worst.error;
            total_value -= worst.value;
            detail::Interval pinned = worst;
            pinned.error = 0.0;
            total_value += pinned.value;
            work.push(pinned);
            continue;
        }
        const detail::Interval left = detail::gk15(f, worst.a, mid, res.n_evals);
        const detail::Interval right = detail::gk15(f, mid, worst.b, res.n_evals);
        total_value += left.value + right.value - worst.value;
        total_error += left.error + right.error - worst.error;
        work.push(left);
        work.push(right);
        ++n_intervals;
    }
    res.value = total_value;
    res.error_estimate = total_error;
    res.converged = total_error <= std::max(abs_tol, rel_tol * std::abs(total_value));
    return res;
}

// Integrate over geometric slices [lo*2^j, lo*2^(j+1)] up to hi. Robust when
// the integrand mass sits many decades below hi (e.g. near-zero weight
// spikes at large sigma): plain adaptive refinement can miss a spike that is
// invisible at the first 15 sample points, geometric slicing cannot.
template <typename F>
QuadratureResult integrate_geometric(F&& f, double lo, double hi, double rel_tol = 1e-10,
                                     double abs_tol = 0.0) {
    QuadratureResult res;
    if (!(lo < hi)) {
        res.converged = true;
        return res;
    }
    // First pass: coarse per-slice estimates to learn the scale of the total.
    std::vector<std::pair<double, double>> slices;
    double b = hi;
    while (b > lo) {
        double a = std::max(lo, 0.5 * b);
        if (a > lo && a < lo * (1.0 + 1e-12)) a = lo;
        slices.emplace_back(a, b);
        b = a;
    }
    double coarse_total = 0.0;
    std::vector<double> coarse(slices.size());
    for (std::size_t i = 0; i < slices.size(); ++i) {
        coarse[i] = detail::gk15(f, slices[i].first, slices[i].second, res.n_evals).value;
        coarse_total += std::abs(coarse[i]);
    }
    // Second pass: refine each slice against a tolerance share.
    const double slice_abs = std::max(abs_tol, rel_tol * coarse_total) /
                             static_cast<double>(std::max<std::size_t>(slices.size(), 1));
    bool all_converged = true;
    for (std::size_t i = 0; i < slices.size(); ++i) {
        QuadratureResult part =
            integrate(f, slices[i].first, slices[i].second, 0.25 * rel_tol, slice_abs, 600);
        res.value += part.value;
        res.error_estimate += part.error_estimate;
        all_converged = all_converged && part.converged;
    }
    res.converged =
        all_converged ||
        res.error_estimate <= std::max(abs_tol, rel_tol * std::abs(res.value));
    return res;
}

} // namespace wrcm
