#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "wrcm/quadrature.hpp"
#include "wrcm/weights.hpp"

// Scaling equation k! = s E[(sigma h(W))^k exp(-sigma h(W))] =: L(s, sigma).
// solve_scg returns the largest root sigma_s = s v_{s,k}: bracket from above
// (sigma_s w_s = O(log s)), walk down a geometric grid to the first
// sign change, bisect. Asymptotic predictors for the two left-tail families
// and the A.1-A.3 assumption checks ride on top of the solver.

namespace wrcm {

class NoSolutionError : public std::runtime_error {
  public:
    explicit NoSolutionError(const std::string& what) : std::runtime_error(what) {}
};

inline std::uint64_t factorial(int k) {
    if (k < 0 || k > 20) throw std::domain_error("factorial: supported range is 0 <= k <= 20");
    std::uint64_t f = 1;
    for (int j = 2; j <= k; ++j) f *= static_cast<std::uint64_t>(j);
    return f;
}

namespace detail {

// (sigma h)^k e^{-sigma h} evaluated in log space.
inline double degree_weight_term(double sigma_h, int k) {
    if (!(sigma_h > 0.0)) return 0.0;
    const double log_term = k * std::log(sigma_h) - sigma_h;
    return log_term < -745.0 ? 0.0 : std::exp(log_term);
}

} // namespace detail

// L(s, sigma) = s E[(sigma h(W))^k exp(-sigma h(W))].
inline double evaluate_L(const MomentCache& mc, double s, double sigma, int k,
                         std::size_t* eval_count = nullptr) {
    if (!(sigma > 0.0)) throw std::domain_error("evaluate_L: sigma must be positive");
    if (k < 0 || k > 20) throw std::domain_error("evaluate_L: supported degrees are 0..20");
    if (eval_count) ++*eval_count;
    const WeightLaw& law = mc.law();
    if (law.is_point_mass())
        return s * detail::degree_weight_term(sigma * mc.h(law.w0), k);

    const double rel_tol = mc.quadrature_tol();
    auto term = [&](double w) {
        return detail::degree_weight_term(sigma * mc.h(w), k) * detail::left_density(law, w);
    };

    // Tail part over (b, inf) via w = b/t.
    const QuadratureResult tail = integrate(
        [&](double t) {
            const double w = law.b / t;
            return detail::degree_weight_term(sigma * mc.h(w), k) *
                   detail::tail_density(law, w) * law.b / (t * t);
        },
        1e-12, 1.0, rel_tol);

    // Left part over (w_cut, b) in geometric slices; extend w_cut downward
    // until the analytic remainder bound is negligible. The remainder of
    // (sigma h)^k e^{-sigma h} below w_cut is bounded by F(w_cut) times the
    // maximum of the degree weight term on (0, w_cut].
    double w_cut = law.b;
    double left_value = 0.0;
    std::size_t guard = 0;
    const double stretched_floor_w =
        law.family == WeightFamily::StretchedExponentialLeft ? detail::stretched_floor(law)
                                                             : 0.0;
    for (;;) {
        const double next_cut = std::max(w_cut / 4096.0, stretched_floor_w);
        if (next_cut < w_cut) {
            const QuadratureResult part = integrate_geometric(term, next_cut, w_cut, rel_tol);
            left_value += part.value;
            w_cut = next_cut;
        }
        // Supremum of (sigma h)^k e^{-sigma h} over (0, w_cut]: h is
        // increasing, so the argument ranges over (0, sigma h(w_cut)]; the
        // map x -> x^k e^{-x} peaks at x = k.
        const double sigma_h_cut = sigma * mc.h(w_cut);
        double max_term;
        if (k == 0)
            max_term = 1.0;
        else if (sigma_h_cut > k)
            max_term = std::exp(k * (std::log(static_cast<double>(k)) - 1.0));
        else
            max_term = detail::degree_weight_term(sigma_h_cut, k);
        const double remainder = cdf(law, w_cut) * max_term;
        const double scale = std::abs(left_value) + std::abs(tail.value);
        if (remainder <= 0.25 * rel_tol * scale || w_cut <= stretched_floor_w * 1.0000001)
            break;
        if (w_cut < 1e-280 || ++guard > 60)
            throw QuadratureError("evaluate_L: remainder bound not attainable (sigma=" +
                                  std::to_string(sigma) + ", w_cut=" + std::to_string(w_cut) +
                                  ")");
    }
    return s * (left_value + tail.value);
}

struct ScalingSolution {
    double s = 0.0;
    int k = 0;
    double sigma_s = 0.0; // s * v_{s,k}
    double v_s = 0.0;
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
    double residual = 0.0; // (L(sigma_s) - k!) / k!
    std::size_t n_evals = 0;
    bool largest_root_certified = false;
};

// Largest root of the scaling equation. Upper bracket grown as C log(s)/w_s,
// descent grid ratio 1.05, final bisection to 1e-12 relative width, then a
// 50-point probe certifies no larger root up to the bracket.
inline ScalingSolution solve_scg(const MomentCache& mc, double s, int k) {
    if (!(s > 0.5)) throw std::domain_error("solve_scg: requires s > 1/2");
    const double kfact = static_cast<double>(factorial(k));
    std::size_t n_evals = 0;
    auto L = [&](double sigma) { return evaluate_L(mc, s, sigma, k, &n_evals); };

    const double w_s = left_quantile_ws(mc.law(), s);
    double sigma_hi = 4.0 * std::max(std::log(s), 1.0) / w_s;
    int grow = 0;
    while (L(sigma_hi) >= kfact) {
        sigma_hi *= 4.0;
        if (++grow > 40)
            throw NoSolutionError("solve_scg: no upper bracket with L < k! found");
    }

    constexpr double descent_ratio = 1.05;
    const double sigma_floor = sigma_hi * 1e-18;
    double above = sigma_hi; // L(above) < k!
    double below = sigma_hi / descent_ratio;
    while (L(below) < kfact) {
        above = below;
        below /= descent_ratio;
        if (below < sigma_floor)
            throw NoSolutionError(
                "solve_scg: no probe point with L >= k!; no solution at this intensity");
    }

    double lo = below, hi = above;
    while (hi - lo > 1e-12 * hi) {
        const double mid = 0.5 * (lo + hi);
        if (L(mid) >= kfact) lo = mid; else hi = mid;
    }

    ScalingSolution sol;
    sol.s = s;
    sol.k = k;
    sol.sigma_s = 0.5 * (lo + hi);
    sol.v_s = sol.sigma_s / s;
    sol.bracket_lo = below;
    sol.bracket_hi = sigma_hi;
    sol.residual = (L(sol.sigma_s) - kfact) / kfact;

    sol.largest_root_certified = true;
    const double probe_lo = sol.sigma_s * (1.0 + 1e-6);
    const double ratio = std::pow(sigma_hi / probe_lo, 1.0 / 49.0);
    double probe = probe_lo;
    for (int i = 0; i < 50; ++i) {
        if (L(probe) >= kfact) {
            sol.largest_root_certified = false;
            break;
        }
        probe *= ratio;
    }
    sol.n_evals = n_evals;
    return sol;
}

// Lemma-style limit constant for polynomial left tails:
// sigma_s^rho / s -> p rho Gamma(k + rho) / (k! mu_a^rho).
inline double asymptotic_sigma_polynomial(const MomentCache& mc, int k) {
    const WeightLaw& law = mc.law();
    if (law.family != WeightFamily::PolynomialLeft)
        throw std::domain_error("asymptotic_sigma_polynomial: polynomial-left family only");
    return law.p * law.rho * std::tgamma(k + law.rho) /
           (static_cast<double>(factorial(k)) * std::pow(mc.mu_a(), law.rho));
}

// Empirical bracket of sigma_s / log(s)^{1+1/rho} over a solved s-grid; the
// stretched-exponential family only admits a boundedness statement.
inline std::pair<double, double> asymptotic_sigma_stretched(
    const MomentCache& mc, int k, const std::vector<double>& s_grid = {1e3, 1e4, 1e5, 1e6, 1e7}) {
    if (mc.law().family != WeightFamily::StretchedExponentialLeft)
        throw std::domain_error("asymptotic_sigma_stretched: stretched-exponential family only");
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (double s : s_grid) {
        const ScalingSolution sol = solve_scg(mc, s, k);
        const double ratio = sol.sigma_s / std::pow(std::log(s), 1.0 + 1.0 / mc.law().rho);
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
    }
    return {lo, hi};
}

struct AssumptionRow {
    double s = 0.0;
    double sigma_s = 0.0;
    double w_s = 0.0;
    double a1 = 0.0; // sigma_s w_s^eta / log s          (A.1: should diverge)
    double a2 = 0.0; // log(s) w_s^{-(K+1)(1-eta)} F(w_s^eta)  (A.2: should vanish)
    double a3 = 0.0; // log(s) w_s^{(K delta - 1)(1-eta)}      (A.3: should vanish)
};

struct AssumptionReport {
    double eta = 0.0;
    double K = 0.0;
    double delta = 0.0;
    std::vector<AssumptionRow> rows;
    double trend_slope[3] = {0.0, 0.0, 0.0}; // log-log slopes of A.1..A.3
    bool pass_a1 = false; // increasing and last value > 10
    bool pass_a2 = false; // decreasing and last value < 0.1
    bool pass_a3 = false;
    double recommended_eta = 0.0;
    double recommended_K = 0.0;
};

// Closed-form (eta, K) recommendations for the two built-in families.
inline std::pair<double, double> recommended_eta_K(const WeightLaw& law, double delta) {
    switch (law.family) {
        case WeightFamily::PolynomialLeft: {
            const double K = 2.0 / delta;
            const double lower = ((1.0 + K) / law.rho) / (1.0 + (1.0 + K) / law.rho);
            return {0.5 * (lower + 1.0), K};
        }
        case WeightFamily::StretchedExponentialLeft:
            return {0.5, 1.5 * (2.0 * law.rho + 1.0) / delta};
        case WeightFamily::PointMass: break;
    }
    throw std::domain_error("recommended_eta_K: no recommendation for a point mass");
}

inline AssumptionReport check_assumptions(const MomentCache& mc, int k, double eta, double K,
                                          const std::vector<double>& s_grid) {
    if (!(eta > 0.0 && eta < 1.0)) throw std::domain_error("check_assumptions: eta in (0,1)");
    if (!(K > 0.0)) throw std::domain_error("check_assumptions: K must be positive");
    if (s_grid.size() < 4 || !std::is_sorted(s_grid.begin(), s_grid.end()))
        throw std::domain_error("check_assumptions: need an increasing s-grid of >= 4 points");
    const WeightLaw& law = mc.law();
    const double delta = 0.5 * (mc.alpha() - 1.0);

    AssumptionReport report;
    report.eta = eta;
    report.K = K;
    report.delta = delta;
    const auto rec = recommended_eta_K(law, delta);
    report.recommended_eta = rec.first;
    report.recommended_K = rec.second;

    for (double s : s_grid) {
        AssumptionRow row;
        row.s = s;
        row.sigma_s = solve_scg(mc, s, k).sigma_s;
        row.w_s = left_quantile_ws(law, s);
        const double log_s = std::log(s);
        row.a1 = row.sigma_s * std::pow(row.w_s, eta) / log_s;
        row.a2 = log_s * std::pow(row.w_s, -(K + 1.0) * (1.0 - eta)) * cdf(law, std::pow(row.w_s, eta));
        row.a3 = log_s * std::pow(row.w_s, (K * delta - 1.0) * (1.0 - eta));
        report.rows.push_back(row);
    }

    auto slope_of = [&](auto value) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        std::size_t n = 0;
        for (const AssumptionRow& row : report.rows) {
            const double v = value(row);
            if (!(v > 0.0)) continue;
            const double x = std::log(row.s), y = std::log(v);
            sx += x; sy += y; sxx += x * x; sxy += x * y;
            ++n;
        }
        if (n < 2) return 0.0;
        return (n * sxy - sx * sy) / (n * sxx - sx * sx);
    };
    report.trend_slope[0] = slope_of([](const AssumptionRow& r) { return r.a1; });
    report.trend_slope[1] = slope_of([](const AssumptionRow& r) { return r.a2; });
    report.trend_slope[2] = slope_of([](const AssumptionRow& r) { return r.a3; });

    auto monotone = [&](auto value, bool increasing) {
        for (std::size_t i = 1; i < report.rows.size(); ++i) {
            const double prev = value(report.rows[i - 1]);
            const double cur = value(report.rows[i]);
            if (increasing ? cur <= prev : cur >= prev) return false;
        }
        return true;
    };
    const AssumptionRow& last = report.rows.back();
    report.pass_a1 = monotone([](const AssumptionRow& r) { return r.a1; }, true) && last.a1 > 10.0;
    report.pass_a2 = monotone([](const AssumptionRow& r) { return r.a2; }, false) && last.a2 < 0.1;
    report.pass_a3 = monotone([](const AssumptionRow& r) { return r.a3; }, false) && last.a3 < 0.1;
    return report;
}

} // namespace wrcm
