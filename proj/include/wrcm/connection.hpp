#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "wrcm/quadrature.hpp"
#include "wrcm/weights.hpp"

// Connection machinery: preferential-attachment kernel kappa, profile phi
// with closed-form tail integral, the pair connection probability
// phi(|B_r|/(v_s kappa)), and the quadrature-certified truncation radius that
// bounds the expected number of dropped long edges.

namespace wrcm {

enum class ProfileFamily {
    TruncatedPareto, // phi(r) = min(1, c r^-alpha), c = ((alpha-1)/alpha)^alpha
    SmoothPareto,    // phi(r) = (alpha-1)(1+r)^-alpha, requires alpha <= 2
};

struct ConnectionSpec {
    double a = 0.0;
    double alpha = 2.0;
    ProfileFamily profile = ProfileFamily::TruncatedPareto;

    ConnectionSpec(double a_, double alpha_, ProfileFamily profile_)
        : a(a_), alpha(alpha_), profile(profile_) {
        if (!(a >= 0.0)) throw std::domain_error("kernel exponent a must be >= 0");
        if (!(alpha > 1.0)) throw std::domain_error("profile tail index alpha must be > 1");
        if (profile == ProfileFamily::SmoothPareto && alpha > 2.0)
            throw std::domain_error(
                "smooth Pareto profile needs alpha <= 2 (normalization would force phi(0) > 1)");
        check_normalization();
    }

    double delta() const { return 0.5 * (alpha - 1.0); }

    // Prefactor of the truncated-Pareto tail; makes the unit integral exact.
    double pareto_prefactor() const { return std::pow((alpha - 1.0) / alpha, alpha); }

    // Edge of the phi == 1 plateau (truncated Pareto only).
    double plateau_edge() const { return (alpha - 1.0) / alpha; }

  private:
    void check_normalization() const;
};

inline double kappa(const ConnectionSpec& spec, double w1, double w2) {
    const double lo = std::min(w1, w2);
    const double hi = std::max(w1, w2);
    return lo * std::pow(hi, spec.a);
}

inline double phi(const ConnectionSpec& spec, double r) {
    if (!(r >= 0.0)) throw std::domain_error("phi: argument must be >= 0");
    switch (spec.profile) {
        case ProfileFamily::TruncatedPareto: {
            if (r <= spec.plateau_edge()) return 1.0;
            if (spec.alpha == 2.0) {
                const double c = spec.pareto_prefactor();
                return c / (r * r);
            }
            return spec.pareto_prefactor() * std::pow(r, -spec.alpha);
        }
        case ProfileFamily::SmoothPareto:
            return (spec.alpha - 1.0) * std::pow(1.0 + r, -spec.alpha);
    }
    return 0.0;
}

// Tail integral of the profile: int_t^inf phi(u) du, closed form per family.
inline double phi_tail(const ConnectionSpec& spec, double t) {
    if (!(t >= 0.0)) throw std::domain_error("phi_tail: argument must be >= 0");
    switch (spec.profile) {
        case ProfileFamily::TruncatedPareto: {
            const double r0 = spec.plateau_edge();
            const double tail_at_r0 = r0 / (spec.alpha - 1.0);
            if (t <= r0) return (r0 - t) + tail_at_r0;
            return spec.pareto_prefactor() * std::pow(t, 1.0 - spec.alpha) / (spec.alpha - 1.0);
        }
        case ProfileFamily::SmoothPareto:
            return std::pow(1.0 + t, 1.0 - spec.alpha);
    }
    return 0.0;
}

inline void ConnectionSpec::check_normalization() const {
    // phi integrates to 1 by construction; the quadrature check guards the
    // closed forms against regressions.
    const double r0 =
        profile == ProfileFamily::TruncatedPareto ? plateau_edge() : 0.0;
    const QuadratureResult head = integrate([this](double r) { return phi(*this, r); },
                                            0.0, std::max(r0, 1.0), 1e-12, 0.0);
    const double total = head.value + phi_tail(*this, std::max(r0, 1.0));
    if (std::abs(total - 1.0) > 1e-10)
        throw std::domain_error("profile normalization check failed: integral = " +
                                std::to_string(total));
}

inline double unit_ball_volume(int d) {
    if (d < 1 || d > 3) throw std::domain_error("dimension must be 1, 2 or 3");
    return std::pow(M_PI, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

using Position = std::array<double, 3>;

inline double squared_distance(const Position& x, const Position& y, int d) {
    double r2 = 0.0;
    for (int i = 0; i < d; ++i) {
        const double diff = x[i] - y[i];
        r2 += diff * diff;
    }
    return r2;
}

// Eq.-style connection probability phi(nu_d |x-y|^d / (v_s kappa(wx, wy))).
inline double pair_probability(const ConnectionSpec& spec, double v_s, const Position& x,
                               double wx, const Position& y, double wy, int d) {
    const double r2 = squared_distance(x, y, d);
    if (r2 == 0.0) throw std::domain_error("pair_probability: coincident points (self-loop)");
    if (!(v_s > 0.0)) throw std::domain_error("pair_probability: v_s must be positive");
    const double dist = std::sqrt(r2);
    const double ball_volume = unit_ball_volume(d) * std::pow(dist, d);
    return phi(spec, ball_volume / (v_s * kappa(spec, wx, wy)));
}

// E[g(W)] for the glued families by density quadrature, split at b.
template <typename G>
double expect_weight(const WeightLaw& law, G&& g, double rel_tol = 1e-9) {
    if (law.is_point_mass()) return g(law.w0);
    const double floor = law.family == WeightFamily::StretchedExponentialLeft
                             ? detail::stretched_floor(law)
                             : law.b * 0x1.0p-60;
    const QuadratureResult left = integrate_geometric(
        [&](double w) { return g(w) * detail::left_density(law, w); },
        std::min(floor, 0.5 * law.b), law.b, rel_tol);
    const QuadratureResult tail = integrate(
        [&](double t) {
            const double w = law.b / t;
            return g(w) * detail::tail_density(law, w) * law.b / (t * t);
        },
        1e-12, 1.0, rel_tol);
    return left.value + tail.value;
}

// Expected number of neighbors of a point of weight w beyond distance R:
// s v_s E[kappa(w, W) phi_tail(nu_d R^d / (v_s kappa(w, W)))].
inline double missed_degree(const ConnectionSpec& spec, const WeightLaw& law, double w,
                            double s, double v_s, double R, int d) {
    const double ball = unit_ball_volume(d) * std::pow(R, d);
    return s * v_s *
           expect_weight(law, [&](double wp) {
               const double kap = kappa(spec, w, wp);
               return kap * phi_tail(spec, ball / (v_s * kap));
           });
}

// Same quantity for a typical (weight-averaged) point.
inline double missed_degree_typical(const ConnectionSpec& spec, const WeightLaw& law,
                                    double s, double v_s, double R, int d) {
    return expect_weight(
        law, [&](double wo) { return missed_degree(spec, law, wo, s, v_s, R, d) / s; },
        1e-8) * s;
}

// Expected degree of a typical point, s v_s E[kappa(W, W')] = s v_s E[h(W)].
inline double expected_mean_degree(const ConnectionSpec& spec, const WeightLaw& law,
                                   double s, double v_s) {
    return s * v_s *
           expect_weight(law, [&](double wo) { return h_of_w(law, spec.a, wo, 1e-10); }, 1e-9);
}

namespace detail {

template <typename Missed>
double bisect_truncation_radius(Missed&& missed, double eps) {
    constexpr double r_floor = 1e-9;
    if (!(eps > 0.0)) throw std::domain_error("truncation budget eps must be positive");
    if (missed(r_floor) <= eps) return r_floor; // vacuous budget
    double lo = r_floor, hi = 1.0;
    int grow = 0;
    while (missed(hi) > eps) {
        lo = hi;
        hi *= 2.0;
        if (++grow > 90)
            throw std::runtime_error("truncation_radius: budget unreachable with finite R");
    }
    while (hi - lo > 1e-9 * hi) {
        const double mid = 0.5 * (lo + hi);
        if (missed(mid) > eps) lo = mid; else hi = mid;
    }
    return hi;
}

} // namespace detail

// Smallest R (up to bisection resolution) such that the expected number of
// model edges longer than R with an endpoint in the unit cube is <= eps.
// The Mecke bound counts s * (expected truncated-away degree of a typical
// point), evaluated by two-dimensional quadrature over the weight law.
inline double truncation_radius(const ConnectionSpec& spec, const WeightLaw& law, double s,
                                double v_s, double eps, int d) {
    if (!law.is_point_mass() && !(law.beta > spec.a * spec.alpha))
        throw std::domain_error("truncation_radius: requires beta > a*alpha");
    return detail::bisect_truncation_radius(
        [&](double R) { return s * missed_degree_typical(spec, law, s, v_s, R, d); }, eps);
}

// Fraction variant: R such that the expected truncated-away degree of a
// typical point is <= frac * (expected degree of a typical point). Scales
// sanely across intensity grids where the absolute edge budget does not.
inline double truncation_radius_fraction(const ConnectionSpec& spec, const WeightLaw& law,
                                         double s, double v_s, double frac, int d) {
    const double budget = frac * expected_mean_degree(spec, law, s, v_s);
    return detail::bisect_truncation_radius(
        [&](double R) { return missed_degree_typical(spec, law, s, v_s, R, d); }, budget);
}

} // namespace wrcm
