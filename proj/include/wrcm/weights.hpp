#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "wrcm/quadrature.hpp"
#include "wrcm/rng.hpp"

// Weight distributions: a configurable left tail glued to a Pareto right
// tail at w = b, plus a degenerate point mass used as a solver oracle. The
// truncated moments mu_plus(w) = E[1{W>=w} W^a], mu_minus(w) = E[1{W<w} W]
// and h(w) = w mu_plus(w) + w^a mu_minus(w) = E[kappa(w, W)] drive the
// scaling equation and the truncation budgets.

namespace wrcm {

enum class WeightFamily {
    PolynomialLeft,           // F(w) = p w^rho for w <= b
    StretchedExponentialLeft, // F(w) = p exp(-w^-rho) for w <= b
    PointMass,                // W == w0
};

struct WeightLaw {
    WeightFamily family = WeightFamily::PolynomialLeft;
    double p = 1.0;
    double rho = 1.0;
    double b = 1.0;
    double beta = 1.0;
    double w0 = 1.0;

    static WeightLaw polynomial_left(double p, double rho, double b, double beta) {
        WeightLaw law{WeightFamily::PolynomialLeft, p, rho, b, beta, 0.0};
        law.validate();
        return law;
    }

    static WeightLaw stretched_exponential_left(double p, double rho, double b, double beta) {
        WeightLaw law{WeightFamily::StretchedExponentialLeft, p, rho, b, beta, 0.0};
        law.validate();
        return law;
    }

    static WeightLaw point_mass(double w0) {
        WeightLaw law;
        law.family = WeightFamily::PointMass;
        law.w0 = w0;
        law.validate();
        return law;
    }

    bool is_point_mass() const { return family == WeightFamily::PointMass; }

    // Mass left of the glue point.
    double cdf_at_b() const {
        switch (family) {
            case WeightFamily::PolynomialLeft: return p * std::pow(b, rho);
            case WeightFamily::StretchedExponentialLeft:
                return p * std::exp(-std::pow(b, -rho));
            case WeightFamily::PointMass: return w0 <= b ? 1.0 : 0.0;
        }
        return 0.0;
    }

    void validate() const {
        if (family == WeightFamily::PointMass) {
            if (!(w0 > 0.0) || !std::isfinite(w0))
                throw std::domain_error("weight law: point mass location must be positive");
            return;
        }
        if (!(p > 0.0) || !(rho > 0.0) || !(b > 0.0) || !(beta > 0.0))
            throw std::domain_error("weight law: p, rho, b, beta must be positive");
        const double fb = cdf_at_b();
        if (!(fb < 1.0))
            throw std::domain_error("weight law: mass left of b must satisfy F(b) < 1, got F(b) = " +
                                    std::to_string(fb));
    }
};

namespace detail {

inline void require_positive_weight(double w) {
    if (!std::isfinite(w) || !(w > 0.0))
        throw std::domain_error("weight argument must be positive and finite");
}

// Below this point the stretched-exponential density underflows to zero.
inline double stretched_floor(const WeightLaw& law) {
    return std::pow(745.0, -1.0 / law.rho);
}

// Left-branch density on (0, b].
inline double left_density(const WeightLaw& law, double w) {
    switch (law.family) {
        case WeightFamily::PolynomialLeft:
            return law.p * law.rho * std::pow(w, law.rho - 1.0);
        case WeightFamily::StretchedExponentialLeft: {
            const double t = std::pow(w, -law.rho);
            if (t > 745.0) return 0.0;
            return law.p * law.rho * std::exp(-t) * std::pow(w, -law.rho - 1.0);
        }
        case WeightFamily::PointMass: break;
    }
    throw std::logic_error("left_density: point mass has no density");
}

// Tail density on (b, inf).
inline double tail_density(const WeightLaw& law, double w) {
    const double tail_mass = 1.0 - law.cdf_at_b();
    return tail_mass * (law.beta / law.b) * std::pow(w / law.b, -law.beta - 1.0);
}

// integral of u^r against the left-branch density over (0, min(w, b)].
inline double left_partial_moment(const WeightLaw& law, double r, double w,
                                  double tol = 1e-12) {
    const double upper = std::min(w, law.b);
    if (upper <= 0.0) return 0.0;
    switch (law.family) {
        case WeightFamily::PolynomialLeft:
            return law.p * law.rho * std::pow(upper, r + law.rho) / (r + law.rho);
        case WeightFamily::StretchedExponentialLeft: {
            // Substituting t = u^-rho turns the integral into
            // p * int_{upper^-rho}^{inf} t^{-r/rho} e^{-t} dt.
            const double t_lo = std::pow(upper, -law.rho);
            if (t_lo > 745.0) return 0.0;
            const double s_exp = -r / law.rho;
            // e^{-t} makes anything past t_lo + ~60 log-decades irrelevant.
            const double t_hi = t_lo + 80.0 + 10.0 * std::abs(s_exp);
            auto integrand = [s_exp](double t) { return std::pow(t, s_exp) * std::exp(-t); };
            const QuadratureResult q = integrate(integrand, t_lo, t_hi, tol, 0.0);
            return law.p * q.value;
        }
        case WeightFamily::PointMass: break;
    }
    throw std::logic_error("left_partial_moment: point mass");
}

// integral of u^r against the tail density over (x, inf); requires beta > r.
inline double tail_moment_above(const WeightLaw& law, double r, double x) {
    if (law.beta <= r)
        throw std::domain_error("infinite moment: Pareto tail index beta <= moment order");
    const double lo = std::max(x, law.b);
    const double tail_mass = 1.0 - law.cdf_at_b();
    return tail_mass * law.beta / (law.beta - r) * std::pow(law.b, law.beta) *
           std::pow(lo, r - law.beta);
}

// integral of u^r against the tail density over (b, min(x, inf)).
inline double tail_moment_between(const WeightLaw& law, double r, double x) {
    if (x <= law.b) return 0.0;
    const double tail_mass = 1.0 - law.cdf_at_b();
    const double scale = tail_mass * law.beta * std::pow(law.b, law.beta);
    if (std::abs(law.beta - r) < 1e-14)
        return scale * std::pow(law.b, r - law.beta) * std::log(x / law.b);
    return scale * (std::pow(law.b, r - law.beta) - std::pow(x, r - law.beta)) /
           (law.beta - r);
}

} // namespace detail

inline double cdf(const WeightLaw& law, double w) {
    detail::require_positive_weight(w);
    switch (law.family) {
        case WeightFamily::PointMass: return w >= law.w0 ? 1.0 : 0.0;
        case WeightFamily::PolynomialLeft:
            if (w <= law.b) return law.p * std::pow(w, law.rho);
            break;
        case WeightFamily::StretchedExponentialLeft:
            if (w <= law.b) {
                const double t = std::pow(w, -law.rho);
                return t > 745.0 ? 0.0 : law.p * std::exp(-t);
            }
            break;
    }
    return 1.0 - (1.0 - law.cdf_at_b()) * std::pow(w / law.b, -law.beta);
}

// Smallest w with F(w) >= q; closed-form inversion per branch.
inline double quantile(const WeightLaw& law, double q) {
    if (!std::isfinite(q) || !(q > 0.0) || !(q < 1.0))
        throw std::domain_error("quantile: q must lie in (0,1)");
    if (law.family == WeightFamily::PointMass) return law.w0;
    const double fb = law.cdf_at_b();
    if (q <= fb) {
        if (law.family == WeightFamily::PolynomialLeft)
            return std::pow(q / law.p, 1.0 / law.rho);
        return std::pow(std::log(law.p / q), -1.0 / law.rho);
    }
    return law.b * std::pow((1.0 - q) / (1.0 - fb), -1.0 / law.beta);
}

// w_s, the 1/(2s)-quantile: F(w_s) = 1/(2s).
inline double left_quantile_ws(const WeightLaw& law, double s) {
    if (!(s > 0.5)) throw std::domain_error("left_quantile_ws: requires s > 1/2");
    return quantile(law, 1.0 / (2.0 * s));
}

inline std::vector<double> sample(const WeightLaw& law, RandomStream& stream, std::size_t n) {
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(quantile(law, stream.next_open_double()));
    return out;
}

// E[W^r]; requires beta > r for the glued families.
inline double moment(const WeightLaw& law, double r, double tol = 1e-12) {
    if (law.family == WeightFamily::PointMass) return std::pow(law.w0, r);
    return detail::left_partial_moment(law, r, law.b, tol) +
           detail::tail_moment_above(law, r, law.b);
}

// mu_plus(w) = E[1{W >= w} W^a].
inline double mu_plus(const WeightLaw& law, double a, double w, double tol = 1e-12) {
    detail::require_positive_weight(w);
    if (law.family == WeightFamily::PointMass)
        return law.w0 >= w ? std::pow(law.w0, a) : 0.0;
    if (w <= law.b) {
        const double left_above = detail::left_partial_moment(law, a, law.b, tol) -
                                  detail::left_partial_moment(law, a, w, tol);
        return std::max(left_above, 0.0) + detail::tail_moment_above(law, a, law.b);
    }
    return detail::tail_moment_above(law, a, w);
}

// mu_minus(w) = E[1{W < w} W].
inline double mu_minus(const WeightLaw& law, double w, double tol = 1e-12) {
    detail::require_positive_weight(w);
    if (law.family == WeightFamily::PointMass) return law.w0 < w ? law.w0 : 0.0;
    if (w <= law.b) return detail::left_partial_moment(law, 1.0, w, tol);
    return detail::left_partial_moment(law, 1.0, law.b, tol) +
           detail::tail_moment_between(law, 1.0, w);
}

// h(w) = w mu_plus(w) + w^a mu_minus(w) = E[kappa(w, W)].
inline double h_of_w(const WeightLaw& law, double a, double w, double tol = 1e-12) {
    return w * mu_plus(law, a, w, tol) + std::pow(w, a) * mu_minus(law, w, tol);
}

namespace detail {

// Piecewise Chebyshev interpolant in x = log(w); barycentric form on
// Chebyshev-Lobatto nodes. Used to make the stretched-exponential truncated
// moments cheap inside quadrature loops.
class LogChebInterpolant {
  public:
    static constexpr int kNodes = 17;

    template <typename F>
    LogChebInterpolant(F&& f, double w_lo, double w_hi, double abs_tol) {
        build(f, std::log(w_lo), std::log(w_hi), abs_tol, 0);
        std::sort(pieces_.begin(), pieces_.end(),
                  [](const Piece& u, const Piece& v) { return u.x0 < v.x0; });
    }

    LogChebInterpolant() = default;

    double operator()(double w) const {
        const double x = std::log(w);
        std::size_t lo = 0, hi = pieces_.size();
        while (hi - lo > 1) {
            const std::size_t mid = (lo + hi) / 2;
            if (pieces_[mid].x0 <= x) lo = mid; else hi = mid;
        }
        return pieces_[lo].eval(x);
    }

  private:
    struct Piece {
        double x0, x1;
        std::array<double, kNodes> values;

        double node(int j) const {
            const double t = std::cos(M_PI * j / (kNodes - 1));
            return 0.5 * (x0 + x1) + 0.5 * (x1 - x0) * t;
        }

        double eval(double x) const {
            // Barycentric weights for Lobatto nodes: (-1)^j, halved at ends.
            double num = 0.0, den = 0.0;
            for (int j = 0; j < kNodes; ++j) {
                const double xj = node(j);
                double wj = (j % 2 == 0) ? 1.0 : -1.0;
                if (j == 0 || j == kNodes - 1) wj *= 0.5;
                const double diff = x - xj;
                if (std::abs(diff) < 1e-300) return values[j];
                const double q = wj / diff;
                num += q * values[j];
                den += q;
            }
            return num / den;
        }
    };

    template <typename F>
    void build(F&& f, double x0, double x1, double abs_tol, int depth) {
        Piece piece{x0, x1, {}};
        for (int j = 0; j < kNodes; ++j) piece.values[j] = f(std::exp(piece.node(j)));
        double worst = 0.0;
        for (int j = 0; j < kNodes - 1; ++j) {
            const double xm = 0.5 * (piece.node(j) + piece.node(j + 1));
            worst = std::max(worst, std::abs(piece.eval(xm) - f(std::exp(xm))));
        }
        if (worst <= abs_tol || depth >= 12) {
            pieces_.push_back(piece);
            return;
        }
        const double xm = 0.5 * (x0 + x1);
        build(f, x0, xm, abs_tol, depth + 1);
        build(f, xm, x1, abs_tol, depth + 1);
    }

    std::vector<Piece> pieces_;
};

} // namespace detail

// Precomputed moments for a (law, kernel exponent, profile index) triple,
// with fast truncated-moment evaluators for the quadrature-heavy callers.
class MomentCache {
  public:
    MomentCache(const WeightLaw& law, double a, double alpha, double quadrature_tol = 1e-10)
        : law_(law), a_(a), alpha_(alpha), tol_(quadrature_tol) {
        if (!(a >= 0.0)) throw std::domain_error("kernel exponent a must be >= 0");
        if (!law.is_point_mass() && !(law.beta > a * alpha))
            throw std::domain_error("weight tail too heavy: requires beta > a*alpha");
        mu_a_ = moment(law, a, tol_);
        mu_a_alpha_ = moment(law, a * alpha, tol_);
        if (law_.family == WeightFamily::StretchedExponentialLeft) {
            const double w_lo = std::min(detail::stretched_floor(law_), 0.99 * law_.b);
            const double scale = std::max(mu_a_, 1.0);
            left_above_a_ = detail::LogChebInterpolant(
                [this](double w) {
                    return detail::left_partial_moment(law_, a_, law_.b, 0.1 * tol_) -
                           detail::left_partial_moment(law_, a_, w, 0.1 * tol_);
                },
                w_lo, law_.b, 1e-13 * scale);
            left_below_1_ = detail::LogChebInterpolant(
                [this](double w) { return detail::left_partial_moment(law_, 1.0, w, 0.1 * tol_); },
                w_lo, law_.b, 1e-13 * scale);
            interpolated_ = true;
            floor_ = w_lo;
        }
    }

    const WeightLaw& law() const { return law_; }
    double a() const { return a_; }
    double alpha() const { return alpha_; }
    double mu_a() const { return mu_a_; }
    double mu_a_alpha() const { return mu_a_alpha_; }
    double quadrature_tol() const { return tol_; }

    double mu_plus(double w) const {
        if (!interpolated_ || w > law_.b) return wrcm::mu_plus(law_, a_, w, tol_);
        const double left_above =
            w <= floor_ ? detail::left_partial_moment(law_, a_, law_.b, tol_) : left_above_a_(w);
        return std::max(left_above, 0.0) + detail::tail_moment_above(law_, a_, law_.b);
    }

    double mu_minus(double w) const {
        if (!interpolated_ || w > law_.b) return wrcm::mu_minus(law_, w, tol_);
        if (w <= floor_) return 0.0;
        return std::max(left_below_1_(w), 0.0);
    }

    double h(double w) const { return w * mu_plus(w) + std::pow(w, a_) * mu_minus(w); }

  private:
    WeightLaw law_;
    double a_;
    double alpha_;
    double tol_;
    double mu_a_ = 0.0;
    double mu_a_alpha_ = 0.0;
    bool interpolated_ = false;
    double floor_ = 0.0;
    detail::LogChebInterpolant left_above_a_;
    detail::LogChebInterpolant left_below_1_;
};

} // namespace wrcm
