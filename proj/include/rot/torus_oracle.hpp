#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <sstream>

#include "rot/dual_solver.hpp"
#include "rot/errors.hpp"
#include "rot/measures.hpp"

namespace rot {

namespace detail {

inline void check_oracle_args(int d, double p, double epsilon) {
    if (d < 1) throw InvalidArgument("torus oracle: dimension must be >= 1");
    if (!(p > 1.0 && p <= 2.0)) throw InvalidArgument("torus oracle: p must lie in (1,2]");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InvalidArgument("torus oracle: epsilon must be positive");
}

inline double simpson_step(const std::function<double(double)>& f, double a, double fa, double b, double fb,
                           double m, double fm, double whole, double tol, int depth) {
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
           simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson with Richardson correction; `rel_tol` is relative to a coarse first estimate.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double rel_tol,
                               int max_depth = 48) {
    const double fa = f(a), fb = f(b), m = 0.5 * (a + b), fm = f(m);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // seed the tolerance from a 64-panel composite rule so a lucky 3-point estimate cannot stop early
    double scale = 0.0;
    const int panels = 64;
    for (int k = 0; k < panels; ++k) scale += std::abs(f(a + (b - a) * (k + 0.5) / panels));
    scale *= (b - a) / panels;
    const double tol = rel_tol * std::max(scale, std::abs(whole));
    return detail::simpson_step(f, a, fa, b, fb, m, fm, whole, tol, max_depth);
}

/// Surface area of the unit sphere in R^d: 2 pi^{d/2} / Gamma(d/2).
inline double unit_sphere_area(int d) {
    return 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d);
}

/// Left side of the constant equation, int_{T^d} (2C - d(0,z)^2/2)_+^{q-1} dz, by radial reduction.
/// Valid while the support radius 2 sqrt(C) stays below 1/2.
inline double torus_marginal_integral(int d, double q, double c) {
    if (!(c > 0.0)) return 0.0;
    const double radius = 2.0 * std::sqrt(c);
    const auto integrand = [=](double r) {
        return positive_power(2.0 * c - 0.5 * r * r, q - 1.0) * (d == 1 ? 1.0 : std::pow(r, d - 1));
    };
    return unit_sphere_area(d) * adaptive_simpson(integrand, 0.0, radius, 1e-13);
}

/// Prefactor of eps^{2/(d(p-1)+2)} in the closed form for C_eps.
inline double torus_constant_coefficient(int d, double p) {
    const double q = p / (p - 1.0);
    const double half_d = 0.5 * d;
    const double base = std::tgamma(half_d + q) * std::pow(q, q - 1.0) /
                        (std::pow(std::numbers::pi, half_d) * std::tgamma(q) * std::pow(2.0, q + d - 1.0));
    return std::pow(base, 1.0 / (q - 1.0 + half_d));
}

/// Closed-form dual constant C_eps for self-transport of Lebesgue measure on T^d.
inline double c_eps_closed_form(int d, double p, double epsilon) {
    detail::check_oracle_args(d, p, epsilon);
    return torus_constant_coefficient(d, p) * std::pow(epsilon, 2.0 / (d * (p - 1.0) + 2.0));
}

/// C_eps by bisection on the constant equation with quadrature; independent of the closed form.
inline double c_eps_quadrature(int d, double p, double epsilon) {
    detail::check_oracle_args(d, p, epsilon);
    const SolverParams prm(epsilon, p);
    const double kappa = prm.kappa();
    double lo = 0.0, hi = 1.0 / 16.0;
    if (torus_marginal_integral(d, prm.q(), hi) < kappa) {
        std::ostringstream msg;
        msg << "torus oracle: epsilon = " << epsilon << " puts the support ball on the cut locus (R_eps >= 1/2)";
        throw OutOfRegime(msg.str());
    }
    for (int it = 0; it < 200 && hi - lo > 4e-16 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (torus_marginal_integral(d, prm.q(), mid) < kappa)
            lo = mid;
        else
            hi = mid;
    }
    const double c = 0.5 * (lo + hi);
    if (!(2.0 * std::sqrt(c) < 0.5)) throw OutOfRegime("torus oracle: root lies outside the cut-locus-free regime");
    return c;
}

struct TorusSolution {
    int d = 1;
    double p = 2.0;
    double q = 2.0;
    double epsilon = 0.0;
    double c_eps = 0.0;
    double r_eps = 0.0;
    /// R_eps < 1/2: the support ball avoids the cut locus.
    bool valid = false;

    static TorusSolution make(int d, double p, double epsilon) {
        TorusSolution s;
        s.d = d;
        s.p = p;
        s.q = p / (p - 1.0);
        s.epsilon = epsilon;
        s.c_eps = c_eps_closed_form(d, p, epsilon);
        s.r_eps = 2.0 * std::sqrt(s.c_eps);
        s.valid = s.r_eps < 0.5;
        return s;
    }

    double kappa() const { return std::pow(epsilon, q - 1.0) * std::pow(q, q - 1.0); }
};

/// Exact plan density (2C_eps - d(x,y)^2/2)_+^{q-1} / (eps^{q-1} q^{q-1}).
inline double oracle_density(std::span<const double> x, std::span<const double> y, const TorusSolution& sol) {
    if (!sol.valid) throw OutOfRegime("torus oracle: closed form not asserted for R_eps >= 1/2");
    const double c = 0.5 * squared_distance(x, y, true);
    return positive_power(2.0 * sol.c_eps - c, sol.q - 1.0) / sol.kappa();
}

}  // namespace rot
