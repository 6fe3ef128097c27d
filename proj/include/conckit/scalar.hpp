#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "conckit/numerics.hpp"

namespace conckit {

/// Piecewise potential: x^2/4 up to the knot at x = 2, x - 1 beyond it.
/// Both branches equal 1 at the knot, so the function is C1 and convex.
inline double psi(double x) {
    if (!std::isfinite(x)) throw std::domain_error("psi: non-finite argument");
    return x <= 2.0 ? 0.25 * x * x : x - 1.0;
}

/// Derivative of psi; never exceeds 1.
inline double psi_prime(double x) {
    if (!std::isfinite(x)) throw std::domain_error("psi_prime: non-finite argument");
    return x <= 2.0 ? 0.5 * x : 1.0;
}

/// phi(p, t) = (p e^t + 1 - p) exp(-(L/2) p (t^2 + 2t)).
/// Equals 1 on both axes p = 0 and t = 0.
inline double phi(double p, double t, double L) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("phi: p must lie in [0, 1]");
    if (!(t >= 0.0) || !std::isfinite(t)) throw std::domain_error("phi: t must be >= 0");
    if (!(L >= 1.0)) throw std::domain_error("phi: L must be >= 1");
    return (p * std::exp(t) + 1.0 - p) * std::exp(-0.5 * L * p * (t * t + 2.0 * t));
}

struct PhiMax {
    double value;
    double p;
    double t;
};

/// Supremum of phi over [0,1] x [0, 1/L], estimated on a grid with a local
/// golden-section polish around the best cell. The polish makes no use of the
/// boundary structure of the maximizer.
inline PhiMax phi_max_detail(double L, int resolution = 1000) {
    if (!(L >= 1.0)) throw std::domain_error("phi_max: L must be >= 1");
    if (resolution < 1000) throw std::invalid_argument("phi_max: resolution must be >= 1000");
    const double tmax = 1.0 / L;
    const double dp = 1.0 / (resolution - 1);
    const double dt = tmax / (resolution - 1);

    PhiMax best{-1.0, 0.0, 0.0};
    for (int i = 0; i < resolution; ++i) {
        const double p = i * dp;
        const double decay = 0.5 * L * p;
        const double lin = 1.0 - p;
        for (int j = 0; j < resolution; ++j) {
            const double t = j * dt;
            const double v = (p * std::exp(t) + lin) * std::exp(-decay * (t * t + 2.0 * t));
            if (v > best.value) best = {v, p, t};
        }
    }

    // Coordinate-wise polish inside the one-cell neighbourhood of the grid
    // maximizer.
    double p = best.p, t = best.t;
    for (int round = 0; round < 3; ++round) {
        const double plo = std::max(0.0, p - dp), phi_hi = std::min(1.0, p + dp);
        p = golden_max([&](double q) { return phi(q, t, L); }, plo, phi_hi, 80);
        const double tlo = std::max(0.0, t - dt), thi = std::min(tmax, t + dt);
        t = golden_max([&](double s) { return phi(p, s, L); }, tlo, thi, 80);
    }
    const double polished = phi(p, t, L);
    if (polished > best.value) best = {polished, p, t};
    return best;
}

inline double phi_max(double L, int resolution = 1000) {
    return phi_max_detail(L, resolution).value;
}

/// d/dp of phi(p, 1/L) at p = 0: e^{1/L} - 1 - (1/L + 2)/2.
/// Negative exactly when the phi inequality has one-sided slack at t = 1/L.
inline double phi_boundary_slope(double L) {
    if (!(L > 0.0)) throw std::domain_error("phi_boundary_slope: L must be > 0");
    const double s = 1.0 / L;
    return std::exp(s) - 1.0 - 0.5 * (s + 2.0);
}

/// Root of phi_boundary_slope on [1.0, 1.2], by bisection to 1e-9.
/// The slope must be strictly negative at L = 1.12; this is checked.
inline double critical_l_boundary() {
    double lo = 1.0, hi = 1.2;
    double flo = phi_boundary_slope(lo);
    if (!(flo > 0.0) || !(phi_boundary_slope(hi) < 0.0))
        throw std::logic_error("critical_l_boundary: bracket does not straddle the root");
    if (!(phi_boundary_slope(1.12) < 0.0))
        throw std::logic_error("critical_l_boundary: slope is not negative at L = 1.12");
    while (hi - lo > 1e-9) {
        const double mid = 0.5 * (lo + hi);
        if (phi_boundary_slope(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

/// u v <= u^2 + psi(v) for u in [0, 1], v >= 0.
inline bool uv_inequality_holds(double u, double v) {
    if (!(u >= 0.0 && u <= 1.0)) throw std::domain_error("uv_inequality_holds: u must lie in [0, 1]");
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::domain_error("uv_inequality_holds: v must be >= 0");
    return u * v <= u * u + psi(v);
}

}  // namespace conckit
