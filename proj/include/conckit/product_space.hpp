#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "conckit/numerics.hpp"
#include "conckit/scalar.hpp"

namespace conckit {

/// Finite base space with atom probabilities mu, raised to the n-th product
/// power. Points of the product are indexed with coordinate 0 as the least
/// significant digit.
struct FiniteProductSpace {
    std::vector<double> mu;
    int n;

    FiniteProductSpace(std::vector<double> atom_probs, int exponent)
        : mu(std::move(atom_probs)), n(exponent) {
        if (mu.empty()) throw std::invalid_argument("FiniteProductSpace: empty atom set");
        if (n < 1) throw std::invalid_argument("FiniteProductSpace: n must be >= 1");
        double sum = 0.0;
        for (double m : mu) {
            if (!std::isfinite(m) || !(m > 0.0))
                throw std::invalid_argument("FiniteProductSpace: atom probabilities must be positive");
            sum += m;
        }
        if (std::fabs(sum - 1.0) > 1e-12)
            throw std::invalid_argument("FiniteProductSpace: atom probabilities must sum to 1");
    }

    int atoms() const { return static_cast<int>(mu.size()); }

    std::uint64_t point_count() const {
        std::uint64_t c = 1;
        for (int i = 0; i < n; ++i) {
            if (c > (1ULL << 62) / mu.size())
                throw std::overflow_error("FiniteProductSpace: point count overflow");
            c *= mu.size();
        }
        return c;
    }

    std::vector<int> point(std::uint64_t index) const {
        std::vector<int> x(n);
        for (int i = 0; i < n; ++i) {
            x[i] = static_cast<int>(index % mu.size());
            index /= mu.size();
        }
        return x;
    }

    std::uint64_t index_of(std::span<const int> x) const {
        std::uint64_t idx = 0;
        for (int i = static_cast<int>(x.size()) - 1; i >= 0; --i)
            idx = idx * mu.size() + static_cast<std::uint64_t>(x[i]);
        return idx;
    }

    double prob(std::span<const int> x) const {
        double p = 1.0;
        for (int d : x) p *= mu[d];
        return p;
    }

    double prob(std::uint64_t index) const {
        double p = 1.0;
        for (int i = 0; i < n; ++i) {
            p *= mu[index % mu.size()];
            index /= mu.size();
        }
        return p;
    }

    void check_point(std::span<const int> x) const {
        if (static_cast<int>(x.size()) != n)
            throw std::invalid_argument("point has wrong number of coordinates");
        for (int d : x)
            if (d < 0 || d >= atoms()) throw std::invalid_argument("point has an invalid atom index");
    }
};

/// Probability weights over an explicit list of product points.
struct SubsetMeasure {
    std::vector<std::uint64_t> points;
    std::vector<double> weights;
};

inline void check_measure(const FiniteProductSpace& space, const SubsetMeasure& nu) {
    if (nu.points.empty() || nu.points.size() != nu.weights.size())
        throw std::invalid_argument("SubsetMeasure: points/weights size mismatch");
    const std::uint64_t count = space.point_count();
    double sum = 0.0;
    for (std::size_t i = 0; i < nu.points.size(); ++i) {
        if (nu.points[i] >= count) throw std::invalid_argument("SubsetMeasure: point out of range");
        if (!(nu.weights[i] >= 0.0)) throw std::invalid_argument("SubsetMeasure: negative weight");
        sum += nu.weights[i];
    }
    if (std::fabs(sum - 1.0) > 1e-12)
        throw std::invalid_argument("SubsetMeasure: weights must sum to 1");
}

/// Per-coordinate densities with respect to mu of the pushforward of nu
/// restricted to {y : y_i != x_i}; d_i(x_i) is 0 by definition.
struct CoordinateDensities {
    int atoms = 0;
    std::vector<double> d;  // n * atoms, coordinate-major

    double operator()(int i, int atom) const { return d[static_cast<std::size_t>(i) * atoms + atom]; }
};

inline CoordinateDensities densities(const FiniteProductSpace& space, std::span<const int> x,
                                     const SubsetMeasure& nu) {
    space.check_point(x);
    check_measure(space, nu);
    CoordinateDensities out;
    out.atoms = space.atoms();
    out.d.assign(static_cast<std::size_t>(space.n) * space.atoms(), 0.0);
    for (std::size_t t = 0; t < nu.points.size(); ++t) {
        std::uint64_t idx = nu.points[t];
        for (int i = 0; i < space.n; ++i) {
            const int digit = static_cast<int>(idx % space.atoms());
            idx /= space.atoms();
            out.d[static_cast<std::size_t>(i) * space.atoms() + digit] += nu.weights[t];
        }
    }
    for (int i = 0; i < space.n; ++i) {
        for (int a = 0; a < space.atoms(); ++a) {
            double& v = out.d[static_cast<std::size_t>(i) * space.atoms() + a];
            v = (a == x[i]) ? 0.0 : v / space.mu[a];
        }
    }
    return out;
}

/// psi-distance of nu from the point x: sum_i sum_w psi(d_i(w)) mu(w).
inline double psi_distance(const FiniteProductSpace& space, std::span<const int> x,
                           const SubsetMeasure& nu) {
    const CoordinateDensities d = densities(space, x, nu);
    double s = 0.0;
    for (int i = 0; i < space.n; ++i)
        for (int a = 0; a < space.atoms(); ++a) s += psi(d(i, a)) * space.mu[a];
    return s;
}

struct MinimizeResult {
    double value = 0.0;
    SubsetMeasure nu;
    double gap = 0.0;
    int iterations = 0;
    bool reached_tol = false;
};

/// Minimizes the psi-distance over probability measures carried by A, by a
/// pairwise conditional-gradient scheme over the weight simplex with exact
/// line search (the objective is piecewise quadratic along any segment).
/// The linearization gap certifies how far the returned value can sit above
/// the infimum. Starts at the uniform measure on A; fully deterministic.
inline MinimizeResult min_psi_distance(const FiniteProductSpace& space, std::span<const int> x,
                                       const std::vector<std::uint64_t>& A, double gap_tol,
                                       int max_iterations = 10000) {
    space.check_point(x);
    if (A.empty()) throw std::invalid_argument("min_psi_distance: A must be nonempty");
    if (!(gap_tol > 0.0)) throw std::invalid_argument("min_psi_distance: gap_tol must be > 0");
    const int na = static_cast<int>(A.size());
    const int atoms = space.atoms();
    const std::uint64_t count = space.point_count();

    std::vector<int> pts(static_cast<std::size_t>(na) * space.n);
    for (int y = 0; y < na; ++y) {
        if (A[y] >= count) throw std::invalid_argument("min_psi_distance: point out of range");
        std::uint64_t idx = A[y];
        for (int i = 0; i < space.n; ++i) {
            pts[static_cast<std::size_t>(y) * space.n + i] = static_cast<int>(idx % atoms);
            idx /= atoms;
        }
    }

    // The objective is nonnegative and vanishes at the point mass on x, so
    // when x lies in A that measure is optimal with a zero gap.
    const std::uint64_t xi = space.index_of(x);
    for (int y = 0; y < na; ++y) {
        if (A[y] == xi) {
            MinimizeResult exact;
            exact.nu.points = A;
            exact.nu.weights.assign(na, 0.0);
            exact.nu.weights[y] = 1.0;
            exact.reached_tol = true;
            return exact;
        }
    }

    std::vector<double> w(na, 1.0 / na);
    std::vector<double> marg(static_cast<std::size_t>(space.n) * atoms, 0.0);
    auto rebuild_marg = [&] {
        std::fill(marg.begin(), marg.end(), 0.0);
        for (int y = 0; y < na; ++y)
            for (int i = 0; i < space.n; ++i)
                marg[static_cast<std::size_t>(i) * atoms + pts[static_cast<std::size_t>(y) * space.n + i]] += w[y];
    };
    rebuild_marg();

    // d psi-term / d marginal mass at (i, atom), zero on the excluded column x_i.
    auto slope = [&](int i, int a) {
        if (a == x[i]) return 0.0;
        return psi_prime(marg[static_cast<std::size_t>(i) * atoms + a] / space.mu[a]);
    };

    std::vector<double> grad(na);
    MinimizeResult res;
    int it = 0;
    for (; it < max_iterations; ++it) {
        int s = 0, v = -1;
        double dot = 0.0;
        for (int y = 0; y < na; ++y) {
            double gy = 0.0;
            const int* py = &pts[static_cast<std::size_t>(y) * space.n];
            for (int i = 0; i < space.n; ++i)
                if (py[i] != x[i]) gy += slope(i, py[i]);
            grad[y] = gy;
            dot += gy * w[y];
            if (gy < grad[s]) s = y;
            if (w[y] > 0.0 && (v < 0 || gy > grad[v])) v = y;
        }
        res.gap = dot - grad[s];
        if (res.gap <= gap_tol) {
            res.reached_tol = true;
            break;
        }
        if (v < 0 || grad[v] - grad[s] <= 0.0) break;

        // Exact line search for the transfer of mass gamma from vertex v to
        // vertex s. The directional derivative is piecewise linear and
        // nondecreasing; walk its breakpoints.
        const int* ps = &pts[static_cast<std::size_t>(s) * space.n];
        const int* pv = &pts[static_cast<std::size_t>(v) * space.n];
        const double gmax = w[v];
        std::vector<double> breaks;
        auto deriv = [&](double gamma) {
            double d = 0.0;
            for (int i = 0; i < space.n; ++i) {
                if (ps[i] == pv[i]) continue;
                if (ps[i] != x[i]) {
                    const double m = marg[static_cast<std::size_t>(i) * atoms + ps[i]] + gamma;
                    d += psi_prime(m / space.mu[ps[i]]);
                }
                if (pv[i] != x[i]) {
                    const double m = marg[static_cast<std::size_t>(i) * atoms + pv[i]] - gamma;
                    d -= psi_prime(m / space.mu[pv[i]]);
                }
            }
            return d;
        };
        for (int i = 0; i < space.n; ++i) {
            if (ps[i] == pv[i]) continue;
            if (ps[i] != x[i]) {
                const double b = 2.0 * space.mu[ps[i]] - marg[static_cast<std::size_t>(i) * atoms + ps[i]];
                if (b > 0.0 && b < gmax) breaks.push_back(b);
            }
            if (pv[i] != x[i]) {
                const double b = marg[static_cast<std::size_t>(i) * atoms + pv[i]] - 2.0 * space.mu[pv[i]];
                if (b > 0.0 && b < gmax) breaks.push_back(b);
            }
        }
        std::sort(breaks.begin(), breaks.end());
        breaks.push_back(gmax);

        double gamma = gmax;
        if (deriv(gmax) > 0.0) {
            double a = 0.0, da = deriv(0.0);
            for (double b : breaks) {
                const double db = deriv(b);
                if (db >= 0.0) {
                    // root inside [a, b]; the derivative is affine here
                    gamma = (db > da) ? a + (b - a) * (-da) / (db - da) : a;
                    break;
                }
                a = b;
                da = db;
            }
        }
        if (!(gamma > 0.0)) break;

        if (gamma >= gmax) {
            gamma = gmax;
            w[v] = 0.0;
        } else {
            w[v] -= gamma;
        }
        w[s] += gamma;
        for (int i = 0; i < space.n; ++i) {
            if (ps[i] == pv[i]) continue;
            marg[static_cast<std::size_t>(i) * atoms + ps[i]] += gamma;
            double& mv = marg[static_cast<std::size_t>(i) * atoms + pv[i]];
            mv = std::max(0.0, mv - gamma);
        }
        if ((it & 0xff) == 0xff) rebuild_marg();
    }
    res.iterations = it;

    // Exact marginals, value and gap at the returned point.
    rebuild_marg();
    double value = 0.0;
    for (int i = 0; i < space.n; ++i)
        for (int a = 0; a < atoms; ++a)
            if (a != x[i])
                value += psi(marg[static_cast<std::size_t>(i) * atoms + a] / space.mu[a]) * space.mu[a];
    double dot = 0.0, gmin = std::numeric_limits<double>::infinity();
    for (int y = 0; y < na; ++y) {
        double gy = 0.0;
        const int* py = &pts[static_cast<std::size_t>(y) * space.n];
        for (int i = 0; i < space.n; ++i)
            if (py[i] != x[i]) gy += slope(i, py[i]);
        dot += gy * w[y];
        gmin = std::min(gmin, gy);
    }
    res.gap = std::max(0.0, dot - gmin);
    res.reached_tol = res.gap <= gap_tol;
    res.value = value;
    res.nu.points = A;
    res.nu.weights = std::move(w);
    return res;
}

struct Theorem1Report {
    double sum_upper = 0.0;  // sum P(x) exp(m_hat / L) with the certified upper m_hat
    double sum_lower = 0.0;  // same with m_hat - gap, bracketing the true value
    double rhs = 0.0;        // 1 / P(A)
    double margin = 0.0;     // rhs - sum_upper
    bool pass = false;
    double max_gap = 0.0;
    int refinements = 0;
};

/// Checks sum_x P(x) exp(m(A, x)/L) <= 1/P(A) by enumerating the product
/// space. The distance is evaluated with its certified upper approximation,
/// so a reported pass is conservative; an apparent failure triggers gap
/// refinement before being reported.
inline Theorem1Report verify_theorem1(const FiniteProductSpace& space,
                                      std::vector<std::uint64_t> A, double L, double gap_tol,
                                      bool override_guard = false, int max_iterations = 10000) {
    if (!(L > 0.0)) throw std::domain_error("verify_theorem1: L must be > 0");
    if (!(gap_tol > 0.0)) throw std::invalid_argument("verify_theorem1: gap_tol must be > 0");
    const std::uint64_t count = space.point_count();
    if (count > 1000000 && !override_guard)
        throw std::invalid_argument("verify_theorem1: point count exceeds the enumeration guard");
    std::sort(A.begin(), A.end());
    A.erase(std::unique(A.begin(), A.end()), A.end());
    if (A.empty()) throw std::invalid_argument("verify_theorem1: A must be nonempty");
    if (A.back() >= count) throw std::invalid_argument("verify_theorem1: point out of range");

    std::vector<double> pa_terms(A.size());
    for (std::size_t i = 0; i < A.size(); ++i) pa_terms[i] = space.prob(A[i]);
    const double rhs = 1.0 / pairwise_sum(pa_terms);

    std::vector<double> m_hat(count), gap(count);
    auto solve = [&](std::uint64_t xi, double tol) {
        const std::vector<int> x = space.point(xi);
        const MinimizeResult r = min_psi_distance(space, x, A, tol, max_iterations);
        m_hat[xi] = r.value;
        gap[xi] = r.gap;
    };
    for (std::uint64_t xi = 0; xi < count; ++xi) solve(xi, gap_tol);

    Theorem1Report rep;
    rep.rhs = rhs;
    std::vector<double> upper(count), lower(count);
    auto assemble = [&] {
        rep.max_gap = 0.0;
        for (std::uint64_t xi = 0; xi < count; ++xi) {
            const double p = space.prob(xi);
            upper[xi] = p * std::exp(m_hat[xi] / L);
            lower[xi] = p * std::exp(std::max(0.0, m_hat[xi] - gap[xi]) / L);
            rep.max_gap = std::max(rep.max_gap, gap[xi]);
        }
        rep.sum_upper = pairwise_sum(upper);
        rep.sum_lower = pairwise_sum(lower);
        rep.margin = rep.rhs - rep.sum_upper;
        rep.pass = rep.sum_upper <= rep.rhs * (1.0 + 1e-9);
    };
    assemble();

    double tol = gap_tol;
    while (!rep.pass && rep.sum_lower <= rep.rhs * (1.0 + 1e-9) && rep.refinements < 3) {
        tol /= 100.0;
        ++rep.refinements;
        for (std::uint64_t xi = 0; xi < count; ++xi)
            if (gap[xi] > tol) solve(xi, tol);
        assemble();
    }
    return rep;
}

struct SubsetSweep {
    std::uint64_t subsets = 0;
    std::uint64_t prefilter_pass = 0;
    std::uint64_t escalated = 0;
    std::uint64_t violations = 0;
    double min_relative_margin = std::numeric_limits<double>::infinity();
    std::uint64_t tightest_subset = 0;       // bitmask over point indices
    std::vector<std::uint64_t> violating;    // first few violating masks
    bool pass = false;
};

/// Checks the product-space inequality for every nonempty subset A. A cheap
/// sound prefilter evaluates the sum with the point-mass upper bound
/// min_{y in A} m(delta_y, x) for m(A, x); subsets that do not already pass
/// through it are escalated to the certified minimizer. Point count is
/// limited to 27 so subsets fit in a 32-bit mask.
inline SubsetSweep sweep_all_subsets(const FiniteProductSpace& space, double L, double gap_tol) {
    const std::uint64_t count = space.point_count();
    if (count > 27) throw std::invalid_argument("sweep_all_subsets: needs point count <= 27");
    const int P = static_cast<int>(count);

    std::vector<double> prob(P);
    for (int y = 0; y < P; ++y) prob[y] = space.prob(static_cast<std::uint64_t>(y));
    std::vector<double> atom_cost(space.atoms());
    for (int a = 0; a < space.atoms(); ++a)
        atom_cost[a] = psi(1.0 / space.mu[a]) * space.mu[a];

    // exp(cost(x, y)/L) rows indexed by y for the row-min pass
    std::vector<double> erow(static_cast<std::size_t>(P) * P);
    for (int y = 0; y < P; ++y) {
        const std::vector<int> py = space.point(y);
        for (int x = 0; x < P; ++x) {
            const std::vector<int> px = space.point(x);
            double c = 0.0;
            for (int i = 0; i < space.n; ++i)
                if (px[i] != py[i]) c += atom_cost[py[i]];
            erow[static_cast<std::size_t>(y) * P + x] = std::exp(c / L);
        }
    }

    SubsetSweep sweep;
    std::vector<double> min_e(P);
    const std::uint32_t full = (P == 32) ? 0xffffffffu : ((1u << P) - 1u);
    for (std::uint32_t mask = 1; mask <= full; ++mask) {
        ++sweep.subsets;
        std::uint32_t bits = mask;
        const int y0 = std::countr_zero(bits);
        bits &= bits - 1;
        std::copy_n(&erow[static_cast<std::size_t>(y0) * P], P, min_e.begin());
        double pa = prob[y0];
        while (bits) {
            const int y = std::countr_zero(bits);
            bits &= bits - 1;
            pa += prob[y];
            const double* row = &erow[static_cast<std::size_t>(y) * P];
            for (int x = 0; x < P; ++x) min_e[x] = std::min(min_e[x], row[x]);
        }
        double s = 0.0;
        for (int x = 0; x < P; ++x) s += prob[x] * min_e[x];
        const double rel_margin = 1.0 - s * pa;
        if (rel_margin >= -1e-9) {
            ++sweep.prefilter_pass;
            if (rel_margin < sweep.min_relative_margin) {
                sweep.min_relative_margin = rel_margin;
                sweep.tightest_subset = mask;
            }
            continue;
        }
        ++sweep.escalated;
        std::vector<std::uint64_t> A;
        for (std::uint32_t b = mask; b;) {
            A.push_back(static_cast<std::uint64_t>(std::countr_zero(b)));
            b &= b - 1;
        }
        const Theorem1Report rep = verify_theorem1(space, std::move(A), L, gap_tol);
        const double esc_margin = rep.margin / rep.rhs;
        if (esc_margin < sweep.min_relative_margin) {
            sweep.min_relative_margin = esc_margin;
            sweep.tightest_subset = mask;
        }
        if (!rep.pass) {
            ++sweep.violations;
            if (sweep.violating.size() < 16) sweep.violating.push_back(mask);
        }
    }
    sweep.pass = sweep.violations == 0;
    return sweep;
}

}  // namespace conckit
