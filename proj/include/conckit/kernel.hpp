#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "conckit/numerics.hpp"
#include "conckit/rng.hpp"
#include "conckit/scalar.hpp"

namespace conckit {

/// Weighted atom system: probabilities p paired with positive values g,
/// stored sorted by g in descending order.
struct AtomSystem {
    std::vector<double> p;
    std::vector<double> g;

    AtomSystem(std::vector<double> probs, std::vector<double> values)
        : p(std::move(probs)), g(std::move(values)) {
        if (p.empty() || p.size() != g.size())
            throw std::invalid_argument("AtomSystem: p and g must be nonempty and equally sized");
        double sum = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (!std::isfinite(p[i]) || !(p[i] > 0.0))
                throw std::invalid_argument("AtomSystem: probabilities must be positive");
            if (!std::isfinite(g[i]) || !(g[i] > 0.0))
                throw std::invalid_argument("AtomSystem: values must be positive");
            sum += p[i];
        }
        if (std::fabs(sum - 1.0) > 1e-12)
            throw std::invalid_argument("AtomSystem: probabilities must sum to 1");
        std::vector<int> order(p.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return g[a] > g[b]; });
        std::vector<double> ps(p.size()), gs(p.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            ps[i] = p[order[i]];
            gs[i] = g[order[i]];
        }
        p = std::move(ps);
        g = std::move(gs);
    }

    int size() const { return static_cast<int>(p.size()); }

    /// p1 g1 + ... + pm gm.
    double mean_g() const {
        double s = 0.0;
        for (int i = 0; i < size(); ++i) s += p[i] * g[i];
        return s;
    }
};

/// Exponent of one term of the kernel inequality:
/// sum_{j<row} (log(g_row/g_j) k_j + psi(k_j)/L) p_j.
inline double row_objective(const AtomSystem& sys, double L, int row,
                            std::span<const double> k) {
    if (!(L > 0.0)) throw std::domain_error("row_objective: L must be > 0");
    if (row < 0 || row >= sys.size()) throw std::out_of_range("row_objective: row out of range");
    if (static_cast<int>(k.size()) != row)
        throw std::invalid_argument("row_objective: kernel vector length must equal row index");
    double s = 0.0;
    for (int j = 0; j < row; ++j)
        s += (std::log(sys.g[row] / sys.g[j]) * k[j] + psi(k[j]) / L) * sys.p[j];
    return s;
}

struct OptimalRow {
    std::vector<double> k;
    double multiplier = 0.0;
    bool saturated = false;
};

namespace detail {

// Slack below which the closed-form conditions are treated as failing; the
// two branches agree on the boundary, so the cut only selects a code path.
inline constexpr double branch_boundary_tol = 1e-12;

}  // namespace detail

/// Minimizer of row_objective over {k >= 0, sum k_j p_j <= 1}.
///
/// Closed-form branch: when log(g_1/g_row) < 1/L and the induced budget
/// sum 2L log(g_j/g_row) p_j stays below 1, the unconstrained coordinate-wise
/// minimizer k_j = 2L log(g_j/g_row) is feasible and optimal (multiplier 0).
///
/// Saturated branch: otherwise the budget binds. The multiplier lambda >= 0
/// solving sum_j clamp(2L(log(g_j/g_row) - lambda), 0, 2) p_j = 1 is found by
/// bisection; if even the smallest admissible multiplier cannot fill the
/// budget through the clamp (the largest log ratio exceeds lambda + 1/L, where
/// the coordinate objective keeps decreasing beyond k = 2), the surplus is
/// assigned to the first coordinate attaining the largest log ratio. Among
/// minimizers this picks the one maximizing sum k_j p_j.
inline OptimalRow optimal_row(const AtomSystem& sys, double L, int row) {
    if (!(L > 0.0)) throw std::domain_error("optimal_row: L must be > 0");
    if (row < 0 || row >= sys.size()) throw std::out_of_range("optimal_row: row out of range");
    OptimalRow out;
    out.k.assign(row, 0.0);
    if (row == 0) return out;

    std::vector<double> a(row);  // nonincreasing, a[0] is the largest
    for (int j = 0; j < row; ++j) a[j] = std::log(sys.g[j] / sys.g[row]);
    const double amax = a[0];

    double closed_budget = 0.0;
    for (int j = 0; j < row; ++j) closed_budget += 2.0 * L * a[j] * sys.p[j];

    if (amax < 1.0 / L - detail::branch_boundary_tol &&
        closed_budget < 1.0 - detail::branch_boundary_tol) {
        for (int j = 0; j < row; ++j) out.k[j] = 2.0 * L * a[j];
        return out;
    }

    auto fill = [&](double lambda) {
        double s = 0.0;
        for (int j = 0; j < row; ++j) {
            out.k[j] = std::clamp(2.0 * L * (a[j] - lambda), 0.0, 2.0);
            s += out.k[j] * sys.p[j];
        }
        return s;
    };

    double lo = std::max(0.0, amax - 1.0 / L);
    double budget = fill(lo);
    if (budget <= 1.0) {
        // Clamped coordinates cannot absorb the whole budget; the largest log
        // ratio (index 0, ties resolved by the descending sort) takes the rest.
        out.k[0] += (1.0 - budget) / sys.p[0];
        out.multiplier = lo;
        out.saturated = true;
        return out;
    }

    double hi = amax;  // fill(amax) == 0
    int iter = 0;
    while (hi - lo > 1e-15 * std::max(1.0, amax)) {
        if (++iter > 200)
            throw std::runtime_error("optimal_row: multiplier bisection did not converge");
        const double mid = 0.5 * (lo + hi);
        if (fill(mid) >= 1.0)
            lo = mid;
        else
            hi = mid;
    }
    out.multiplier = 0.5 * (lo + hi);
    budget = fill(out.multiplier);
    if (std::fabs(budget - 1.0) > 1e-9)
        throw std::runtime_error("optimal_row: saturated budget residual " +
                                 std::to_string(budget - 1.0));
    out.saturated = true;
    return out;
}

/// All rows of the optimal kernel plus per-row multiplier and saturation flag.
struct KernelAssignment {
    std::vector<std::vector<double>> rows;  // rows[i] has i entries, j < i
    std::vector<double> multipliers;
    std::vector<bool> saturated;
};

inline KernelAssignment optimal_kernel(const AtomSystem& sys, double L) {
    KernelAssignment out;
    out.rows.reserve(sys.size());
    for (int i = 0; i < sys.size(); ++i) {
        OptimalRow r = optimal_row(sys, L, i);
        out.rows.push_back(std::move(r.k));
        out.multipliers.push_back(r.multiplier);
        out.saturated.push_back(r.saturated);
    }
    return out;
}

/// Left side of the kernel inequality at the optimal kernel:
/// sum_i (p_i/g_i) exp(row_objective at the optimal row).
inline double lemma_lhs(const AtomSystem& sys, double L) {
    double s = 0.0;
    for (int i = 0; i < sys.size(); ++i) {
        const OptimalRow r = optimal_row(sys, L, i);
        s += sys.p[i] / sys.g[i] * std::exp(row_objective(sys, L, i, r.k));
    }
    return s;
}

struct LemmaReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;  // rhs - lhs; negative means the inequality fails
    bool pass = false;

    double relative_margin() const { return margin / rhs; }
};

inline LemmaReport make_lemma_report(double lhs, double rhs) {
    LemmaReport r;
    r.lhs = lhs;
    r.rhs = rhs;
    r.margin = rhs - lhs;
    r.pass = r.margin >= -1e-9 * rhs;
    return r;
}

/// Kernel inequality check with the structured row solver.
inline LemmaReport verify_lemma(const AtomSystem& sys, double L) {
    if (!(L > 0.0)) throw std::domain_error("verify_lemma: L must be > 0");
    return make_lemma_report(lemma_lhs(sys, L), 1.0 / sys.mean_g());
}

/// Closed-form left side sum_i (p_i/g_i) exp(-L sum_{j<i} log(g_j/g_i)^2 p_j).
/// Valid exactly on the closure of the closed-form regime; rejects systems
/// outside it, naming the offending row.
inline double reduced_lhs(const AtomSystem& sys, double L) {
    if (!(L > 0.0)) throw std::domain_error("reduced_lhs: L must be > 0");
    double s = 0.0;
    for (int i = 0; i < sys.size(); ++i) {
        double budget = 0.0, quad = 0.0;
        for (int j = 0; j < i; ++j) {
            const double a = std::log(sys.g[j] / sys.g[i]);
            budget += 2.0 * L * a * sys.p[j];
            quad += a * a * sys.p[j];
        }
        const double amax = i > 0 ? std::log(sys.g[0] / sys.g[i]) : 0.0;
        if (amax > 1.0 / L + 1e-12 || budget > 1.0 + 1e-12)
            throw std::domain_error("reduced_lhs: closed-form regime violated at row i=" +
                                    std::to_string(i));
        s += sys.p[i] / sys.g[i] * std::exp(-L * quad);
    }
    return s;
}

// --------------------------------------------------------------------------
// Brute-force row minimization. Independent of the structured solver: direct
// search over the feasible box {k >= 0, sum k_j p_j <= 1}, so solver bugs
// cannot mask a violation found through this path.
// --------------------------------------------------------------------------

inline double row_min_brute(const AtomSystem& sys, double L, int row) {
    if (row < 0 || row >= sys.size()) throw std::out_of_range("row_min_brute: row out of range");
    if (row == 0) return 0.0;
    std::vector<double> a(row);
    for (int j = 0; j < row; ++j) a[j] = std::log(sys.g[j] / sys.g[row]);

    auto coord_term = [&](int j, double k) { return (-a[j] * k + psi(k) / L) * sys.p[j]; };

    if (row == 1) {
        const double kmax = 1.0 / sys.p[0];
        auto f = [&](double k) { return coord_term(0, k); };
        const double k = golden_min(f, 0.0, kmax, 160);
        return std::min({f(k), f(0.0), f(kmax)});
    }

    // Zoomed grid refinement over the budget-constrained box.
    const int n_axis = 16;
    std::vector<double> center(row), span(row), k(row), best_k(row);
    for (int j = 0; j < row; ++j) {
        center[j] = 0.5 / sys.p[j];
        span[j] = 0.5 / sys.p[j];
    }
    double best = std::numeric_limits<double>::infinity();
    for (int stage = 0; stage < 28; ++stage) {
        double stage_best = std::numeric_limits<double>::infinity();
        std::vector<double> stage_k(row);
        std::vector<int> idx(row, 0);
        for (;;) {
            double budget = 0.0, val = 0.0;
            bool feasible = true;
            for (int j = 0; j < row && feasible; ++j) {
                const double klo = std::max(0.0, center[j] - span[j]);
                const double khi = std::min(1.0 / sys.p[j], center[j] + span[j]);
                k[j] = klo + (khi - klo) * idx[j] / (n_axis - 1);
                budget += k[j] * sys.p[j];
                if (budget > 1.0 + 1e-12) feasible = false;
                else val += coord_term(j, k[j]);
            }
            if (feasible && val < stage_best) {
                stage_best = val;
                stage_k = k;
            }
            int axis = 0;
            while (axis < row && ++idx[axis] == n_axis) idx[axis++] = 0;
            if (axis == row) break;
        }
        if (stage_best < best) {
            best = stage_best;
            best_k = stage_k;
        }
        for (int j = 0; j < row; ++j) {
            center[j] = best_k[j];
            span[j] *= 2.5 / (n_axis - 1);
        }
    }
    return best;
}

inline double lemma_lhs_brute(const AtomSystem& sys, double L) {
    double s = 0.0;
    for (int i = 0; i < sys.size(); ++i)
        s += sys.p[i] / sys.g[i] * std::exp(row_min_brute(sys, L, i));
    return s;
}

inline LemmaReport verify_lemma_brute(const AtomSystem& sys, double L) {
    if (!(L > 0.0)) throw std::domain_error("verify_lemma_brute: L must be > 0");
    return make_lemma_report(lemma_lhs_brute(sys, L), 1.0 / sys.mean_g());
}

// --------------------------------------------------------------------------
// Counterexample search and critical-constant bracketing.
// --------------------------------------------------------------------------

/// Grid over (p, g) configurations. For m = 2 the p axis is the union of the
/// geometric ladders {p_top r^j} and {1 - p_top r^j}, which resolves the
/// small-p corner where near-critical violations live; the log-ratio axis is
/// uniform on (0, max_log_ratio]. Ladders are nested under doubling of
/// `resolution`.
struct GridSpec {
    int resolution = 200;
    double max_log_ratio = 3.0;
    double p_top = 0.5;
    double p_ratio = 0.8;
    std::uint64_t scan_seed = 1907;  // configuration seed used for m > 2

    std::vector<double> p_values() const {
        std::vector<double> v;
        v.reserve(resolution);
        double q = p_top;
        for (int j = 0; j < resolution / 2; ++j, q *= p_ratio) {
            v.push_back(q);
            v.push_back(1.0 - q * p_ratio);
        }
        std::sort(v.begin(), v.end());
        return v;
    }

    std::vector<double> ratio_values() const {
        std::vector<double> v;
        v.reserve(resolution);
        for (int j = 1; j <= resolution; ++j)
            v.push_back(max_log_ratio * j / resolution);
        return v;
    }
};

/// Random system with p ~ symmetric Dirichlet(1) and i.i.d. log-g spacings
/// uniform on [0, max_spacing].
inline AtomSystem random_atom_system(std::uint64_t seed, std::uint64_t index, int m,
                                     double max_spacing = 2.0) {
    if (m < 1) throw std::invalid_argument("random_atom_system: m must be >= 1");
    RngSequence rs{CounterRng{seed, index}};
    std::vector<double> p(m), logg(m, 0.0);
    double sum = 0.0;
    for (int i = 0; i < m; ++i) {
        p[i] = -std::log(rs.next());
        sum += p[i];
    }
    for (int i = 0; i < m; ++i) p[i] /= sum;
    for (int i = m - 2; i >= 0; --i) logg[i] = logg[i + 1] + max_spacing * rs.next();
    std::vector<double> g(m);
    for (int i = 0; i < m; ++i) g[i] = std::exp(logg[i]);
    return AtomSystem(std::move(p), std::move(g));
}

struct Counterexample {
    AtomSystem system;
    LemmaReport report;
    double relative_violation = 0.0;  // (lhs - rhs)/rhs > 0
};

struct SearchResult {
    std::optional<Counterexample> first;  // lexicographically first grid violation
    std::optional<Counterexample> worst;  // largest relative violation on the grid
    std::uint64_t cells = 0;
    std::uint64_t violations = 0;

    bool found() const { return first.has_value(); }
};

/// Scans (p, g) configurations with fully brute-forced row minimization and
/// reports violating systems of the kernel inequality. For m = 2 the scan is
/// the GridSpec product grid in lexicographic (p, log-ratio) order; for
/// m > 2 it walks resolution^2 seeded random configurations in index order.
inline SearchResult search_counterexample(int m, double L, const GridSpec& grid = {}) {
    if (m < 2) throw std::invalid_argument("search_counterexample: m must be >= 2");
    if (!(L > 0.0)) throw std::domain_error("search_counterexample: L must be > 0");

    SearchResult result;
    auto consider = [&](AtomSystem sys) {
        const LemmaReport rep = verify_lemma_brute(sys, L);
        ++result.cells;
        if (!rep.pass) {
            ++result.violations;
            Counterexample ce{std::move(sys), rep, (rep.lhs - rep.rhs) / rep.rhs};
            if (!result.first) result.first = ce;
            if (!result.worst || ce.relative_violation > result.worst->relative_violation)
                result.worst = std::move(ce);
        }
    };

    if (m == 2) {
        for (double p1 : grid.p_values())
            for (double tau : grid.ratio_values())
                consider(AtomSystem({p1, 1.0 - p1}, {std::exp(tau), 1.0}));
    } else {
        const std::uint64_t count =
            static_cast<std::uint64_t>(grid.resolution) * grid.resolution;
        const double spacing = grid.max_log_ratio / (m - 1);
        for (std::uint64_t idx = 0; idx < count; ++idx)
            consider(random_atom_system(grid.scan_seed, idx, m, spacing));
    }
    return result;
}

struct CriticalBracket {
    double lower = 0.0;  // a violation exists at this level
    double upper = 0.0;  // the grid finds no violation at this level

    double width() const { return upper - lower; }
};

/// Brackets the level at which the grid search stops finding violations.
/// Feasibility of a level is monotone in L (the optimal left side is
/// nonincreasing in L while the right side is fixed), so bisection applies.
inline CriticalBracket critical_l_bracket(int m, const GridSpec& grid = {},
                                          double width_tol = 1e-3) {
    if (!(width_tol > 0.0)) throw std::invalid_argument("critical_l_bracket: bad width_tol");
    auto violated = [&](double L) { return search_counterexample(m, L, grid).violations > 0; };

    double lo = 1.0, hi = 1.2;
    while (!violated(lo) && lo > 0.35) lo -= 0.1;
    if (!violated(lo))
        throw std::runtime_error("critical_l_bracket: no violation found at the lower end");
    while (violated(hi) && hi < 2.0) hi += 0.2;
    if (violated(hi))
        throw std::runtime_error("critical_l_bracket: violations persist at the upper end");

    while (hi - lo > width_tol) {
        const double mid = 0.5 * (lo + hi);
        if (violated(mid))
            lo = mid;
        else
            hi = mid;
    }
    return {lo, hi};
}

}  // namespace conckit
