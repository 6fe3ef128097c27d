#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "conckit/product_space.hpp"
#include "conckit/rng.hpp"
#include "conckit/stats.hpp"

namespace conckit {

/// Finite class of functions from the atom set into [0, 1], each given by its
/// value vector.
struct FunctionClass {
    std::vector<std::vector<double>> functions;

    explicit FunctionClass(std::vector<std::vector<double>> fs) : functions(std::move(fs)) {
        if (functions.empty()) throw std::invalid_argument("FunctionClass: empty class");
        const std::size_t atoms = functions.front().size();
        for (const auto& f : functions) {
            if (f.size() != atoms || atoms == 0)
                throw std::invalid_argument("FunctionClass: inconsistent value vectors");
            for (double v : f)
                if (!(v >= 0.0 && v <= 1.0))
                    throw std::invalid_argument("FunctionClass: values must lie in [0, 1]");
        }
    }

    int size() const { return static_cast<int>(functions.size()); }
    int atoms() const { return static_cast<int>(functions.front().size()); }
};

/// mu f = sum_w f(w) mu(w).
inline double mean_value(const FiniteProductSpace& space, const std::vector<double>& f) {
    if (f.size() != space.mu.size()) throw std::invalid_argument("mean_value: size mismatch");
    double s = 0.0;
    for (std::size_t a = 0; a < f.size(); ++a) s += f[a] * space.mu[a];
    return s;
}

/// Z(x) = max_f sum_i (mu f - f(x_i)). The number of coordinates is taken
/// from x itself.
inline double z_statistic(const FiniteProductSpace& space, const FunctionClass& cls,
                          std::span<const int> x) {
    if (cls.atoms() != space.atoms()) throw std::invalid_argument("z_statistic: atom mismatch");
    if (x.empty()) throw std::invalid_argument("z_statistic: empty point");
    for (int d : x)
        if (d < 0 || d >= space.atoms()) throw std::invalid_argument("z_statistic: bad atom index");
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& f : cls.functions) {
        double s = static_cast<double>(x.size()) * mean_value(space, f);
        for (int d : x) s -= f[d];
        best = std::max(best, s);
    }
    return best;
}

/// Uniform second moment n sup_f mu f^2.
inline double sigma2(const FiniteProductSpace& space, const FunctionClass& cls, int n) {
    if (n < 0) throw std::invalid_argument("sigma2: n must be >= 0");
    if (cls.atoms() != space.atoms()) throw std::invalid_argument("sigma2: atom mismatch");
    double best = 0.0;
    for (const auto& f : cls.functions) {
        double s = 0.0;
        for (std::size_t a = 0; a < f.size(); ++a) s += f[a] * f[a] * space.mu[a];
        best = std::max(best, s);
    }
    return n * best;
}

namespace detail {

// Stream ids: tail draws use the trial index directly; median sampling gets a
// disjoint family so the two never share a draw.
inline constexpr std::uint64_t median_stream_base = 1ULL << 62;

inline int sample_atom(const FiniteProductSpace& space, double u) {
    double cum = 0.0;
    for (int a = 0; a + 1 < space.atoms(); ++a) {
        cum += space.mu[a];
        if (u < cum) return a;
    }
    return space.atoms() - 1;
}

inline double sample_z(const FiniteProductSpace& space, const FunctionClass& cls, int n,
                       const std::vector<double>& means, std::uint64_t seed, std::uint64_t stream) {
    const CounterRng rng{seed, stream};
    std::vector<double> sums(cls.size(), 0.0);
    for (int i = 0; i < n; ++i) {
        const int a = sample_atom(space, rng.uniform(static_cast<std::uint64_t>(i)));
        for (int f = 0; f < cls.size(); ++f) sums[f] += cls.functions[f][a];
    }
    double best = -std::numeric_limits<double>::infinity();
    for (int f = 0; f < cls.size(); ++f) best = std::max(best, n * means[f] - sums[f]);
    return best;
}

// Smallest value with at least half of the mass at or below it.
inline double lower_median(std::vector<std::pair<double, double>>& dist) {
    std::sort(dist.begin(), dist.end());
    double cum = 0.0;
    for (const auto& [z, p] : dist) {
        cum += p;
        if (cum >= 0.5 - 1e-12) return z;
    }
    return dist.back().first;
}

}  // namespace detail

/// Median of Z. Below the enumeration guard the distribution of Z is computed
/// exactly and the smallest exact median is returned; otherwise the sample
/// median of seeded draws is used.
inline double estimate_median(const FiniteProductSpace& space, const FunctionClass& cls,
                              std::int64_t trials, std::uint64_t seed) {
    if (trials < 1000) throw std::invalid_argument("estimate_median: trials must be >= 1000");
    if (cls.atoms() != space.atoms()) throw std::invalid_argument("estimate_median: atom mismatch");
    std::vector<double> means(cls.size());
    for (int f = 0; f < cls.size(); ++f) means[f] = mean_value(space, cls.functions[f]);

    const std::uint64_t count = space.point_count();
    if (count <= 1000000) {
        std::vector<std::pair<double, double>> dist;
        dist.reserve(count);
        std::vector<int> digits(space.n);
        for (std::uint64_t idx = 0; idx < count; ++idx) {
            std::uint64_t rest = idx;
            double p = 1.0;
            for (int i = 0; i < space.n; ++i) {
                digits[i] = static_cast<int>(rest % space.atoms());
                rest /= space.atoms();
                p *= space.mu[digits[i]];
            }
            double best = -std::numeric_limits<double>::infinity();
            for (int f = 0; f < cls.size(); ++f) {
                double s = space.n * means[f];
                for (int d : digits) s -= cls.functions[f][d];
                best = std::max(best, s);
            }
            dist.emplace_back(best, p);
        }
        return detail::lower_median(dist);
    }

    std::vector<double> zs(static_cast<std::size_t>(trials));
    for (std::int64_t t = 0; t < trials; ++t)
        zs[static_cast<std::size_t>(t)] =
            detail::sample_z(space, cls, space.n, means, seed,
                             detail::median_stream_base + static_cast<std::uint64_t>(t));
    std::sort(zs.begin(), zs.end());
    return zs[static_cast<std::size_t>((trials - 1) / 2)];
}

/// Empirical two-sided deviation frequencies of Z against 2 exp(-u).
struct TailReport {
    std::vector<double> u_grid;
    std::vector<double> upper_freq;   // empirical P(Z >= M + 2 max(Lu, sigma sqrt(Lu)))
    std::vector<double> upper_limit;  // exact binomial upper confidence limits
    std::vector<double> lower_freq;   // empirical P(Z <= M - 2 max(Lu, sigma sqrt(Lu)))
    std::vector<double> lower_limit;
    std::vector<double> bound;        // 2 exp(-u)
    std::vector<bool> u_pass;         // point estimates within the bound
    double median_estimate = 0.0;
    bool median_exact = false;
    double sigma2_value = 0.0;
    double L = 0.0;
    int n = 0;
    std::int64_t trials = 0;
    std::uint64_t seed = 0;
    double confidence = 0.0;
    bool pass = false;
};

/// Draws seeded samples of Z and reports, per u, the empirical frequencies of
/// both deviations together with exact binomial upper confidence limits. The
/// pass criterion compares the point estimate against 2 exp(-u); the
/// confidence limit is carried so callers can tell noise from violation.
inline TailReport check_tails(const FiniteProductSpace& space, const FunctionClass& cls, int n,
                              double L, std::vector<double> u_grid, std::int64_t trials,
                              std::uint64_t seed, double confidence = 0.95) {
    if (!(L > 0.0)) throw std::domain_error("check_tails: L must be > 0");
    if (n < 1) throw std::invalid_argument("check_tails: n must be >= 1");
    if (trials < 10000) throw std::invalid_argument("check_tails: trials must be >= 10000");
    if (u_grid.empty()) throw std::invalid_argument("check_tails: empty u grid");
    for (double u : u_grid)
        if (!(u > 0.0)) throw std::invalid_argument("check_tails: u values must be > 0");
    if (!(confidence > 0.0 && confidence < 1.0))
        throw std::invalid_argument("check_tails: confidence must lie in (0, 1)");

    const FiniteProductSpace process(space.mu, n);
    TailReport rep;
    rep.u_grid = std::move(u_grid);
    rep.L = L;
    rep.n = n;
    rep.trials = trials;
    rep.seed = seed;
    rep.confidence = confidence;
    rep.sigma2_value = sigma2(space, cls, n);
    rep.median_exact = process.point_count() <= 1000000;
    rep.median_estimate = estimate_median(process, cls, std::max<std::int64_t>(trials, 1000), seed);

    std::vector<double> means(cls.size());
    for (int f = 0; f < cls.size(); ++f) means[f] = mean_value(space, cls.functions[f]);

    const double sigma = std::sqrt(rep.sigma2_value);
    const std::size_t nu = rep.u_grid.size();
    std::vector<double> thr(nu);
    for (std::size_t k = 0; k < nu; ++k)
        thr[k] = 2.0 * std::max(L * rep.u_grid[k], sigma * std::sqrt(L * rep.u_grid[k]));

    std::vector<std::int64_t> up(nu, 0), down(nu, 0);
    for (std::int64_t t = 0; t < trials; ++t) {
        const double z =
            detail::sample_z(space, cls, n, means, seed, static_cast<std::uint64_t>(t));
        for (std::size_t k = 0; k < nu; ++k) {
            if (z >= rep.median_estimate + thr[k]) ++up[k];
            if (z <= rep.median_estimate - thr[k]) ++down[k];
        }
    }

    rep.pass = true;
    for (std::size_t k = 0; k < nu; ++k) {
        rep.bound.push_back(2.0 * std::exp(-rep.u_grid[k]));
        rep.upper_freq.push_back(static_cast<double>(up[k]) / trials);
        rep.lower_freq.push_back(static_cast<double>(down[k]) / trials);
        rep.upper_limit.push_back(clopper_pearson_upper(up[k], trials, confidence));
        rep.lower_limit.push_back(clopper_pearson_upper(down[k], trials, confidence));
        const bool ok = rep.upper_freq[k] <= rep.bound[k] && rep.lower_freq[k] <= rep.bound[k];
        rep.u_pass.push_back(ok);
        rep.pass = rep.pass && ok;
    }
    return rep;
}

}  // namespace conckit
