#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace conckit {

namespace detail {

inline double log_beta(double a, double b) {
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// Continued-fraction for the regularized incomplete beta (modified Lentz).
inline double beta_cf(double a, double b, double x) {
    constexpr int max_iter = 400;
    constexpr double eps = 3e-16, fpmin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::fabs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double beta_inc(double a, double b, double x) {
    if (!(a > 0.0 && b > 0.0)) throw std::domain_error("beta_inc: parameters must be positive");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double bt =
        std::exp(a * std::log(x) + b * std::log1p(-x) - detail::log_beta(a, b));
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * detail::beta_cf(a, b, x) / a;
    return 1.0 - bt * detail::beta_cf(b, a, 1.0 - x) / b;
}

/// One-sided exact binomial (Clopper-Pearson) upper confidence limit for a
/// frequency of k successes out of n trials.
inline double clopper_pearson_upper(std::int64_t k, std::int64_t n, double confidence) {
    if (n <= 0 || k < 0 || k > n) throw std::invalid_argument("clopper_pearson_upper: bad counts");
    if (!(confidence > 0.0 && confidence < 1.0))
        throw std::invalid_argument("clopper_pearson_upper: confidence must lie in (0, 1)");
    if (k == n) return 1.0;
    // Upper limit solves P(Bin(n, p) <= k) = 1 - confidence, i.e.
    // I_p(k + 1, n - k) = confidence.
    const double a = static_cast<double>(k) + 1.0;
    const double b = static_cast<double>(n - k);
    double lo = static_cast<double>(k) / static_cast<double>(n), hi = 1.0;
    for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (beta_inc(a, b, mid) < confidence)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace conckit
