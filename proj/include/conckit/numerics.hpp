#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace conckit {

// Pairwise (cascade) summation; result does not depend on how callers chunk
// the work as long as the term order is fixed.
inline double pairwise_sum(std::span<const double> terms) {
    const std::size_t n = terms.size();
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = 0.0;
        for (double t : terms) s += t;
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(terms.first(half)) + pairwise_sum(terms.subspan(half));
}

inline double pairwise_sum(const std::vector<double>& terms) {
    return pairwise_sum(std::span<const double>(terms));
}

// Golden-section search for the minimum of a unimodal function on [lo, hi].
// Returns the midpoint of the final bracket.
template <typename F>
double golden_min(F&& f, double lo, double hi, int iterations = 120) {
    constexpr double inv_phi = 0.6180339887498949;
    double a = lo, b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < iterations && d > c; ++i) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

template <typename F>
double golden_max(F&& f, double lo, double hi, int iterations = 120) {
    return golden_min([&](double x) { return -f(x); }, lo, hi, iterations);
}

}  // namespace conckit
