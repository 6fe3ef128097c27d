#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "conckit/product_space.hpp"
#include "conckit/rng.hpp"

using namespace conckit;
using Catch::Approx;

namespace {

// Dense barycentric grid search over the weight simplex of A, |A| <= 3.
double simplex_grid_min(const FiniteProductSpace& space, const std::vector<int>& x,
                        const std::vector<std::uint64_t>& A, int steps) {
    SubsetMeasure nu;
    nu.points = A;
    double best = std::numeric_limits<double>::infinity();
    if (A.size() == 1) {
        nu.weights = {1.0};
        return psi_distance(space, x, nu);
    }
    if (A.size() == 2) {
        for (int i = 0; i <= steps; ++i) {
            const double w = static_cast<double>(i) / steps;
            nu.weights = {w, 1.0 - w};
            best = std::min(best, psi_distance(space, x, nu));
        }
        return best;
    }
    REQUIRE(A.size() == 3);
    for (int i = 0; i <= steps; ++i) {
        for (int j = 0; j <= steps - i; ++j) {
            const double w0 = static_cast<double>(i) / steps;
            const double w1 = static_cast<double>(j) / steps;
            nu.weights = {w0, w1, std::max(0.0, 1.0 - w0 - w1)};
            best = std::min(best, psi_distance(space, x, nu));
        }
    }
    return best;
}

SubsetMeasure random_measure(const std::vector<std::uint64_t>& A, std::uint64_t seed,
                             std::uint64_t stream) {
    RngSequence rs{CounterRng{seed, stream}};
    SubsetMeasure nu;
    nu.points = A;
    double sum = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) {
        nu.weights.push_back(-std::log(rs.next()));
        sum += nu.weights.back();
    }
    for (double& w : nu.weights) w /= sum;
    return nu;
}

std::vector<std::uint64_t> all_points(const FiniteProductSpace& space) {
    std::vector<std::uint64_t> pts(space.point_count());
    for (std::uint64_t i = 0; i < pts.size(); ++i) pts[i] = i;
    return pts;
}

}  // namespace

TEST_CASE("FiniteProductSpace indexing and validation") {
    FiniteProductSpace space({0.5, 0.3, 0.2}, 2);
    CHECK(space.atoms() == 3);
    CHECK(space.point_count() == 9);
    for (std::uint64_t idx = 0; idx < 9; ++idx) {
        const std::vector<int> x = space.point(idx);
        CHECK(space.index_of(x) == idx);
        CHECK(space.prob(idx) == Approx(space.mu[x[0]] * space.mu[x[1]]).epsilon(1e-15));
    }
    CHECK(space.prob(std::vector<int>{2, 0}) == Approx(0.1));

    CHECK_THROWS_AS(FiniteProductSpace({0.5, 0.6}, 1), std::invalid_argument);
    CHECK_THROWS_AS(FiniteProductSpace({1.0, 0.0}, 1), std::invalid_argument);
    CHECK_THROWS_AS(FiniteProductSpace({0.5, 0.5}, 0), std::invalid_argument);
    CHECK_THROWS_AS(space.check_point(std::vector<int>{0}), std::invalid_argument);
    CHECK_THROWS_AS(space.check_point(std::vector<int>{0, 3}), std::invalid_argument);
}

TEST_CASE("densities of simple measures") {
    FiniteProductSpace space({0.5, 0.5}, 1);

    // point mass at x itself: every density vanishes
    SubsetMeasure at_x{{1}, {1.0}};
    const std::vector<int> x{1};
    const CoordinateDensities d0 = densities(space, x, at_x);
    CHECK(d0(0, 0) == 0.0);
    CHECK(d0(0, 1) == 0.0);

    // point mass on the other atom: density 1/mu there, 0 on the excluded atom
    SubsetMeasure other{{0}, {1.0}};
    const CoordinateDensities d1 = densities(space, x, other);
    CHECK(d1(0, 0) == Approx(2.0));
    CHECK(d1(0, 1) == 0.0);

    // uniform measure on the whole line
    FiniteProductSpace skew({0.8, 0.2}, 1);
    SubsetMeasure unif{{0, 1}, {0.5, 0.5}};
    const CoordinateDensities d2 = densities(skew, std::vector<int>{1}, unif);
    CHECK(d2(0, 0) == Approx(0.5 / 0.8));
    CHECK(d2(0, 1) == 0.0);

    SubsetMeasure bad{{0}, {0.7}};
    CHECK_THROWS_AS(densities(space, x, bad), std::invalid_argument);
    CHECK_THROWS_AS(densities(space, std::vector<int>{0, 1}, at_x), std::invalid_argument);
}

TEST_CASE("psi_distance worked values") {
    FiniteProductSpace line({0.5, 0.5}, 1);
    CHECK(psi_distance(line, std::vector<int>{1}, SubsetMeasure{{1}, {1.0}}) == 0.0);
    CHECK(psi_distance(line, std::vector<int>{1}, SubsetMeasure{{0}, {1.0}}) == Approx(0.5));

    FiniteProductSpace plane({0.5, 0.5}, 2);
    // point mass at (w1,w1), x = (w2,w2): both coordinates contribute psi(2)/2
    CHECK(psi_distance(plane, std::vector<int>{1, 1}, SubsetMeasure{{0}, {1.0}}) == Approx(1.0));
}

TEST_CASE("psi_distance of point masses has the closed product form") {
    RngSequence rs{CounterRng{11, 0}};
    FiniteProductSpace space({0.5, 0.3, 0.2}, 3);
    for (int t = 0; t < 200; ++t) {
        const std::uint64_t xi = rs.next_bits() % space.point_count();
        const std::uint64_t yi = rs.next_bits() % space.point_count();
        const std::vector<int> x = space.point(xi), y = space.point(yi);
        double expect = 0.0;
        for (int i = 0; i < space.n; ++i)
            if (y[i] != x[i]) expect += psi(1.0 / space.mu[y[i]]) * space.mu[y[i]];
        CHECK(psi_distance(space, x, SubsetMeasure{{yi}, {1.0}}) == Approx(expect).margin(1e-13));
    }
}

TEST_CASE("psi_distance is convex in the measure") {
    FiniteProductSpace space({0.6, 0.4}, 3);
    const std::vector<std::uint64_t> A = all_points(space);
    RngSequence rs{CounterRng{12, 0}};
    for (int t = 0; t < 200; ++t) {
        const SubsetMeasure n1 = random_measure(A, 13, t);
        const SubsetMeasure n2 = random_measure(A, 14, t);
        const double lam = rs.next();
        SubsetMeasure mix;
        mix.points = A;
        for (std::size_t i = 0; i < A.size(); ++i)
            mix.weights.push_back(lam * n1.weights[i] + (1.0 - lam) * n2.weights[i]);
        const std::vector<int> x = space.point(rs.next_bits() % space.point_count());
        const double lhs = psi_distance(space, x, mix);
        const double rhs =
            lam * psi_distance(space, x, n1) + (1.0 - lam) * psi_distance(space, x, n2);
        REQUIRE(lhs <= rhs + 1e-12);
    }
}

TEST_CASE("min_psi_distance trivial cases") {
    FiniteProductSpace space({0.5, 0.5}, 2);

    // x in A: the point mass at x is reached exactly
    const MinimizeResult at_x =
        min_psi_distance(space, std::vector<int>{0, 1}, {0, 1, 2}, 1e-6);
    CHECK(at_x.value == 0.0);
    CHECK(at_x.gap == 0.0);
    CHECK(at_x.reached_tol);

    // singleton A: the simplex is a point
    const MinimizeResult forced = min_psi_distance(space, std::vector<int>{1, 1}, {0}, 1e-6);
    CHECK(forced.value == Approx(1.0));
    CHECK(forced.gap == 0.0);

    CHECK_THROWS_AS(min_psi_distance(space, std::vector<int>{0, 0}, {}, 1e-6),
                    std::invalid_argument);
    CHECK_THROWS_AS(min_psi_distance(space, std::vector<int>{0, 0}, {0}, 0.0),
                    std::invalid_argument);
}

TEST_CASE("min_psi_distance worked two-point case") {
    FiniteProductSpace space({0.5, 0.5}, 2);
    // A = {(w1,w1), (w1,w2)}, x = (w2,w2): optimum is the point mass on (w1,w2)
    const std::vector<std::uint64_t> A{space.index_of(std::vector<int>{0, 0}),
                                       space.index_of(std::vector<int>{0, 1})};
    const std::vector<int> x{1, 1};
    const MinimizeResult r = min_psi_distance(space, x, A, 1e-8);
    CHECK(r.value == Approx(0.5).margin(1e-7));
    CHECK(r.gap <= 1e-8);

    const double oracle = simplex_grid_min(space, x, A, 1000);
    CHECK(r.value <= oracle + r.gap + 1e-12);
    CHECK(r.value >= oracle - 1e-4);

    double wsum = 0.0;
    for (double w : r.nu.weights) {
        CHECK(w >= 0.0);
        wsum += w;
    }
    CHECK(wsum == Approx(1.0).margin(1e-12));
}

TEST_CASE("min_psi_distance matches dense simplex search on small subsets") {
    const FiniteProductSpace spaces[] = {FiniteProductSpace({0.5, 0.5}, 2),
                                         FiniteProductSpace({0.8, 0.2}, 2),
                                         FiniteProductSpace({0.5, 0.3, 0.2}, 1)};
    for (const auto& space : spaces) {
        const std::uint64_t count = space.point_count();
        std::vector<std::vector<std::uint64_t>> subsets;
        for (std::uint64_t a = 0; a < count; ++a) {
            subsets.push_back({a});
            for (std::uint64_t b = a + 1; b < count; ++b) {
                subsets.push_back({a, b});
                for (std::uint64_t c = b + 1; c < count; ++c) subsets.push_back({a, b, c});
            }
        }
        for (const auto& A : subsets) {
            for (std::uint64_t xi = 0; xi < count; ++xi) {
                const std::vector<int> x = space.point(xi);
                const MinimizeResult r = min_psi_distance(space, x, A, 1e-6);
                const double oracle = simplex_grid_min(space, x, A, 1000);
                REQUIRE(r.value <= oracle + r.gap + 1e-12);  // grid cannot beat a certified min
                REQUIRE(r.value >= oracle - 1e-4);           // and must be matched to 1e-4
                REQUIRE(r.gap <= 1e-6);
            }
        }
    }
}

TEST_CASE("min_psi_distance is monotone under subset growth") {
    FiniteProductSpace space({0.5, 0.3, 0.2}, 2);
    RngSequence rs{CounterRng{15, 0}};
    const double tol = 1e-7;
    for (int t = 0; t < 60; ++t) {
        const std::uint64_t count = space.point_count();
        std::vector<std::uint64_t> A, B;
        for (std::uint64_t i = 0; i < count; ++i) {
            const double u = rs.next();
            if (u < 0.3) A.push_back(i);
            if (u < 0.6) B.push_back(i);  // A subset of B
        }
        if (A.empty() || B.empty()) continue;
        const std::vector<int> x = space.point(rs.next_bits() % count);
        const double va = min_psi_distance(space, x, A, tol).value;
        const double vb = min_psi_distance(space, x, B, tol).value;
        REQUIRE(vb <= va + 2 * tol);
    }
}

TEST_CASE("verify_theorem1 equality and worked cases") {
    FiniteProductSpace line({0.5, 0.5}, 1);

    // A = whole space: both sides equal 1
    const Theorem1Report full = verify_theorem1(line, {0, 1}, 1.12, 1e-6);
    CHECK(full.pass);
    CHECK(full.sum_upper == Approx(1.0).margin(1e-12));
    CHECK(full.rhs == Approx(1.0).margin(1e-12));

    // A = {w1}: 0.5 + 0.5 exp(0.5/1.12) against 2
    const Theorem1Report half = verify_theorem1(line, {0}, 1.12, 1e-8);
    CHECK(half.pass);
    CHECK(half.sum_upper == Approx(1.28136053031823).margin(1e-7));
    CHECK(half.rhs == Approx(2.0));
    CHECK(half.sum_lower <= half.sum_upper);

    CHECK_THROWS_AS(verify_theorem1(line, {}, 1.12, 1e-6), std::invalid_argument);
    CHECK_THROWS_AS(verify_theorem1(line, {0}, 1.12, -1.0), std::invalid_argument);

    FiniteProductSpace big({0.5, 0.5}, 21);  // 2^21 points exceeds the guard
    CHECK_THROWS_AS(verify_theorem1(big, {0}, 1.12, 1e-6), std::invalid_argument);
}

TEST_CASE("verify_theorem1 holds for every subset of small spaces") {
    const FiniteProductSpace spaces[] = {FiniteProductSpace({0.5, 0.5}, 2),
                                         FiniteProductSpace({0.8, 0.2}, 2),
                                         FiniteProductSpace({0.7, 0.2, 0.1}, 1)};
    for (const auto& space : spaces) {
        const std::uint64_t count = space.point_count();
        for (std::uint32_t mask = 1; mask < (1u << count); ++mask) {
            std::vector<std::uint64_t> A;
            for (std::uint64_t i = 0; i < count; ++i)
                if (mask & (1u << i)) A.push_back(i);
            const Theorem1Report rep = verify_theorem1(space, A, 1.12, 1e-6);
            REQUIRE(rep.pass);
            REQUIRE(rep.sum_lower <= rep.rhs * (1.0 + 1e-9));
        }
    }
}

TEST_CASE("sweep_all_subsets agrees with per-subset verification") {
    FiniteProductSpace space({0.8, 0.2}, 2);
    const SubsetSweep sweep = sweep_all_subsets(space, 1.12, 1e-6);
    CHECK(sweep.pass);
    CHECK(sweep.subsets == 15);
    CHECK(sweep.violations == 0);
    CHECK(sweep.prefilter_pass + sweep.escalated == 15);
    CHECK(sweep.min_relative_margin >= -1e-9);
    CHECK(sweep.min_relative_margin < 1.0);

    FiniteProductSpace too_big({0.5, 0.5}, 28);
    CHECK_THROWS_AS(sweep_all_subsets(too_big, 1.12, 1e-6), std::invalid_argument);
}
