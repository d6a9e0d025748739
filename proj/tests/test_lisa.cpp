#include <cmath>
#include <numeric>

#include "doctest.h"
#include "esda/lisa.hpp"
#include "esda/random.hpp"
#include "support/oracles.hpp"

using namespace esda;

namespace {

SpatialWeights grid_weights(std::size_t rows, std::size_t cols) {
    return row_standardize(queen_contiguity(std::span<const Polygon>(oracle::grid(rows, cols)), 0.0));
}

SpatialWeights line(std::size_t n) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        pairs.emplace_back(i, i + 1);
    }
    return row_standardize(from_pairs(n, pairs));
}

std::vector<double> one_to_nine() {
    std::vector<double> v(9);
    std::iota(v.begin(), v.end(), 1.0);
    return v;
}

}  // namespace

TEST_CASE("standardize uses the population deviation") {
    const auto v = one_to_nine();
    const auto z = standardize(v);
    const double sigma = std::sqrt(60.0 / 9.0);
    CHECK(z[0] == doctest::Approx((1 - 5) / sigma).epsilon(1e-14));
    CHECK(z[4] == 0.0);
    double mean = 0.0, var = 0.0;
    for (double x : z) {
        mean += x;
    }
    for (double x : z) {
        var += x * x;
    }
    CHECK(std::abs(mean / 9) < 1e-12);
    CHECK(std::abs(var / 9 - 1.0) < 1e-12);
}

TEST_CASE("constant attribute is rejected") {
    const std::vector<double> flat(10, 3.5);
    CHECK_THROWS_WITH_AS(standardize(flat), doctest::Contains("constant attribute"), LisaError);
    CHECK_THROWS_WITH_AS(run_lisa(flat, line(10)), doctest::Contains("constant attribute"), LisaError);
}

TEST_CASE("local Moran on the 3x3 grid matches the double loop") {
    const auto w = grid_weights(3, 3);
    const auto z = standardize(one_to_nine());
    const auto expected = oracle::local_moran(z, oracle::dense(w));
    const auto got = local_moran(z, w);
    for (std::size_t i = 0; i < 9; ++i) {
        CHECK(std::abs(got[i].local_i - expected[i]) < 1e-12);
    }
}

TEST_CASE("global Moran equals the scaled sum of local statistics") {
    Rng rng(3);
    const auto w = grid_weights(6, 7);
    std::vector<double> v;
    for (std::size_t i = 0; i < w.n; ++i) {
        v.push_back(rng.normal() + 0.2 * static_cast<double>(i % 7));
    }
    const auto z = standardize(v);
    const auto m = oracle::dense(w);
    double num = 0.0, s0 = 0.0, den = 0.0;
    for (std::size_t i = 0; i < w.n; ++i) {
        den += z[i] * z[i];
        for (std::size_t j = 0; j < w.n; ++j) {
            num += m[i][j] * z[i] * z[j];
            s0 += m[i][j];
        }
    }
    const double expected = static_cast<double>(w.n) / s0 * num / den;
    CHECK(global_moran(z, w) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("alternating signs give negative local statistics everywhere") {
    std::vector<double> v;
    for (int i = 0; i < 11; ++i) {
        v.push_back(i % 2 ? -2.0 : 2.0);
    }
    const auto w = line(11);
    for (const auto& r : local_moran(standardize(v), w)) {
        CHECK(r.local_i < 0.0);
    }
}

TEST_CASE("isolates get zero statistics, p = 1 and their own class") {
    std::vector<std::pair<std::size_t, std::size_t>> pairs{{0, 1}, {1, 2}, {2, 3}};
    const auto w = row_standardize(from_pairs(5, pairs));
    const std::vector<double> v{1, 4, 2, 8, 5};
    const auto lm = local_moran(standardize(v), w);
    CHECK(lm[4].local_i == 0.0);
    CHECK(lm[4].lag == 0.0);
    const auto res = run_lisa(v, w, {99, 0.05, 1, 1});
    CHECK(res[4].cluster == ClusterClass::isolate);
    CHECK(res[4].pseudo_p == 1.0);
}

TEST_CASE("pseudo-p stays within its bounds") {
    Rng rng(5);
    const auto w = grid_weights(8, 8);
    std::vector<double> v;
    for (std::size_t i = 0; i < w.n; ++i) {
        v.push_back(rng.normal());
    }
    const std::size_t n_perm = 199;
    for (const auto& s : permutation_test(v, w, n_perm, 9, 1)) {
        CHECK(s.pseudo_p >= 1.0 / (n_perm + 1));
        CHECK(s.pseudo_p <= 1.0);
    }
    const LisaOptions defaults;
    CHECK(defaults.n_perm == 999);
    CHECK(defaults.alpha == 0.05);
}

TEST_CASE("n = 5 line graph pseudo-p agrees with exhaustive enumeration") {
    const auto w = line(5);
    const std::vector<double> v{3.1, 4.7, 4.2, 1.0, 0.4};
    const auto z = standardize(v);
    const auto perm = permutation_test(v, w, 9999, 2024, 1);
    for (std::size_t i = 0; i < 5; ++i) {
        const double exact = oracle::exhaustive_pseudo_p(z, w, i);
        CHECK(std::abs(perm[i].pseudo_p - exact) < 0.05);
    }
}

TEST_CASE("permuted mean converges to the conditional expectation") {
    // Holding z_i fixed, each neighbor slot draws from the other n-1 values,
    // whose mean is -z_i/(n-1). Hence E[I_i] = -z_i^2 * sum_j w_ij / (n-1).
    const auto w = grid_weights(3, 3);
    const auto z = standardize(one_to_nine());
    const std::size_t n_perm = 9999;
    const auto perm = permutation_test(one_to_nine(), w, n_perm, 77, 1);
    for (std::size_t i = 0; i < 9; ++i) {
        const double expected = -z[i] * z[i] * w.row_sum(i) / 8.0;
        const double se = perm[i].permuted_sd / std::sqrt(static_cast<double>(n_perm));
        CHECK(std::abs(perm[i].permuted_mean - expected) <= 3.0 * se + 1e-12);
    }
}

TEST_CASE("results do not depend on thread count and repeat for a seed") {
    Rng rng(8);
    const auto w = grid_weights(10, 10);
    std::vector<double> v;
    for (std::size_t i = 0; i < w.n; ++i) {
        v.push_back(rng.uniform(0, 10));
    }
    const auto a = permutation_test(v, w, 499, 123, 1);
    const auto b = permutation_test(v, w, 499, 123, 4);
    const auto c = permutation_test(v, w, 499, 124, 1);
    bool differs = false;
    for (std::size_t i = 0; i < w.n; ++i) {
        REQUIRE(a[i].pseudo_p == b[i].pseudo_p);
        REQUIRE(a[i].permuted_mean == b[i].permuted_mean);
        differs |= a[i].pseudo_p != c[i].pseudo_p;
    }
    CHECK(differs);
}

TEST_CASE("positive affine rescaling leaves the LISA unchanged") {
    Rng rng(12);
    const auto w = grid_weights(7, 7);
    std::vector<double> v, scaled;
    for (std::size_t i = 0; i < w.n; ++i) {
        v.push_back(rng.normal());
        scaled.push_back(3.5 * v.back() + 100.0);
    }
    const auto a = run_lisa(v, w, {199, 0.05, 4, 1});
    const auto b = run_lisa(scaled, w, {199, 0.05, 4, 1});
    for (std::size_t i = 0; i < w.n; ++i) {
        CHECK(a[i].local_i == doctest::Approx(b[i].local_i).epsilon(1e-9));
        CHECK(a[i].cluster == b[i].cluster);
    }
}

TEST_CASE("classification quadrants") {
    CHECK(classify(1.2, 0.8, 0.01, 0.05) == ClusterClass::high_high);
    CHECK(classify(-1.1, 0.9, 0.02, 0.05) == ClusterClass::low_high);
    CHECK(classify(-1.0, -0.4, 0.01, 0.05) == ClusterClass::low_low);
    CHECK(classify(0.7, -0.3, 0.04, 0.05) == ClusterClass::high_low);
    CHECK(classify(1.2, 0.8, 0.5, 0.05) == ClusterClass::not_significant);
    CHECK(classify(-3.0, -3.0, 0.5, 0.05) == ClusterClass::not_significant);
    CHECK(classify(1.0, 1.0, 0.001, 0.05, true) == ClusterClass::isolate);
    for (auto c : {ClusterClass::not_significant, ClusterClass::high_high, ClusterClass::low_low,
                   ClusterClass::low_high, ClusterClass::high_low, ClusterClass::isolate}) {
        CHECK(cluster_from_string(to_string(c)) == c);
    }
}

TEST_CASE("run_lisa fills expected_i and row-standardizes binary weights") {
    const auto binary = queen_contiguity(std::span<const Polygon>(oracle::grid(3, 3)), 0.0);
    const auto res = run_lisa(one_to_nine(), binary, {99, 0.05, 0, 1});
    const auto ref = run_lisa(one_to_nine(), row_standardize(binary), {99, 0.05, 0, 1});
    for (std::size_t i = 0; i < 9; ++i) {
        CHECK(res[i].expected_i == doctest::Approx(-1.0 / 8.0));
        CHECK(res[i].local_i == ref[i].local_i);
        CHECK(res[i].observation_id == static_cast<std::int64_t>(i));
    }
    CHECK_THROWS_AS(run_lisa(one_to_nine(), binary, {99, 1.5, 0, 1}), LisaError);
}
