#include <cmath>
#include <map>

#include "doctest.h"
#include "esda/random.hpp"
#include "esda/regress.hpp"
#include "support/oracles.hpp"

using namespace esda;

TEST_CASE("exact line") {
    std::vector<double> x, y;
    for (int i = 0; i < 10; ++i) {
        x.push_back(i);
        y.push_back(2.0 * i + 1.0);
    }
    const auto fit = ols(x, y);
    CHECK(fit.slope == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(fit.intercept == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(fit.r2 == doctest::Approx(1.0));
    CHECK(fit.n == 10);
}

TEST_CASE("constant y explains nothing") {
    const std::vector<double> x{1, 2, 3, 4};
    const std::vector<double> y{5, 5, 5, 5};
    const auto fit = ols(x, y);
    CHECK(fit.slope == 0.0);
    CHECK(fit.intercept == 5.0);
    CHECK(fit.r2 == 0.0);
}

TEST_CASE("degenerate regressions") {
    const std::vector<double> x{2, 2, 2};
    const std::vector<double> y{1, 2, 3};
    CHECK_THROWS_WITH_AS(ols(x, y), doctest::Contains("constant x"), RegressionError);
    CHECK_THROWS_AS(ols(std::vector<double>{1}, std::vector<double>{1}), RegressionError);
    CHECK_THROWS_AS(ols(std::vector<double>{1, 2}, std::vector<double>{1}), RegressionError);
}

TEST_CASE("ols matches high-precision normal equations") {
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> x, y;
        for (int i = 0; i < 50; ++i) {
            x.push_back(rng.uniform(-100, 100));
            y.push_back(0.3 * x.back() + rng.normal(0, 10));
        }
        const auto fit = ols(x, y);
        const auto ref = oracle::normal_equations(x, y);
        CHECK(std::abs(fit.slope - ref.slope) < 1e-9);
        CHECK(std::abs(fit.intercept - ref.intercept) < 1e-9);
        CHECK(std::abs(fit.r2 - ref.r2) < 1e-9);
    }
}

TEST_CASE("ols is invariant to sample order") {
    Rng rng(2);
    std::vector<double> x, y;
    for (int i = 0; i < 200; ++i) {
        x.push_back(rng.uniform(1, 40));
        y.push_back(rng.uniform(0, 10));
    }
    const auto a = ols(x, y);
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = idx.size() - 1; i > 0; --i) {
        std::swap(idx[i], idx[rng.below(i + 1)]);
    }
    std::vector<double> xs, ys;
    for (auto i : idx) {
        xs.push_back(x[i]);
        ys.push_back(y[i]);
    }
    const auto b = ols(xs, ys);
    CHECK(a.slope == doctest::Approx(b.slope).epsilon(1e-12));
    CHECK(a.intercept == doctest::Approx(b.intercept).epsilon(1e-12));
}

TEST_CASE("split regression recovers planted slopes") {
    Rng rng(3);
    std::vector<int> floors;
    std::vector<double> scores;
    for (int i = 0; i < 5000; ++i) {
        const int f = rng.uniform() < 0.9 ? 1 + static_cast<int>(rng.below(7)) : 8 + static_cast<int>(rng.below(30));
        const double effect = f < 8 ? 0.1 * f : 0.8 - 0.05 * (f - 8);
        floors.push_back(f);
        scores.push_back(5.0 + effect + rng.normal(0, 0.3));
    }
    const auto split = split_regression(std::span<const int>(floors), scores);
    CHECK(split.threshold == kDefaultFloorThreshold);
    CHECK(split.low.slope == doctest::Approx(0.1).epsilon(0.1));
    CHECK(split.high.slope == doctest::Approx(-0.05).epsilon(0.2));
    CHECK(split.low_share == doctest::Approx(0.9).epsilon(0.03));
    CHECK(split.low.n + split.high.n == 5000);
}

TEST_CASE("split regression errors") {
    const std::vector<double> low_only{1, 2, 3, 4, 5};
    const std::vector<double> s{1, 2, 3, 4, 5};
    CHECK_THROWS_WITH_AS(split_regression(std::span<const double>(low_only), s), doctest::Contains("empty high group"),
                         RegressionError);
    const std::vector<double> high_only{8, 9, 10};
    CHECK_THROWS_WITH_AS(split_regression(std::span<const double>(high_only), std::vector<double>{1, 2, 3}),
                         doctest::Contains("empty low group"), RegressionError);
    const std::vector<double> mixed{1, 2, 9, 9};
    CHECK_THROWS_WITH_AS(split_regression(std::span<const double>(mixed), std::vector<double>{1, 2, 3, 4}),
                         doctest::Contains("high group: constant x"), RegressionError);
}

TEST_CASE("lowess reproduces collinear data") {
    std::vector<double> x, y;
    Rng rng(4);
    for (int i = 0; i < 80; ++i) {
        x.push_back(rng.uniform(0, 20));
        y.push_back(-1.5 * x.back() + 7.0);
    }
    const auto curve = lowess(x, y, 0.3, 3);
    for (std::size_t i = 0; i < curve.x.size(); ++i) {
        CHECK(std::abs(curve.y[i] - (-1.5 * curve.x[i] + 7.0)) < 1e-9);
    }
}

TEST_CASE("lowess of constant y is constant") {
    const std::vector<double> x{1, 2, 2, 3, 5, 8, 8, 9};
    const std::vector<double> y(8, 4.25);
    const auto curve = lowess(x, y);
    CHECK(curve.x == std::vector<double>{1, 2, 3, 5, 8, 9});
    for (double v : curve.y) {
        CHECK(v == doctest::Approx(4.25).epsilon(1e-14));
    }
}

TEST_CASE("lowess matches the direct implementation on a noisy sine") {
    Rng rng(5);
    std::vector<double> x, y;
    for (int i = 0; i < 100; ++i) {
        x.push_back(rng.uniform(0, 2 * std::numbers::pi));
        y.push_back(std::sin(x.back()) + rng.normal(0, 0.3));
    }
    y[10] += 4.0;  // an outlier the robustness passes should damp
    const auto curve = lowess(x, y, 0.3, 3);
    std::vector<double> xs;
    const auto ref = oracle::lowess(x, y, 0.3, 3, &xs);
    REQUIRE(curve.x == xs);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        CHECK(std::abs(curve.y[i] - ref[i]) < 1e-9);
    }
}

TEST_CASE("lowess with heavy ties in x matches the direct implementation") {
    Rng rng(6);
    std::vector<double> x, y;
    for (int i = 0; i < 400; ++i) {
        const int f = 1 + static_cast<int>(rng.below(12));
        x.push_back(f);
        y.push_back(5.0 + 0.1 * f + rng.normal(0, 0.5));
    }
    for (int iterations : {0, 1, 3}) {
        const auto curve = lowess(x, y, 0.3, iterations);
        const auto ref = oracle::lowess(x, y, 0.3, iterations);
        REQUIRE(curve.y.size() == ref.size());
        for (std::size_t i = 0; i < ref.size(); ++i) {
            CHECK(std::abs(curve.y[i] - ref[i]) < 1e-9);
        }
    }
}

TEST_CASE("lowess argument checks") {
    const std::vector<double> x{1, 2, 3, 4};
    CHECK_THROWS_AS(lowess(x, x, 0.0), RegressionError);
    CHECK_THROWS_AS(lowess(x, x, 1.5), RegressionError);
    CHECK_THROWS_AS(lowess(x, x, 0.5, -1), RegressionError);
    CHECK_THROWS_AS(lowess(std::vector<double>{1, 2}, std::vector<double>{1, 2}), RegressionError);
}

namespace {

NeighborhoodArea zone(std::int64_t id, double x0, double y0, double x1, double y1, LonLat origin) {
    NeighborhoodArea area;
    area.id = id;
    area.name = "zone " + std::to_string(id);
    area.geometry.parts.push_back(unproject(Rect{x0, y0, x1, y1}.to_polygon(), origin));
    area.centroid = {(x0 + x1) / 2, (y0 + y1) / 2};
    return area;
}

}  // namespace

TEST_CASE("one building in one neighborhood") {
    const LonLat origin{-73.95, 40.7};
    BuildingFootprint b;
    b.id = 1;
    b.floors = 4;
    b.centroid = {50, 50};
    b.qscore_interp = 5.0;
    const auto agg = aggregate_neighborhoods({b}, {zone(0, 0, 0, 100, 100, origin)}, origin, 1);
    CHECK(*agg.neighborhoods[0].mean_qscore == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(agg.neighborhoods[0].building_count == 1);
    CHECK(*agg.mean_floors[0] == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("buildings outside every neighborhood are reported") {
    const LonLat origin{-73.95, 40.7};
    BuildingFootprint b;
    b.id = 9;
    b.centroid = {500, 500};
    b.qscore_interp = 5.0;
    const auto agg = aggregate_neighborhoods({b}, {zone(0, 0, 0, 100, 100, origin)}, origin, 1);
    CHECK(agg.unassigned == std::vector<std::int64_t>{9});
    CHECK(agg.assignment == std::vector<std::int64_t>{-1});
    CHECK(agg.empty == std::vector<std::int64_t>{0});
    CHECK_FALSE(agg.neighborhoods[0].mean_qscore.has_value());
}

TEST_CASE("aggregation equals a flat group-by over 12 zones") {
    const LonLat origin{-73.95, 40.7};
    std::vector<NeighborhoodArea> zones;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 4; ++c) {
            zones.push_back(zone(r * 4 + c, c * 250.0, r * 300.0, (c + 1) * 250.0, (r + 1) * 300.0, origin));
        }
    }
    Rng rng(7);
    std::vector<BuildingFootprint> buildings;
    std::map<std::int64_t, std::pair<double, int>> oracle_sum;
    for (int i = 0; i < 1000; ++i) {
        BuildingFootprint b;
        b.id = i;
        b.floors = 1 + static_cast<int>(rng.below(20));
        b.centroid = {rng.uniform(0.5, 999.5), rng.uniform(0.5, 899.5)};
        b.qscore_interp = rng.uniform(0, 10);
        // Skip points within a hair of a shared edge so the oracle needs no tie rule.
        if (std::fmod(b.centroid.x, 250.0) < 1e-6 || std::fmod(b.centroid.y, 300.0) < 1e-6) {
            continue;
        }
        const std::int64_t zid = static_cast<std::int64_t>(b.centroid.y / 300.0) * 4 +
                                 static_cast<std::int64_t>(b.centroid.x / 250.0);
        oracle_sum[zid].first += *b.qscore_interp;
        oracle_sum[zid].second += 1;
        buildings.push_back(b);
    }
    std::reverse(zones.begin(), zones.end());  // output is sorted by id regardless
    const auto serial = aggregate_neighborhoods(buildings, zones, origin, 1);
    const auto parallel = aggregate_neighborhoods(buildings, zones, origin, 4);
    REQUIRE(serial.neighborhoods.size() == 12);
    for (const auto& area : serial.neighborhoods) {
        const auto& [sum, count] = oracle_sum.at(area.id);
        CHECK(area.building_count == count);
        CHECK(*area.mean_qscore == doctest::Approx(sum / count).epsilon(1e-12));
    }
    CHECK(serial.neighborhoods == parallel.neighborhoods);
    CHECK(serial.unassigned.empty());
}

TEST_CASE("shared edges go to the lowest neighborhood id") {
    const LonLat origin{-73.95, 40.7};
    BuildingFootprint b;
    b.id = 0;
    b.centroid = {100, 50};
    b.qscore_interp = 2.0;
    const auto agg = aggregate_neighborhoods(
        {b}, {zone(5, 100, 0, 200, 100, origin), zone(3, 0, 0, 100, 100, origin)}, origin, 1);
    CHECK(agg.assignment[0] == 3);
}
