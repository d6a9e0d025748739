#include <algorithm>
#include <chrono>

#include "doctest.h"
#include "esda/interpolate.hpp"
#include "esda/random.hpp"
#include "support/oracles.hpp"

using namespace esda;

namespace {

const LonLat kOrigin{-73.95, 40.7};

std::vector<ScorePoint> random_points(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<ScorePoint> pts;
    for (std::size_t i = 0; i < n; ++i) {
        pts.push_back({static_cast<std::int64_t>(i), rng.uniform(-74.1, -73.8), rng.uniform(40.55, 40.85),
                       rng.uniform(0, 10)});
    }
    return pts;
}

std::vector<PointXY> projected(const std::vector<ScorePoint>& pts) {
    std::vector<PointXY> xy;
    for (const auto& p : pts) {
        xy.push_back(project(p.lon, p.lat, kOrigin));
    }
    return xy;
}

std::vector<std::int64_t> ids(const std::vector<Neighbor>& nb) {
    std::vector<std::int64_t> out;
    for (const auto& n : nb) {
        out.push_back(n.point_id);
    }
    return out;
}

}  // namespace

TEST_CASE("single-point index") {
    const std::vector<ScorePoint> one{{0, -73.95, 40.7, 3.0}};
    const SpatialIndex index(one, kOrigin);
    CHECK(index.size() == 1);
    const auto nb = index.knn({10, 10}, 1);
    REQUIRE(nb.size() == 1);
    CHECK(nb[0].point_id == 0);
    CHECK_THROWS_AS(index.knn({0, 0}, 2), InterpolationError);
    CHECK_THROWS_AS(index.knn({0, 0}, 0), InterpolationError);
}

TEST_CASE("knn matches the brute-force scan") {
    const auto pts = random_points(5000, 1);
    const auto xy = projected(pts);
    const SpatialIndex index(pts, kOrigin);
    Rng rng(2);
    for (int q = 0; q < 300; ++q) {
        const PointXY query{rng.uniform(-15000, 15000), rng.uniform(-18000, 18000)};
        REQUIRE(ids(index.knn(query, 30)) == oracle::brute_knn(xy, query, 30));
    }
}

TEST_CASE("knn breaks distance ties by id") {
    // Three points share one location and are listed out of id order.
    std::vector<ScorePoint> pts{{5, -73.96, 40.71, 1.0}, {2, -73.96, 40.71, 2.0}, {9, -73.96, 40.71, 3.0},
                                {0, -73.90, 40.75, 4.0}};
    const SpatialIndex index(pts, kOrigin);
    const auto nb = index.knn(project(-73.96, 40.71, kOrigin), 3);
    CHECK(ids(nb) == std::vector<std::int64_t>{2, 5, 9});
    CHECK(index.knn({0, 0}, 2)[0].point_id == 2);
}

TEST_CASE("knn is invariant to input order and rebuilds") {
    auto pts = random_points(2000, 5);
    const SpatialIndex a(pts, kOrigin);
    const SpatialIndex b(pts, kOrigin);
    std::reverse(pts.begin(), pts.end());
    const SpatialIndex c(pts, kOrigin);
    Rng rng(6);
    for (int q = 0; q < 100; ++q) {
        const PointXY query{rng.uniform(-15000, 15000), rng.uniform(-18000, 18000)};
        const auto ra = a.knn(query, 12);
        CHECK(ra == b.knn(query, 12));
        CHECK(ra == c.knn(query, 12));
    }
}

TEST_CASE("coincident query returns the point at distance zero; k = size returns all sorted") {
    const auto pts = random_points(200, 8);
    const SpatialIndex index(pts, kOrigin);
    const PointXY at = project(pts[57].lon, pts[57].lat, kOrigin);
    const auto first = index.knn(at, 1);
    CHECK(first[0].point_id == 57);
    CHECK(first[0].distance == 0.0);
    const auto all = index.knn(at, pts.size());
    CHECK(all.size() == pts.size());
    CHECK(std::is_sorted(all.begin(), all.end(),
                         [](const Neighbor& l, const Neighbor& r) { return l.distance < r.distance; }));
}

TEST_CASE("100k-point index answers single queries quickly") {
    const auto pts = random_points(100000, 9);
    const SpatialIndex index(pts, kOrigin);
    CHECK(index.size() == 100000);
    Rng rng(10);
    std::vector<double> micros;
    for (int q = 0; q < 1000; ++q) {
        const PointXY query{rng.uniform(-15000, 15000), rng.uniform(-18000, 18000)};
        const auto t0 = std::chrono::steady_clock::now();
        const auto nb = index.knn(query, 30);
        const auto t1 = std::chrono::steady_clock::now();
        micros.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
        REQUIRE(nb.size() == 30);
    }
    std::nth_element(micros.begin(), micros.begin() + 500, micros.end());
    MESSAGE("median k=30 query latency: " << micros[500] << " us");
    CHECK(micros[500] < 50.0);
}

TEST_CASE("idw formula and special cases") {
    const std::vector<Neighbor> two{{0, 1.0, 0.0}, {1, 2.0, 3.0}};
    CHECK(idw_interpolate(two, 1.0) == doctest::Approx(1.0).epsilon(1e-15));

    std::vector<Neighbor> same;
    for (int i = 0; i < 30; ++i) {
        same.push_back({i, 1.0 + i, 6.37});
    }
    CHECK(idw_interpolate(same, 2.0) == 6.37);
    CHECK(mean_interpolate(same) == 6.37);

    const std::vector<Neighbor> coincident{{4, 0.0, 4.2}, {5, 3.0, 9.0}, {6, 5.0, 1.0}};
    CHECK(idw_interpolate(coincident, 2.0) == 4.2);
    CHECK(mean_interpolate(two) == doctest::Approx(1.5));
}

TEST_CASE("idw stays within the neighbor range") {
    Rng rng(12);
    for (int t = 0; t < 2000; ++t) {
        std::vector<Neighbor> nb;
        double lo = INFINITY, hi = -INFINITY;
        for (int i = 0; i < 30; ++i) {
            const double q = rng.uniform(-5, 15);
            nb.push_back({i, rng.uniform(1e-6, 500), q});
            lo = std::min(lo, q);
            hi = std::max(hi, q);
        }
        const double v = idw_interpolate(nb, rng.uniform(0.5, 4));
        REQUIRE(v >= lo);
        REQUIRE(v <= hi);
    }
}

TEST_CASE("building at a score point takes that score") {
    Dataset data;
    data.points = random_points(100, 13);
    data.projection_origin = kOrigin;
    BuildingFootprint b;
    b.id = 0;
    b.floors = 3;
    b.centroid = project(data.points[42].lon, data.points[42].lat, kOrigin);
    data.buildings.push_back(b);
    const Dataset out = interpolate_buildings(data);
    CHECK(*out.buildings[0].qscore_interp == data.points[42].qscore);
}

TEST_CASE("parallel interpolation equals serial bit for bit") {
    const SyntheticDataset s = generate_synthetic(3, 20000, 10000, 60);
    InterpolationOptions serial;
    serial.threads = 1;
    InterpolationOptions parallel;
    parallel.threads = 4;
    const Dataset a = interpolate_buildings(s.dataset, serial);
    const Dataset b = interpolate_buildings(s.dataset, parallel);
    REQUIRE(a.buildings.size() == 10000);
    for (std::size_t i = 0; i < a.buildings.size(); ++i) {
        REQUIRE(a.buildings[i].qscore_interp.has_value());
        REQUIRE(*a.buildings[i].qscore_interp == *b.buildings[i].qscore_interp);
    }
}

TEST_CASE("k larger than the point count is rejected") {
    Dataset data;
    data.points = random_points(10, 14);
    data.projection_origin = kOrigin;
    data.buildings.push_back(BuildingFootprint{});
    InterpolationOptions opt;
    opt.k = 11;
    CHECK_THROWS_WITH_AS(interpolate_buildings(data, opt), doctest::Contains("exceeds"), InterpolationError);
}
