#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "esda/geodata.hpp"
#include "esda/random.hpp"

namespace esda {

namespace {

// Study rectangle, roughly the five boroughs' extent.
constexpr double kCenterLon = -73.95;
constexpr double kCenterLat = 40.70;
constexpr double kHalfLon = 0.15;
constexpr double kHalfLat = 0.12;

constexpr double kBaseScore = 5.0;
constexpr double kPlantedEffect = 1.5;
constexpr double kZoneNoiseSd = 0.15;
constexpr double kPointNoiseSd = 0.4;
constexpr double kHighBlockShare = 0.08;
constexpr int kMaxHighFloors = 36;
constexpr double kPointsPerBlock = 60.0;

// Expected q-score shift of a district whose buildings have `floors` floors.
double floor_effect(int floors) {
    if (floors < 8) {
        return 0.1 * floors;
    }
    return 0.8 - 0.05 * (floors - 8);
}

// Rows of equal height; row r holds `counts[r]` equal-width zones.
struct ZoneGrid {
    double min_lon = 0.0, min_lat = 0.0, width = 0.0, height = 0.0;
    std::vector<std::size_t> counts;
    std::vector<std::size_t> first;  // zone index of each row's first cell

    std::size_t rows() const { return counts.size(); }

    std::size_t zone_at(double lon, double lat) const {
        auto r = static_cast<std::size_t>((lat - min_lat) / height * static_cast<double>(rows()));
        r = std::min(r, rows() - 1);
        auto c = static_cast<std::size_t>((lon - min_lon) / width * static_cast<double>(counts[r]));
        c = std::min(c, counts[r] - 1);
        return first[r] + c;
    }

    Rect cell(std::size_t zone) const {
        const auto row = static_cast<std::size_t>(std::upper_bound(first.begin(), first.end(), zone) - first.begin() - 1);
        const std::size_t col = zone - first[row];
        const double h = height / static_cast<double>(rows());
        const double w = width / static_cast<double>(counts[row]);
        const double x0 = min_lon + w * static_cast<double>(col);
        const double y0 = min_lat + h * static_cast<double>(row);
        // Shared edges use the same expression so the tiling has no slivers.
        const double x1 = col + 1 == counts[row] ? min_lon + width : min_lon + w * static_cast<double>(col + 1);
        const double y1 = row + 1 == rows() ? min_lat + height : min_lat + h * static_cast<double>(row + 1);
        return {x0, y0, x1, y1};
    }
};

ZoneGrid make_zone_grid(std::size_t n_zones) {
    ZoneGrid grid;
    grid.min_lon = kCenterLon - kHalfLon;
    grid.min_lat = kCenterLat - kHalfLat;
    grid.width = 2.0 * kHalfLon;
    grid.height = 2.0 * kHalfLat;
    auto rows = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(n_zones))));
    rows = std::clamp<std::size_t>(rows, 1, n_zones);
    std::size_t next = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t count = n_zones / rows + (r < n_zones % rows ? 1 : 0);
        grid.first.push_back(next);
        grid.counts.push_back(count);
        next += count;
    }
    return grid;
}

// Zones whose centres lie within 1.6 row heights of the zone
// nearest to the fractional location (fx, fy).
std::vector<std::int64_t> planted_cluster(const ZoneGrid& grid, std::size_t n_zones, double fx, double fy,
                                          const std::vector<std::int64_t>& exclude) {
    const double row_h = grid.height / static_cast<double>(grid.rows());
    const std::size_t center =
        grid.zone_at(grid.min_lon + fx * grid.width, grid.min_lat + fy * grid.height);
    const Rect c = grid.cell(center);
    const double cx = 0.5 * (c.min_x + c.max_x);
    const double cy = 0.5 * (c.min_y + c.max_y);
    const double cos_lat = std::cos(kCenterLat * std::numbers::pi / 180.0);
    std::vector<std::int64_t> out;
    for (std::size_t z = 0; z < n_zones; ++z) {
        if (std::find(exclude.begin(), exclude.end(), static_cast<std::int64_t>(z)) != exclude.end()) {
            continue;
        }
        const Rect r = grid.cell(z);
        const double dx = (0.5 * (r.min_x + r.max_x) - cx) * cos_lat;
        const double dy = 0.5 * (r.min_y + r.max_y) - cy;
        if (std::hypot(dx, dy) <= 1.6 * row_h || z == center) {
            out.push_back(static_cast<std::int64_t>(z));
        }
    }
    if (out.empty()) {
        // Tiny layers: take the first zone not already used.
        for (std::size_t z = 0; z < n_zones; ++z) {
            if (std::find(exclude.begin(), exclude.end(), static_cast<std::int64_t>(z)) == exclude.end()) {
                out.push_back(static_cast<std::int64_t>(z));
                break;
            }
        }
    }
    return out;
}

int draw_low_floors(Rng& rng) {
    static constexpr double cumulative[] = {0.22, 0.46, 0.64, 0.77, 0.87, 0.95, 1.0};
    const double u = rng.uniform();
    for (int i = 0; i < 7; ++i) {
        if (u < cumulative[i]) {
            return i + 1;
        }
    }
    return 7;
}

}  // namespace

SyntheticDataset generate_synthetic(std::uint64_t seed, std::size_t n_points, std::size_t n_buildings,
                                    std::size_t n_zones) {
    if (n_points < 1 || n_buildings < 1 || n_zones < 1) {
        throw std::invalid_argument("generate_synthetic: sizes must be at least 1");
    }
    SyntheticDataset out;
    Dataset& data = out.dataset;
    data.projection_origin = {kCenterLon, kCenterLat};
    const ZoneGrid grid = make_zone_grid(n_zones);

    out.high_zones = planted_cluster(grid, n_zones, 0.30, 0.65, {});
    if (n_zones > 1) {
        out.low_zones = planted_cluster(grid, n_zones, 0.72, 0.30, out.high_zones);
    }

    Rng zone_rng(stream_seed(seed, 1));
    std::vector<double> zone_effect(n_zones);
    for (double& e : zone_effect) {
        e = zone_rng.normal(0.0, kZoneNoiseSd);
    }
    for (std::int64_t z : out.high_zones) {
        zone_effect[static_cast<std::size_t>(z)] += kPlantedEffect;
    }
    for (std::int64_t z : out.low_zones) {
        zone_effect[static_cast<std::size_t>(z)] -= kPlantedEffect;
    }

    for (std::size_t z = 0; z < n_zones; ++z) {
        NeighborhoodArea area;
        area.id = static_cast<std::int64_t>(z);
        area.name = "Zone " + std::to_string(z);
        area.geometry.parts.push_back(grid.cell(z).to_polygon());
        area.centroid = centroid(project(area.geometry, data.projection_origin));
        data.neighborhoods.push_back(std::move(area));
    }

    // Height districts: a block grid with one floor level per block.
    const double target_blocks = std::max(1.0, static_cast<double>(n_points) / kPointsPerBlock);
    const auto blocks_x = static_cast<std::size_t>(std::max(1.0, std::round(std::sqrt(target_blocks))));
    const std::size_t blocks_y = blocks_x;
    Rng block_rng(stream_seed(seed, 2));
    std::vector<int> block_level(blocks_x * blocks_y);
    for (int& level : block_level) {
        if (block_rng.uniform() < kHighBlockShare) {
            level = 8 + static_cast<int>(block_rng.below(kMaxHighFloors - 8 + 1));
        } else {
            level = draw_low_floors(block_rng);
        }
    }
    auto block_at = [&](double lon, double lat) {
        auto bx = static_cast<std::size_t>((lon - grid.min_lon) / grid.width * static_cast<double>(blocks_x));
        auto by = static_cast<std::size_t>((lat - grid.min_lat) / grid.height * static_cast<double>(blocks_y));
        return std::min(by, blocks_y - 1) * blocks_x + std::min(bx, blocks_x - 1);
    };

    Rng point_rng(stream_seed(seed, 3));
    data.points.reserve(n_points);
    for (std::size_t i = 0; i < n_points; ++i) {
        const double lon = point_rng.uniform(grid.min_lon, grid.min_lon + grid.width);
        const double lat = point_rng.uniform(grid.min_lat, grid.min_lat + grid.height);
        const double q = kBaseScore + zone_effect[grid.zone_at(lon, lat)] +
                         floor_effect(block_level[block_at(lon, lat)]) + point_rng.normal(0.0, kPointNoiseSd);
        data.points.push_back({static_cast<std::int64_t>(i), lon, lat, q});
    }

    Rng building_rng(stream_seed(seed, 4));
    constexpr double meters_per_deg_lat = kEarthRadiusMeters * std::numbers::pi / 180.0;
    const double meters_per_deg_lon = meters_per_deg_lat * std::cos(kCenterLat * std::numbers::pi / 180.0);
    constexpr double margin = 0.001;
    data.buildings.reserve(n_buildings);
    for (std::size_t i = 0; i < n_buildings; ++i) {
        const double lon = building_rng.uniform(grid.min_lon + margin, grid.min_lon + grid.width - margin);
        const double lat = building_rng.uniform(grid.min_lat + margin, grid.min_lat + grid.height - margin);
        const double half_w = building_rng.uniform(5.0, 15.0) / meters_per_deg_lon;
        const double half_h = building_rng.uniform(5.0, 15.0) / meters_per_deg_lat;
        const int level = block_level[block_at(lon, lat)];
        int floors = 0;
        if (level < 8) {
            floors = std::clamp(level + static_cast<int>(building_rng.below(3)) - 1, 1, 7);
        } else {
            floors = std::max(8, level + static_cast<int>(building_rng.below(5)) - 2);
        }
        BuildingFootprint b;
        b.id = static_cast<std::int64_t>(i);
        b.floors = floors;
        b.geometry = Rect{lon - half_w, lat - half_h, lon + half_w, lat + half_h}.to_polygon();
        b.centroid = centroid(project(b.geometry, data.projection_origin));
        data.buildings.push_back(std::move(b));
    }
    return out;
}

}  // namespace esda
