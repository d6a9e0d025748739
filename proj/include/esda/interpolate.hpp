#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "esda/geodata.hpp"
#include "esda/geometry.hpp"

namespace esda {

class InterpolationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Neighbor {
    std::int64_t point_id = 0;
    double distance = 0.0;
    double qscore = 0.0;

    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Balanced 2-d tree over projected score points. Immutable after build.
///
/// Neighbors are ordered by (squared distance, point id), so ties resolve to
/// the lower id and answers do not depend on input order.
class SpatialIndex {
public:
    SpatialIndex(std::span<const ScorePoint> points, LonLat origin);

    std::size_t size() const { return items_.size(); }
    LonLat origin() const { return origin_; }

    /// The k nearest points to `query`, ascending. Requires 1 <= k <= size().
    std::vector<Neighbor> knn(PointXY query, std::size_t k) const;

private:
    struct Item {
        PointXY xy;
        std::int64_t id;
        double qscore;
    };

    void build(std::size_t lo, std::size_t hi);

    std::vector<Item> items_;       // in tree order: median at mid of each range
    std::vector<std::uint8_t> axis_;  // split axis per node, parallel to items_
    LonLat origin_;
};

inline SpatialIndex build_index(std::span<const ScorePoint> points, LonLat origin) {
    return SpatialIndex(points, origin);
}

inline constexpr double kCoincidentDistance = 1e-9;

/// Inverse-distance weighting with weights d^-power. A neighbor closer than
/// kCoincidentDistance short-circuits to its own score.
double idw_interpolate(std::span<const Neighbor> neighbors, double power);

/// Unweighted mean of the neighbor scores.
double mean_interpolate(std::span<const Neighbor> neighbors);

enum class InterpolationMode { idw, mean };

struct InterpolationOptions {
    std::size_t k = 30;
    double power = 2.0;
    InterpolationMode mode = InterpolationMode::idw;
    unsigned threads = 0;  // 0 = hardware concurrency
};

/// Fills qscore_interp for every building from its k nearest score points.
/// Output is bit-identical for any thread count.
Dataset interpolate_buildings(Dataset dataset, const InterpolationOptions& options = {});

}  // namespace esda
