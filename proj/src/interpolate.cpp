#include "esda/interpolate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <string>

#include "esda/parallel.hpp"

namespace esda {

namespace {

struct Candidate {
    double dist2;
    std::int64_t id;
    double qscore;
};

bool closer(const Candidate& a, const Candidate& b) {
    return a.dist2 != b.dist2 ? a.dist2 < b.dist2 : a.id < b.id;
}

struct CandidateLess {
    bool operator()(const Candidate& a, const Candidate& b) const { return closer(a, b); }
};

using CandidateHeap = std::priority_queue<Candidate, std::vector<Candidate>, CandidateLess>;

}  // namespace

SpatialIndex::SpatialIndex(std::span<const ScorePoint> points, LonLat origin) : origin_(origin) {
    if (points.empty()) {
        throw InterpolationError("cannot build a spatial index over zero points");
    }
    items_.reserve(points.size());
    for (const ScorePoint& p : points) {
        items_.push_back({project(p.lon, p.lat, origin), p.id, p.qscore});
    }
    axis_.assign(items_.size(), 0);
    build(0, items_.size());
}

void SpatialIndex::build(std::size_t lo, std::size_t hi) {
    if (hi - lo <= 1) {
        return;
    }
    double min_x = std::numeric_limits<double>::infinity();
    double max_x = -min_x;
    double min_y = min_x;
    double max_y = -min_x;
    for (std::size_t i = lo; i < hi; ++i) {
        min_x = std::min(min_x, items_[i].xy.x);
        max_x = std::max(max_x, items_[i].xy.x);
        min_y = std::min(min_y, items_[i].xy.y);
        max_y = std::max(max_y, items_[i].xy.y);
    }
    const std::uint8_t axis = (max_y - min_y) > (max_x - min_x) ? 1 : 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    auto key = [axis](const Item& item) { return axis == 0 ? item.xy.x : item.xy.y; };
    std::nth_element(items_.begin() + static_cast<std::ptrdiff_t>(lo), items_.begin() + static_cast<std::ptrdiff_t>(mid),
                     items_.begin() + static_cast<std::ptrdiff_t>(hi), [&](const Item& a, const Item& b) {
                         const double ka = key(a);
                         const double kb = key(b);
                         return ka != kb ? ka < kb : a.id < b.id;
                     });
    axis_[mid] = axis;
    build(lo, mid);
    build(mid + 1, hi);
}

std::vector<Neighbor> SpatialIndex::knn(PointXY query, std::size_t k) const {
    if (k < 1 || k > items_.size()) {
        throw InterpolationError("k (" + std::to_string(k) + ") must be between 1 and the number of score points (" +
                                 std::to_string(items_.size()) + ")");
    }
    CandidateHeap heap;

    struct Frame {
        std::size_t lo, hi;
    };
    auto visit = [&](auto&& self, std::size_t lo, std::size_t hi) -> void {
        if (lo >= hi) {
            return;
        }
        const std::size_t mid = lo + (hi - lo) / 2;
        const Item& item = items_[mid];
        const double dx = item.xy.x - query.x;
        const double dy = item.xy.y - query.y;
        const Candidate c{dx * dx + dy * dy, item.id, item.qscore};
        if (heap.size() < k) {
            heap.push(c);
        } else if (closer(c, heap.top())) {
            heap.pop();
            heap.push(c);
        }
        if (hi - lo == 1) {
            return;
        }
        const double diff = axis_[mid] == 0 ? query.x - item.xy.x : query.y - item.xy.y;
        const Frame near = diff < 0.0 ? Frame{lo, mid} : Frame{mid + 1, hi};
        const Frame far = diff < 0.0 ? Frame{mid + 1, hi} : Frame{lo, mid};
        self(self, near.lo, near.hi);
        // Equal distances must still be visited: a tie may carry a lower id.
        if (heap.size() < k || diff * diff <= heap.top().dist2) {
            self(self, far.lo, far.hi);
        }
    };
    visit(visit, 0, items_.size());

    std::vector<Neighbor> out(heap.size());
    for (std::size_t i = out.size(); i-- > 0;) {
        const Candidate& c = heap.top();
        out[i] = {c.id, std::sqrt(c.dist2), c.qscore};
        heap.pop();
    }
    return out;
}

double idw_interpolate(std::span<const Neighbor> neighbors, double power) {
    if (neighbors.empty()) {
        throw InterpolationError("cannot interpolate from zero neighbors");
    }
    if (!(power > 0.0)) {
        throw InterpolationError("IDW power must be positive");
    }
    const Neighbor* coincident = nullptr;
    double q_min = neighbors.front().qscore;
    double q_max = q_min;
    for (const Neighbor& n : neighbors) {
        q_min = std::min(q_min, n.qscore);
        q_max = std::max(q_max, n.qscore);
        if (n.distance < kCoincidentDistance &&
            (coincident == nullptr || n.distance < coincident->distance ||
             (n.distance == coincident->distance && n.point_id < coincident->point_id))) {
            coincident = &n;
        }
    }
    if (coincident != nullptr) {
        return coincident->qscore;
    }
    // Offsets from the minimum keep equal scores exact.
    double weight_sum = 0.0;
    double weighted = 0.0;
    for (const Neighbor& n : neighbors) {
        const double w = std::pow(n.distance, -power);
        weight_sum += w;
        weighted += w * (n.qscore - q_min);
    }
    return std::clamp(q_min + weighted / weight_sum, q_min, q_max);
}

double mean_interpolate(std::span<const Neighbor> neighbors) {
    if (neighbors.empty()) {
        throw InterpolationError("cannot interpolate from zero neighbors");
    }
    double q_min = neighbors.front().qscore;
    double q_max = q_min;
    for (const Neighbor& n : neighbors) {
        q_min = std::min(q_min, n.qscore);
        q_max = std::max(q_max, n.qscore);
    }
    double sum = 0.0;
    for (const Neighbor& n : neighbors) {
        sum += n.qscore - q_min;
    }
    return std::clamp(q_min + sum / static_cast<double>(neighbors.size()), q_min, q_max);
}

Dataset interpolate_buildings(Dataset dataset, const InterpolationOptions& options) {
    if (options.k < 1) {
        throw InterpolationError("k must be at least 1");
    }
    if (options.k > dataset.points.size()) {
        throw InterpolationError("k (" + std::to_string(options.k) + ") exceeds the number of score points (" +
                                 std::to_string(dataset.points.size()) + ")");
    }
    if (options.mode == InterpolationMode::idw && !(options.power > 0.0)) {
        throw InterpolationError("IDW power must be positive");
    }
    const SpatialIndex index(dataset.points, dataset.projection_origin);
    std::vector<BuildingFootprint>& buildings = dataset.buildings;
    parallel_for(buildings.size(), options.threads, [&](std::size_t i) {
        const std::vector<Neighbor> neighbors = index.knn(buildings[i].centroid, options.k);
        buildings[i].qscore_interp = options.mode == InterpolationMode::idw ? idw_interpolate(neighbors, options.power)
                                                                            : mean_interpolate(neighbors);
    });
    return dataset;
}

}  // namespace esda
