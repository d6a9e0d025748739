#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "esda/geometry.hpp"

namespace esda {

class WeightsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Sparse neighbor structure. `neighbors[i]` is sorted ascending and
/// `weights[i]` runs parallel to it.
struct SpatialWeights {
    std::size_t n = 0;
    std::vector<std::vector<std::size_t>> neighbors;
    std::vector<std::vector<double>> weights;
    bool standardized = false;

    bool is_isolate(std::size_t i) const { return neighbors[i].empty(); }
    double row_sum(std::size_t i) const;
    /// Unordered neighbor pairs (i < j).
    std::vector<std::pair<std::size_t, std::size_t>> pairs() const;

    friend bool operator==(const SpatialWeights&, const SpatialWeights&) = default;
};

inline constexpr double kDefaultSnapTolerance = 1e-6;

/// Order-one queen contiguity: two polygons are neighbors when any vertex of
/// one lies within `snap_tol` (Euclidean) of a vertex of the other. With
/// snap_tol == 0 vertices must coincide exactly. Weights are binary.
SpatialWeights queen_contiguity(std::span<const MultiPolygon> polygons, double snap_tol = kDefaultSnapTolerance);
SpatialWeights queen_contiguity(std::span<const Polygon> polygons, double snap_tol = kDefaultSnapTolerance);

/// Divides every weight by its row sum; isolates stay empty.
SpatialWeights row_standardize(SpatialWeights w);

/// Builds binary weights from an explicit symmetric adjacency list.
SpatialWeights from_pairs(std::size_t n, std::span<const std::pair<std::size_t, std::size_t>> pairs);

/// GAL adjacency text: a line with n, then per observation a line
/// "id count" followed by a line listing the neighbor ids.
void write_gal(std::ostream& out, const SpatialWeights& w);
SpatialWeights read_gal(std::istream& in);

}  // namespace esda
