#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace esda {

class GeometryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PointXY {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const PointXY&, const PointXY&) = default;
};

/// Closed ring: the first vertex is repeated as the last one.
using Ring = std::vector<PointXY>;

struct Polygon {
    Ring exterior;
    std::vector<Ring> holes;

    friend bool operator==(const Polygon&, const Polygon&) = default;
};

struct MultiPolygon {
    std::vector<Polygon> parts;

    friend bool operator==(const MultiPolygon&, const MultiPolygon&) = default;
};

struct Rect {
    double min_x = 0.0;
    double min_y = 0.0;
    double max_x = 0.0;
    double max_y = 0.0;

    double width() const { return max_x - min_x; }
    double height() const { return max_y - min_y; }
    double area() const { return width() * height(); }
    bool contains(PointXY p) const {
        return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
    }
    Polygon to_polygon() const;

    friend bool operator==(const Rect&, const Rect&) = default;
};

// Ring measures. Orientation-independent unless noted.
double signed_area(const Ring& ring);
double area(const Polygon& polygon);
double area(const MultiPolygon& polygon);

/// Area-weighted centroid (shoelace); holes subtract. Throws GeometryError on
/// zero-area input.
PointXY centroid(const Polygon& polygon);
PointXY centroid(const MultiPolygon& polygon);

/// Even-odd ray casting. Points on an edge (exterior or hole) count as inside.
bool point_in_ring(PointXY pt, const Ring& ring);
bool point_in_polygon(PointXY pt, const Polygon& polygon);
bool point_in_polygon(PointXY pt, const MultiPolygon& polygon);

Rect bounding_box(const Ring& ring);
Rect bounding_box(const Polygon& polygon);
Rect bounding_box(const MultiPolygon& polygon);
Rect bounding_box(std::span<const PointXY> points);

/// Checks closure, vertex count, nonzero area and simplicity of every ring.
/// Throws GeometryError describing the first violation.
void validate(const Polygon& polygon);
void validate(const MultiPolygon& polygon);

/// Bounding box of the sites grown by `fraction` of its extent on every side.
/// A zero extent on an axis borrows the other axis (or 1 unit if both are zero).
Rect expanded_bounds(std::span<const PointXY> sites, double fraction = 0.05);

struct VoronoiCell {
    std::int64_t site_id = 0;
    Polygon geometry;
};

/// Voronoi tessellation clipped to `clip`; cell i belongs to sites[i] and has
/// site_id i. Cells are convex, counter-clockwise and closed.
std::vector<VoronoiCell> voronoi(std::span<const PointXY> sites, const Rect& clip);

}  // namespace esda
