#include "esda/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace esda {

namespace {

struct Moments {
    double area = 0.0;  // signed
    double mx = 0.0;    // first moments, relative to the shift point
    double my = 0.0;
};

// Shoelace moments of a ring after shifting by `origin` for conditioning.
Moments ring_moments(const Ring& ring, PointXY origin) {
    Moments m;
    if (ring.size() < 2) {
        return m;
    }
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
        const double x0 = ring[i].x - origin.x;
        const double y0 = ring[i].y - origin.y;
        const double x1 = ring[i + 1].x - origin.x;
        const double y1 = ring[i + 1].y - origin.y;
        const double cross = x0 * y1 - x1 * y0;
        m.area += cross;
        m.mx += (x0 + x1) * cross;
        m.my += (y0 + y1) * cross;
    }
    m.area *= 0.5;
    m.mx /= 6.0;
    m.my /= 6.0;
    return m;
}

// Exterior counts positive, holes negative, regardless of ring orientation.
Moments polygon_moments(const Polygon& polygon, PointXY origin) {
    Moments total = ring_moments(polygon.exterior, origin);
    if (total.area < 0.0) {
        total = {-total.area, -total.mx, -total.my};
    }
    for (const Ring& hole : polygon.holes) {
        Moments h = ring_moments(hole, origin);
        if (h.area > 0.0) {
            h = {-h.area, -h.mx, -h.my};
        }
        total.area += h.area;
        total.mx += h.mx;
        total.my += h.my;
    }
    return total;
}

double cross(PointXY o, PointXY a, PointXY b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool on_segment(PointXY p, PointXY a, PointXY b) {
    if (cross(a, b, p) != 0.0) {
        return false;
    }
    return p.x >= std::min(a.x, b.x) && p.x <= std::max(a.x, b.x) && p.y >= std::min(a.y, b.y) &&
           p.y <= std::max(a.y, b.y);
}

int sign(double v) { return (v > 0.0) - (v < 0.0); }

bool segments_intersect(PointXY p1, PointXY p2, PointXY q1, PointXY q2) {
    const int d1 = sign(cross(q1, q2, p1));
    const int d2 = sign(cross(q1, q2, p2));
    const int d3 = sign(cross(p1, p2, q1));
    const int d4 = sign(cross(p1, p2, q2));
    if (d1 * d2 < 0 && d3 * d4 < 0) {
        return true;
    }
    return (d1 == 0 && on_segment(p1, q1, q2)) || (d2 == 0 && on_segment(p2, q1, q2)) ||
           (d3 == 0 && on_segment(q1, p1, p2)) || (d4 == 0 && on_segment(q2, p1, p2));
}

void validate_ring(const Ring& ring, const char* what) {
    if (ring.size() < 4) {
        throw GeometryError(std::string(what) + " ring needs at least 4 vertices including closure");
    }
    for (const PointXY& p : ring) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            throw GeometryError(std::string(what) + " ring has a non-finite coordinate");
        }
    }
    if (!(ring.front() == ring.back())) {
        throw GeometryError(std::string(what) + " ring is not closed");
    }
    if (signed_area(ring) == 0.0) {
        throw GeometryError(std::string(what) + " ring has zero area");
    }
    const std::size_t edges = ring.size() - 1;
    for (std::size_t i = 0; i < edges; ++i) {
        if (ring[i] == ring[i + 1]) {
            throw GeometryError(std::string(what) + " ring has a repeated vertex");
        }
    }
    for (std::size_t i = 0; i < edges; ++i) {
        for (std::size_t j = i + 1; j < edges; ++j) {
            const bool adjacent = j == i + 1 || (i == 0 && j == edges - 1);
            if (adjacent) {
                // Adjacent edges may only share their common endpoint.
                const PointXY shared = (j == i + 1) ? ring[j] : ring[i];
                const PointXY a = (j == i + 1) ? ring[i] : ring[i + 1];
                const PointXY b = (j == i + 1) ? ring[j + 1] : ring[j];
                if (cross(shared, a, b) == 0.0 &&
                    ((a.x - shared.x) * (b.x - shared.x) + (a.y - shared.y) * (b.y - shared.y)) > 0.0) {
                    throw GeometryError(std::string(what) + " ring folds back on itself");
                }
                continue;
            }
            if (segments_intersect(ring[i], ring[i + 1], ring[j], ring[j + 1])) {
                std::ostringstream msg;
                msg << what << " ring self-intersects between edges " << i << " and " << j;
                throw GeometryError(msg.str());
            }
        }
    }
}

void extend(Rect& box, PointXY p) {
    box.min_x = std::min(box.min_x, p.x);
    box.min_y = std::min(box.min_y, p.y);
    box.max_x = std::max(box.max_x, p.x);
    box.max_y = std::max(box.max_y, p.y);
}

Rect empty_box() {
    constexpr double inf = std::numeric_limits<double>::infinity();
    return {inf, inf, -inf, -inf};
}

// Keeps the part of a convex polygon (open ring, CCW) where
// (p - mid) . dir <= 0.
std::vector<PointXY> clip_half_plane(const std::vector<PointXY>& poly, PointXY mid, PointXY dir) {
    std::vector<PointXY> out;
    if (poly.empty()) {
        return out;
    }
    out.reserve(poly.size() + 1);
    auto side = [&](PointXY p) { return (p.x - mid.x) * dir.x + (p.y - mid.y) * dir.y; };
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const PointXY a = poly[i];
        const PointXY b = poly[(i + 1) % poly.size()];
        const double fa = side(a);
        const double fb = side(b);
        if (fa <= 0.0) {
            out.push_back(a);
        }
        if ((fa < 0.0 && fb > 0.0) || (fa > 0.0 && fb < 0.0)) {
            const double t = fa / (fa - fb);
            out.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
        }
    }
    return out;
}

}  // namespace

Polygon Rect::to_polygon() const {
    return Polygon{{{min_x, min_y}, {max_x, min_y}, {max_x, max_y}, {min_x, max_y}, {min_x, min_y}}, {}};
}

double signed_area(const Ring& ring) {
    if (ring.empty()) {
        return 0.0;
    }
    return ring_moments(ring, ring.front()).area;
}

double area(const Polygon& polygon) {
    if (polygon.exterior.empty()) {
        return 0.0;
    }
    return polygon_moments(polygon, polygon.exterior.front()).area;
}

double area(const MultiPolygon& polygon) {
    double total = 0.0;
    for (const Polygon& part : polygon.parts) {
        total += area(part);
    }
    return total;
}

PointXY centroid(const Polygon& polygon) {
    if (polygon.exterior.empty()) {
        throw GeometryError("centroid of empty polygon");
    }
    const PointXY origin = polygon.exterior.front();
    const Moments m = polygon_moments(polygon, origin);
    if (!(std::abs(m.area) > 0.0)) {
        throw GeometryError("centroid of zero-area polygon");
    }
    return {origin.x + m.mx / m.area, origin.y + m.my / m.area};
}

PointXY centroid(const MultiPolygon& polygon) {
    if (polygon.parts.empty()) {
        throw GeometryError("centroid of empty multipolygon");
    }
    const PointXY origin = polygon.parts.front().exterior.empty() ? PointXY{} : polygon.parts.front().exterior.front();
    Moments total;
    for (const Polygon& part : polygon.parts) {
        const Moments m = polygon_moments(part, origin);
        total.area += m.area;
        total.mx += m.mx;
        total.my += m.my;
    }
    if (!(std::abs(total.area) > 0.0)) {
        throw GeometryError("centroid of zero-area multipolygon");
    }
    return {origin.x + total.mx / total.area, origin.y + total.my / total.area};
}

bool point_in_ring(PointXY pt, const Ring& ring) {
    if (ring.size() < 2) {
        return false;
    }
    bool inside = false;
    for (std::size_t i = 0, n = ring.size(); i + 1 < n; ++i) {
        const PointXY a = ring[i];
        const PointXY b = ring[i + 1];
        if (on_segment(pt, a, b)) {
            return true;
        }
        if ((a.y > pt.y) != (b.y > pt.y)) {
            const double x_cross = a.x + (pt.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (pt.x < x_cross) {
                inside = !inside;
            }
        }
    }
    return inside;
}

bool point_in_polygon(PointXY pt, const Polygon& polygon) {
    if (!point_in_ring(pt, polygon.exterior)) {
        return false;
    }
    for (const Ring& hole : polygon.holes) {
        if (!point_in_ring(pt, hole)) {
            continue;
        }
        // The hole boundary belongs to the polygon.
        for (std::size_t i = 0; i + 1 < hole.size(); ++i) {
            if (on_segment(pt, hole[i], hole[i + 1])) {
                return true;
            }
        }
        return false;
    }
    return true;
}

bool point_in_polygon(PointXY pt, const MultiPolygon& polygon) {
    return std::any_of(polygon.parts.begin(), polygon.parts.end(),
                       [&](const Polygon& part) { return point_in_polygon(pt, part); });
}

Rect bounding_box(const Ring& ring) {
    Rect box = empty_box();
    for (const PointXY& p : ring) {
        extend(box, p);
    }
    return box;
}

Rect bounding_box(const Polygon& polygon) { return bounding_box(polygon.exterior); }

Rect bounding_box(const MultiPolygon& polygon) {
    Rect box = empty_box();
    for (const Polygon& part : polygon.parts) {
        for (const PointXY& p : part.exterior) {
            extend(box, p);
        }
    }
    return box;
}

Rect bounding_box(std::span<const PointXY> points) {
    Rect box = empty_box();
    for (const PointXY& p : points) {
        extend(box, p);
    }
    return box;
}

void validate(const Polygon& polygon) {
    validate_ring(polygon.exterior, "exterior");
    for (const Ring& hole : polygon.holes) {
        validate_ring(hole, "hole");
    }
    if (!(area(polygon) > 0.0)) {
        throw GeometryError("holes cover the whole exterior");
    }
}

void validate(const MultiPolygon& polygon) {
    if (polygon.parts.empty()) {
        throw GeometryError("multipolygon has no parts");
    }
    for (const Polygon& part : polygon.parts) {
        validate(part);
    }
}

Rect expanded_bounds(std::span<const PointXY> sites, double fraction) {
    if (sites.empty()) {
        throw GeometryError("expanded_bounds needs at least one site");
    }
    Rect box = bounding_box(sites);
    double w = box.width();
    double h = box.height();
    if (w == 0.0 && h == 0.0) {
        w = h = 1.0;
    } else if (w == 0.0) {
        w = h;
    } else if (h == 0.0) {
        h = w;
    }
    box.min_x -= fraction * w;
    box.max_x += fraction * w;
    box.min_y -= fraction * h;
    box.max_y += fraction * h;
    return box;
}

std::vector<VoronoiCell> voronoi(std::span<const PointXY> sites, const Rect& clip) {
    if (sites.empty()) {
        throw GeometryError("voronoi needs at least one site");
    }
    if (!(clip.width() > 0.0) || !(clip.height() > 0.0)) {
        throw GeometryError("voronoi clip rectangle has no area");
    }
    for (std::size_t i = 0; i < sites.size(); ++i) {
        if (!clip.contains(sites[i])) {
            std::ostringstream msg;
            msg << "voronoi site " << i << " (" << sites[i].x << ", " << sites[i].y << ") lies outside the clip rectangle";
            throw GeometryError(msg.str());
        }
    }

    std::vector<std::size_t> order(sites.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return sites[a].x != sites[b].x ? sites[a].x < sites[b].x
               : sites[a].y != sites[b].y ? sites[a].y < sites[b].y
                                          : a < b;
    });
    std::ostringstream dups;
    bool has_dups = false;
    for (std::size_t i = 1; i < order.size(); ++i) {
        if (sites[order[i]] == sites[order[i - 1]]) {
            dups << (has_dups ? ", " : "") << order[i - 1] << "=" << order[i];
            has_dups = true;
        }
    }
    if (has_dups) {
        throw GeometryError("voronoi duplicate sites: " + dups.str());
    }

    const double diag = std::hypot(clip.width(), clip.height());
    const double merge_eps = 1e-12 * diag;

    std::vector<VoronoiCell> cells;
    cells.reserve(sites.size());
    std::vector<std::size_t> by_distance(sites.size());
    for (std::size_t i = 0; i < sites.size(); ++i) {
        const PointXY s = sites[i];
        std::iota(by_distance.begin(), by_distance.end(), 0);
        auto dist2 = [&](std::size_t j) {
            const double dx = sites[j].x - s.x;
            const double dy = sites[j].y - s.y;
            return dx * dx + dy * dy;
        };
        std::sort(by_distance.begin(), by_distance.end(), [&](std::size_t a, std::size_t b) {
            const double da = dist2(a);
            const double db = dist2(b);
            return da != db ? da < db : a < b;
        });

        std::vector<PointXY> poly{{clip.min_x, clip.min_y}, {clip.max_x, clip.min_y}, {clip.max_x, clip.max_y},
                                  {clip.min_x, clip.max_y}};
        for (std::size_t j : by_distance) {
            if (j == i) {
                continue;
            }
            // No bisector farther than twice the cell's radius can cut it.
            double radius2 = 0.0;
            for (const PointXY& p : poly) {
                radius2 = std::max(radius2, (p.x - s.x) * (p.x - s.x) + (p.y - s.y) * (p.y - s.y));
            }
            if (dist2(j) > 4.0 * radius2) {
                break;
            }
            const PointXY mid{0.5 * (s.x + sites[j].x), 0.5 * (s.y + sites[j].y)};
            const PointXY dir{sites[j].x - s.x, sites[j].y - s.y};
            poly = clip_half_plane(poly, mid, dir);
        }

        Ring ring;
        ring.reserve(poly.size() + 1);
        for (const PointXY& p : poly) {
            if (!ring.empty() && std::abs(p.x - ring.back().x) <= merge_eps &&
                std::abs(p.y - ring.back().y) <= merge_eps) {
                continue;
            }
            ring.push_back(p);
        }
        while (ring.size() > 1 && std::abs(ring.front().x - ring.back().x) <= merge_eps &&
               std::abs(ring.front().y - ring.back().y) <= merge_eps) {
            ring.pop_back();
        }
        if (ring.size() < 3) {
            throw GeometryError("voronoi produced a degenerate cell for site " + std::to_string(i));
        }
        ring.push_back(ring.front());
        cells.push_back({static_cast<std::int64_t>(i), Polygon{std::move(ring), {}}});
    }
    return cells;
}

}  // namespace esda
