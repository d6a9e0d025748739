#include "esda/weights.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>

namespace esda {

namespace {

struct Vertex {
    PointXY p;
    std::size_t owner;
};

struct CellKey {
    std::int64_t x;
    std::int64_t y;
    friend bool operator==(const CellKey&, const CellKey&) = default;
};

struct CellKeyHash {
    std::size_t operator()(const CellKey& k) const {
        const auto h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint64_t>(k.y);
        return static_cast<std::size_t>(h ^ (h >> 29));
    }
};

std::int64_t grid_coord(double v, double tol) {
    const double scaled = std::floor(v / tol);
    if (!(std::abs(scaled) < 9.0e15)) {
        throw WeightsError("coordinate " + std::to_string(v) + " too large for snap tolerance");
    }
    return static_cast<std::int64_t>(scaled);
}

bool within(PointXY a, PointXY b, double tol) {
    if (tol == 0.0) {
        return a == b;
    }
    return std::hypot(a.x - b.x, a.y - b.y) <= tol;
}

SpatialWeights contiguity_from_vertices(std::size_t n, const std::vector<Vertex>& vertices, double snap_tol) {
    if (n < 2) {
        throw WeightsError("contiguity needs at least 2 polygons");
    }
    if (!(snap_tol >= 0.0) || !std::isfinite(snap_tol)) {
        throw WeightsError("snap tolerance must be finite and non-negative");
    }
    std::set<std::pair<std::size_t, std::size_t>> found;
    if (snap_tol == 0.0) {
        std::vector<Vertex> sorted = vertices;
        std::sort(sorted.begin(), sorted.end(), [](const Vertex& a, const Vertex& b) {
            return a.p.x != b.p.x ? a.p.x < b.p.x : a.p.y != b.p.y ? a.p.y < b.p.y : a.owner < b.owner;
        });
        for (std::size_t i = 0; i < sorted.size();) {
            std::size_t j = i;
            while (j < sorted.size() && sorted[j].p == sorted[i].p) {
                ++j;
            }
            for (std::size_t a = i; a < j; ++a) {
                for (std::size_t b = a + 1; b < j; ++b) {
                    if (sorted[a].owner != sorted[b].owner) {
                        found.emplace(std::min(sorted[a].owner, sorted[b].owner),
                                      std::max(sorted[a].owner, sorted[b].owner));
                    }
                }
            }
            i = j;
        }
    } else {
        std::unordered_map<CellKey, std::vector<std::size_t>, CellKeyHash> grid;
        grid.reserve(vertices.size());
        for (std::size_t v = 0; v < vertices.size(); ++v) {
            grid[{grid_coord(vertices[v].p.x, snap_tol), grid_coord(vertices[v].p.y, snap_tol)}].push_back(v);
        }
        for (std::size_t v = 0; v < vertices.size(); ++v) {
            const Vertex& a = vertices[v];
            const std::int64_t gx = grid_coord(a.p.x, snap_tol);
            const std::int64_t gy = grid_coord(a.p.y, snap_tol);
            for (std::int64_t dx = -1; dx <= 1; ++dx) {
                for (std::int64_t dy = -1; dy <= 1; ++dy) {
                    const auto it = grid.find({gx + dx, gy + dy});
                    if (it == grid.end()) {
                        continue;
                    }
                    for (std::size_t u : it->second) {
                        const Vertex& b = vertices[u];
                        if (b.owner > a.owner && within(a.p, b.p, snap_tol)) {
                            found.emplace(a.owner, b.owner);
                        }
                    }
                }
            }
        }
    }
    std::vector<std::pair<std::size_t, std::size_t>> pairs(found.begin(), found.end());
    return from_pairs(n, pairs);
}

void collect(const Polygon& polygon, std::size_t owner, std::vector<Vertex>& out) {
    for (const PointXY& p : polygon.exterior) {
        out.push_back({p, owner});
    }
    for (const Ring& hole : polygon.holes) {
        for (const PointXY& p : hole) {
            out.push_back({p, owner});
        }
    }
}

}  // namespace

double SpatialWeights::row_sum(std::size_t i) const {
    double sum = 0.0;
    for (double w : weights[i]) {
        sum += w;
    }
    return sum;
}

std::vector<std::pair<std::size_t, std::size_t>> SpatialWeights::pairs() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j : neighbors[i]) {
            if (i < j) {
                out.emplace_back(i, j);
            }
        }
    }
    return out;
}

SpatialWeights from_pairs(std::size_t n, std::span<const std::pair<std::size_t, std::size_t>> pairs) {
    SpatialWeights w;
    w.n = n;
    w.neighbors.assign(n, {});
    for (const auto& [a, b] : pairs) {
        if (a >= n || b >= n) {
            throw WeightsError("neighbor index out of range");
        }
        if (a == b) {
            throw WeightsError("self-neighbor at observation " + std::to_string(a));
        }
        w.neighbors[a].push_back(b);
        w.neighbors[b].push_back(a);
    }
    w.weights.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& row = w.neighbors[i];
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
        w.weights[i].assign(row.size(), 1.0);
    }
    return w;
}

SpatialWeights queen_contiguity(std::span<const MultiPolygon> polygons, double snap_tol) {
    std::vector<Vertex> vertices;
    for (std::size_t i = 0; i < polygons.size(); ++i) {
        for (const Polygon& part : polygons[i].parts) {
            collect(part, i, vertices);
        }
    }
    return contiguity_from_vertices(polygons.size(), vertices, snap_tol);
}

SpatialWeights queen_contiguity(std::span<const Polygon> polygons, double snap_tol) {
    std::vector<Vertex> vertices;
    for (std::size_t i = 0; i < polygons.size(); ++i) {
        collect(polygons[i], i, vertices);
    }
    return contiguity_from_vertices(polygons.size(), vertices, snap_tol);
}

SpatialWeights row_standardize(SpatialWeights w) {
    for (std::size_t i = 0; i < w.n; ++i) {
        const double sum = w.row_sum(i);
        if (w.weights[i].empty() || sum == 0.0) {
            continue;
        }
        for (double& v : w.weights[i]) {
            v /= sum;
        }
    }
    w.standardized = true;
    return w;
}

void write_gal(std::ostream& out, const SpatialWeights& w) {
    out << w.n << '\n';
    for (std::size_t i = 0; i < w.n; ++i) {
        out << i << ' ' << w.neighbors[i].size() << '\n';
        for (std::size_t k = 0; k < w.neighbors[i].size(); ++k) {
            out << (k ? " " : "") << w.neighbors[i][k];
        }
        out << '\n';
    }
}

SpatialWeights read_gal(std::istream& in) {
    std::size_t n = 0;
    std::string line;
    auto next_line = [&](const char* what) {
        while (std::getline(in, line)) {
            if (line.find_first_not_of(" \t\r") != std::string::npos) {
                return;
            }
        }
        throw WeightsError(std::string("GAL: unexpected end of input reading ") + what);
    };
    next_line("header");
    {
        std::istringstream header(line);
        // GeoDa headers may carry extra tokens ("0 n layer key"); the count
        // is the first token unless the first is the flag 0.
        std::vector<std::string> tokens;
        for (std::string t; header >> t;) {
            tokens.push_back(t);
        }
        if (tokens.empty()) {
            throw WeightsError("GAL: empty header");
        }
        const std::string& count = tokens.size() >= 2 && tokens[0] == "0" ? tokens[1] : tokens[0];
        try {
            n = std::stoull(count);
        } catch (const std::exception&) {
            throw WeightsError("GAL: bad observation count '" + count + "'");
        }
    }
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::vector<std::vector<std::size_t>> rows(n);
    for (std::size_t r = 0; r < n; ++r) {
        next_line("observation");
        std::istringstream head(line);
        std::size_t id = 0;
        std::size_t count = 0;
        if (!(head >> id >> count) || id >= n) {
            throw WeightsError("GAL: bad observation line '" + line + "'");
        }
        if (count > 0) {
            next_line("neighbor list");
            std::istringstream list(line);
            std::size_t j = 0;
            while (list >> j) {
                if (j >= n) {
                    throw WeightsError("GAL: neighbor id out of range");
                }
                if (j == id) {
                    throw WeightsError("GAL: self-neighbor at observation " + std::to_string(id));
                }
                rows[id].push_back(j);
            }
            if (rows[id].size() != count) {
                throw WeightsError("GAL: observation " + std::to_string(id) + " lists " +
                                   std::to_string(rows[id].size()) + " neighbors, header says " +
                                   std::to_string(count));
            }
        } else if (in.peek() == '\n') {
            std::getline(in, line);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j : rows[i]) {
            if (std::find(rows[j].begin(), rows[j].end(), i) == rows[j].end()) {
                throw WeightsError("GAL: asymmetric neighbor pair " + std::to_string(i) + "-" + std::to_string(j));
            }
            if (i < j) {
                pairs.emplace_back(i, j);
            }
        }
    }
    return from_pairs(n, pairs);
}

}  // namespace esda
