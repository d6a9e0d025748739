#include "esda/geodata.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace esda {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n')) {
        s.remove_suffix(1);
    }
    return s;
}

bool parse_double(std::string_view text, double& out) {
    text = trim(text);
    if (text.empty()) {
        return false;
    }
    if (text.front() == '+') {
        text.remove_prefix(1);
    }
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc() && ptr == text.data() + text.size();
}

Ring parse_ring(const json& coords) {
    if (!coords.is_array()) {
        throw GeometryError("ring is not an array");
    }
    Ring ring;
    ring.reserve(coords.size());
    for (const json& position : coords) {
        if (!position.is_array() || position.size() < 2 || !position[0].is_number() || !position[1].is_number()) {
            throw GeometryError("position is not [lon, lat]");
        }
        const double lon = position[0].get<double>();
        const double lat = position[1].get<double>();
        if (!(lon >= -180.0 && lon <= 180.0) || !(lat >= -90.0 && lat <= 90.0)) {
            throw GeometryError("position outside lon/lat range");
        }
        ring.push_back({lon, lat});
    }
    return ring;
}

Polygon parse_polygon(const json& coords) {
    if (!coords.is_array() || coords.empty()) {
        throw GeometryError("polygon has no rings");
    }
    Polygon polygon;
    polygon.exterior = parse_ring(coords[0]);
    for (std::size_t i = 1; i < coords.size(); ++i) {
        polygon.holes.push_back(parse_ring(coords[i]));
    }
    return polygon;
}

// Returns nullopt for non-polygonal geometry types.
std::optional<MultiPolygon> parse_polygonal(const json& geometry) {
    if (!geometry.is_object() || !geometry.contains("type")) {
        return std::nullopt;
    }
    const std::string type = geometry.value("type", "");
    MultiPolygon out;
    if (type == "Polygon") {
        out.parts.push_back(parse_polygon(geometry.at("coordinates")));
    } else if (type == "MultiPolygon") {
        const json& coords = geometry.at("coordinates");
        if (!coords.is_array()) {
            throw GeometryError("multipolygon coordinates are not an array");
        }
        for (const json& part : coords) {
            out.parts.push_back(parse_polygon(part));
        }
    } else {
        return std::nullopt;
    }
    return out;
}

json parse_collection(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw LoadError(std::string("malformed JSON: ") + e.what());
    }
    if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features") ||
        !doc["features"].is_array()) {
        throw LoadError("expected a GeoJSON FeatureCollection");
    }
    return doc;
}

std::int64_t feature_id(const json& feature, std::size_t position) {
    if (feature.contains("id") && feature["id"].is_number_integer() && feature["id"].get<std::int64_t>() >= 0) {
        return feature["id"].get<std::int64_t>();
    }
    return static_cast<std::int64_t>(position);
}

std::optional<int> integral_floors(const json& properties) {
    if (!properties.is_object() || !properties.contains("floors")) {
        return std::nullopt;
    }
    const json& f = properties["floors"];
    if (f.is_number_integer()) {
        const auto v = f.get<std::int64_t>();
        if (v < 1 || v > 100000) {
            return std::nullopt;
        }
        return static_cast<int>(v);
    }
    if (f.is_number_float()) {
        const double v = f.get<double>();
        if (std::isfinite(v) && v == std::floor(v) && v >= 1.0 && v <= 100000.0) {
            return static_cast<int>(v);
        }
    }
    return std::nullopt;
}

std::optional<double> optional_number(const json& properties, const char* key) {
    if (properties.is_object() && properties.contains(key) && properties[key].is_number()) {
        return properties[key].get<double>();
    }
    return std::nullopt;
}

ordered_json ring_json(const Ring& ring) {
    ordered_json out = ordered_json::array();
    for (const PointXY& p : ring) {
        out.push_back({p.x, p.y});
    }
    return out;
}

ordered_json polygon_coords(const Polygon& polygon) {
    ordered_json out = ordered_json::array();
    out.push_back(ring_json(polygon.exterior));
    for (const Ring& hole : polygon.holes) {
        out.push_back(ring_json(hole));
    }
    return out;
}

}  // namespace

PointXY project(double lon, double lat, LonLat origin) {
    constexpr double deg = std::numbers::pi / 180.0;
    const double cos0 = std::cos(origin.lat * deg);
    return {kEarthRadiusMeters * (lon - origin.lon) * cos0 * deg, kEarthRadiusMeters * (lat - origin.lat) * deg};
}

LonLat unproject(PointXY p, LonLat origin) {
    constexpr double deg = std::numbers::pi / 180.0;
    const double cos0 = std::cos(origin.lat * deg);
    return {origin.lon + p.x / (kEarthRadiusMeters * cos0 * deg), origin.lat + p.y / (kEarthRadiusMeters * deg)};
}

Polygon project(const Polygon& geographic, LonLat origin) {
    auto project_ring = [&](const Ring& ring) {
        Ring out;
        out.reserve(ring.size());
        for (const PointXY& p : ring) {
            out.push_back(project(p.x, p.y, origin));
        }
        return out;
    };
    Polygon out{project_ring(geographic.exterior), {}};
    for (const Ring& hole : geographic.holes) {
        out.holes.push_back(project_ring(hole));
    }
    return out;
}

MultiPolygon project(const MultiPolygon& geographic, LonLat origin) {
    MultiPolygon out;
    out.parts.reserve(geographic.parts.size());
    for (const Polygon& part : geographic.parts) {
        out.parts.push_back(project(part, origin));
    }
    return out;
}

Polygon unproject(const Polygon& planar, LonLat origin) {
    auto unproject_ring = [&](const Ring& ring) {
        Ring out;
        out.reserve(ring.size());
        for (const PointXY& p : ring) {
            const LonLat ll = unproject(p, origin);
            out.push_back({ll.lon, ll.lat});
        }
        return out;
    };
    Polygon out{unproject_ring(planar.exterior), {}};
    for (const Ring& hole : planar.holes) {
        out.holes.push_back(unproject_ring(hole));
    }
    return out;
}

LonLat mean_location(const std::vector<ScorePoint>& points) {
    if (points.empty()) {
        throw LoadError("cannot take the mean location of zero points");
    }
    double lon = 0.0;
    double lat = 0.0;
    for (const ScorePoint& p : points) {
        lon += p.lon;
        lat += p.lat;
    }
    const double n = static_cast<double>(points.size());
    return {lon / n, lat / n};
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw LoadError("cannot open " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

PointLoad parse_points(std::istream& in) {
    PointLoad result;
    std::string line;
    std::size_t row = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++row;
        std::string_view view = line;
        if (row == 1 && view.starts_with("\xEF\xBB\xBF")) {
            view.remove_prefix(3);
        }
        view = trim(view);
        if (!have_header) {
            if (view.empty()) {
                continue;
            }
            std::string header;
            for (char c : view) {
                if (c != ' ' && c != '\t') {
                    header.push_back(c);
                }
            }
            if (header != "lon,lat,qscore") {
                throw LoadError("expected header 'lon,lat,qscore', found '" + std::string(view) + "'");
            }
            have_header = true;
            continue;
        }
        if (view.empty()) {
            continue;
        }
        double values[3];
        std::size_t field = 0;
        bool ok = true;
        std::size_t start = 0;
        while (ok) {
            const std::size_t comma = view.find(',', start);
            const std::string_view token =
                view.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
            if (field >= 3 || !parse_double(token, values[field])) {
                ok = false;
                break;
            }
            ++field;
            if (comma == std::string_view::npos) {
                break;
            }
            start = comma + 1;
        }
        if (!ok || field != 3) {
            result.errors.push_back({row, "expected three numeric fields lon,lat,qscore"});
            continue;
        }
        const double lon = values[0];
        const double lat = values[1];
        const double q = values[2];
        if (!(lon >= -180.0 && lon <= 180.0) || !(lat >= -90.0 && lat <= 90.0)) {
            result.errors.push_back({row, "lon/lat out of range"});
            continue;
        }
        if (!std::isfinite(q)) {
            result.errors.push_back({row, "qscore is not finite"});
            continue;
        }
        result.points.push_back({static_cast<std::int64_t>(result.points.size()), lon, lat, q});
    }
    if (!have_header) {
        throw LoadError("empty points file");
    }
    if (result.points.empty()) {
        throw LoadError("no records in points file");
    }
    return result;
}

PointLoad load_points(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw LoadError("cannot open " + path.string());
    }
    return parse_points(in);
}

BuildingLoad parse_buildings(const std::string& geojson, LonLat origin) {
    const json doc = parse_collection(geojson);
    BuildingLoad result;
    std::unordered_set<std::int64_t> seen;
    const json& features = doc["features"];
    for (std::size_t i = 0; i < features.size(); ++i) {
        const json& feature = features[i];
        const json geometry = feature.value("geometry", json());
        const json properties = feature.value("properties", json::object());
        const std::int64_t id = feature_id(feature, i);
        std::optional<MultiPolygon> shape;
        try {
            shape = parse_polygonal(geometry);
        } catch (const std::exception& e) {
            ++result.skipped_geometry;
            result.warnings.push_back("building " + std::to_string(id) + ": " + e.what());
            continue;
        }
        if (!shape || shape->parts.size() != 1) {
            ++result.skipped_geometry;
            result.warnings.push_back("building " + std::to_string(id) + ": geometry is not a single polygon");
            continue;
        }
        const std::optional<int> floors = integral_floors(properties);
        if (!floors) {
            ++result.excluded_floors;
            continue;
        }
        BuildingFootprint building;
        building.id = id;
        building.floors = *floors;
        building.geometry = std::move(shape->parts.front());
        try {
            validate(building.geometry);
            building.centroid = centroid(project(building.geometry, origin));
        } catch (const GeometryError& e) {
            ++result.skipped_geometry;
            result.warnings.push_back("building " + std::to_string(id) + ": " + e.what());
            continue;
        }
        building.qscore_interp = optional_number(properties, "qscore_interp");
        if (!seen.insert(id).second) {
            throw LoadError("duplicate building id " + std::to_string(id));
        }
        result.buildings.push_back(std::move(building));
    }
    return result;
}

BuildingLoad load_buildings(const std::filesystem::path& path, LonLat origin) {
    return parse_buildings(read_file(path), origin);
}

NeighborhoodLoad parse_neighborhoods(const std::string& geojson, LonLat origin) {
    const json doc = parse_collection(geojson);
    NeighborhoodLoad result;
    std::unordered_set<std::int64_t> seen;
    const json& features = doc["features"];
    for (std::size_t i = 0; i < features.size(); ++i) {
        const json& feature = features[i];
        const json geometry = feature.value("geometry", json());
        const json properties = feature.value("properties", json::object());
        const std::int64_t id = feature_id(feature, i);
        std::optional<MultiPolygon> shape;
        try {
            shape = parse_polygonal(geometry);
            if (shape) {
                validate(*shape);
            }
        } catch (const GeometryError& e) {
            ++result.skipped_geometry;
            result.warnings.push_back("neighborhood " + std::to_string(id) + ": " + e.what());
            continue;
        } catch (const json::exception& e) {
            ++result.skipped_geometry;
            result.warnings.push_back("neighborhood " + std::to_string(id) + ": " + e.what());
            continue;
        }
        if (!shape) {
            ++result.skipped_geometry;
            result.warnings.push_back("neighborhood " + std::to_string(id) + ": geometry is not polygonal");
            continue;
        }
        NeighborhoodArea area;
        area.id = id;
        if (properties.is_object() && properties.contains("name") && properties["name"].is_string()) {
            area.name = properties["name"].get<std::string>();
        } else {
            result.warnings.push_back("neighborhood " + std::to_string(id) + ": missing name");
        }
        area.geometry = std::move(*shape);
        area.centroid = centroid(project(area.geometry, origin));
        area.mean_qscore = optional_number(properties, "mean_qscore");
        if (const auto count = optional_number(properties, "building_count")) {
            area.building_count = static_cast<std::int64_t>(*count);
        }
        if (!seen.insert(id).second) {
            throw LoadError("duplicate neighborhood id " + std::to_string(id));
        }
        result.neighborhoods.push_back(std::move(area));
    }
    return result;
}

NeighborhoodLoad load_neighborhoods(const std::filesystem::path& path, LonLat origin) {
    return parse_neighborhoods(read_file(path), origin);
}

std::string format_double(double value) {
    char buffer[64];
    const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, ptr);
}

void write_points(std::ostream& out, const std::vector<ScorePoint>& points) {
    out << "lon,lat,qscore\n";
    for (const ScorePoint& p : points) {
        out << format_double(p.lon) << ',' << format_double(p.lat) << ',' << format_double(p.qscore) << '\n';
    }
}

std::string buildings_geojson(const std::vector<BuildingFootprint>& buildings) {
    ordered_json features = ordered_json::array();
    for (const BuildingFootprint& b : buildings) {
        ordered_json properties;
        properties["floors"] = b.floors;
        properties["qscore_interp"] = b.qscore_interp ? ordered_json(*b.qscore_interp) : ordered_json(nullptr);
        features.push_back({{"type", "Feature"},
                            {"id", b.id},
                            {"geometry", {{"type", "Polygon"}, {"coordinates", polygon_coords(b.geometry)}}},
                            {"properties", std::move(properties)}});
    }
    ordered_json doc{{"type", "FeatureCollection"}, {"features", std::move(features)}};
    return doc.dump();
}

std::string neighborhoods_geojson(const std::vector<NeighborhoodArea>& neighborhoods) {
    ordered_json features = ordered_json::array();
    for (const NeighborhoodArea& n : neighborhoods) {
        ordered_json coords = ordered_json::array();
        for (const Polygon& part : n.geometry.parts) {
            coords.push_back(polygon_coords(part));
        }
        ordered_json properties;
        properties["name"] = n.name;
        properties["mean_qscore"] = n.mean_qscore ? ordered_json(*n.mean_qscore) : ordered_json(nullptr);
        properties["building_count"] = n.building_count;
        features.push_back({{"type", "Feature"},
                            {"id", n.id},
                            {"geometry", {{"type", "MultiPolygon"}, {"coordinates", std::move(coords)}}},
                            {"properties", std::move(properties)}});
    }
    ordered_json doc{{"type", "FeatureCollection"}, {"features", std::move(features)}};
    return doc.dump();
}

}  // namespace esda
