#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "esda/geometry.hpp"

namespace esda {

/// Raised for unrecoverable input problems (unreadable file, malformed JSON,
/// no records, duplicate ids).
class LoadError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct LonLat {
    double lon = 0.0;
    double lat = 0.0;

    friend bool operator==(const LonLat&, const LonLat&) = default;
};

/// A georeferenced perceived-safety score (q-score). The scale is not assumed.
struct ScorePoint {
    std::int64_t id = 0;
    double lon = 0.0;
    double lat = 0.0;
    double qscore = 0.0;

    friend bool operator==(const ScorePoint&, const ScorePoint&) = default;
};

/// Footprint geometry is geographic (x = lon, y = lat); `centroid` is the
/// planar centroid of the projected footprint.
struct BuildingFootprint {
    std::int64_t id = 0;
    Polygon geometry;
    int floors = 1;
    PointXY centroid;
    std::optional<double> qscore_interp;

    friend bool operator==(const BuildingFootprint&, const BuildingFootprint&) = default;
};

struct NeighborhoodArea {
    std::int64_t id = 0;
    std::string name;
    MultiPolygon geometry;  // geographic
    PointXY centroid;       // planar
    std::optional<double> mean_qscore;
    std::int64_t building_count = 0;

    friend bool operator==(const NeighborhoodArea&, const NeighborhoodArea&) = default;
};

struct Dataset {
    std::vector<ScorePoint> points;
    std::vector<BuildingFootprint> buildings;
    std::vector<NeighborhoodArea> neighborhoods;
    LonLat projection_origin;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct RecordError {
    std::size_t row = 0;  // 1-based line number, header is row 1
    std::string message;
};

struct PointLoad {
    std::vector<ScorePoint> points;
    std::vector<RecordError> errors;
};

struct BuildingLoad {
    std::vector<BuildingFootprint> buildings;
    std::size_t excluded_floors = 0;  // floors missing, non-integer or < 1
    std::size_t skipped_geometry = 0; // non-polygonal or invalid geometry
    std::vector<std::string> warnings;
};

struct NeighborhoodLoad {
    std::vector<NeighborhoodArea> neighborhoods;
    std::size_t skipped_geometry = 0;
    std::vector<std::string> warnings;
};

inline constexpr double kEarthRadiusMeters = 6'371'000.0;

/// Local equirectangular projection about `origin`, in meters.
PointXY project(double lon, double lat, LonLat origin);
inline PointXY project(LonLat p, LonLat origin) { return project(p.lon, p.lat, origin); }
LonLat unproject(PointXY p, LonLat origin);
Polygon project(const Polygon& geographic, LonLat origin);
MultiPolygon project(const MultiPolygon& geographic, LonLat origin);
Polygon unproject(const Polygon& planar, LonLat origin);

/// Mean lon/lat of the score points; the default projection origin.
LonLat mean_location(const std::vector<ScorePoint>& points);

/// Reads `lon,lat,qscore` delimited text. Invalid rows are reported in
/// `errors` and skipped; ids are assigned 0.. over the accepted rows.
PointLoad load_points(const std::filesystem::path& path);
PointLoad parse_points(std::istream& in);


/// GeoJSON FeatureCollection readers. A feature's integer "id" member is kept
/// as the record id; otherwise its position in the collection is used.
BuildingLoad load_buildings(const std::filesystem::path& path, LonLat origin);
BuildingLoad parse_buildings(const std::string& geojson, LonLat origin);
NeighborhoodLoad load_neighborhoods(const std::filesystem::path& path, LonLat origin);
NeighborhoodLoad parse_neighborhoods(const std::string& geojson, LonLat origin);

void write_points(std::ostream& out, const std::vector<ScorePoint>& points);
std::string buildings_geojson(const std::vector<BuildingFootprint>& buildings);
std::string neighborhoods_geojson(const std::vector<NeighborhoodArea>& neighborhoods);

/// Shortest round-trip decimal form of a double.
std::string format_double(double value);

/// Reads a whole file; throws LoadError if it cannot be opened.
std::string read_file(const std::filesystem::path& path);

// Synthetic stand-in for the proprietary city data.

struct SyntheticDataset {
    Dataset dataset;
    std::vector<std::int64_t> high_zones;  // planted high-high cluster
    std::vector<std::int64_t> low_zones;   // planted low-low cluster
};

/// Deterministic for a fixed seed. Zones tile a 0.3 x 0.24 degree rectangle
/// centered on (-73.95, 40.70); q-scores carry a planted high and low zone cluster plus a floor
/// effect rising by 0.1 per floor below 8 and falling by 0.05 per floor above.
SyntheticDataset generate_synthetic(std::uint64_t seed, std::size_t n_points, std::size_t n_buildings,
                                    std::size_t n_zones);

}  // namespace esda
