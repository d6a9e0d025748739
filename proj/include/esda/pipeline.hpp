#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "esda/geodata.hpp"
#include "esda/geometry.hpp"
#include "esda/interpolate.hpp"
#include "esda/lisa.hpp"
#include "esda/regress.hpp"
#include "esda/weights.hpp"

namespace esda {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A failure inside one pipeline stage; what() reads "<stage>: <cause>".
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& cause)
        : std::runtime_error(stage + ": " + cause), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

struct PipelineConfig {
    std::filesystem::path points;
    std::filesystem::path buildings;
    std::filesystem::path neighborhoods;
    bool synthetic = false;
    std::size_t n_points = 20000;
    std::size_t n_buildings = 10000;
    std::size_t n_zones = 195;

    std::size_t k = 30;
    double idw_power = 2.0;
    InterpolationMode interpolation = InterpolationMode::idw;
    int floor_threshold = kDefaultFloorThreshold;
    std::size_t n_perm = 999;
    double alpha = 0.05;
    double lowess_frac = 0.3;
    int lowess_iterations = 3;
    double snap_tol = kDefaultSnapTolerance;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "esda-out";
    unsigned threads = 0;  // execution detail, not part of the manifest
};

/// Applies one key=value setting. Relative paths are resolved against
/// `base_dir` when it is non-empty. Throws ConfigError.
void set_config_value(PipelineConfig& config, const std::string& key, const std::string& value,
                      const std::filesystem::path& base_dir = {});

/// Flat key=value text, '#' starts a comment.
PipelineConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);
void validate(const PipelineConfig& config);

/// key=value echo of every setting that influences the artifacts.
std::string config_text(const PipelineConfig& config);

struct GranularityReport {
    std::string granularity;  // "building" or "neighborhood"
    std::size_t n = 0;
    std::optional<RegressionFit> fit;
    std::optional<SplitRegression> split;
    std::string split_note;   // why `split` is absent
    std::optional<LowessCurve> lowess;
};

struct RegressionReport {
    GranularityReport building;
    GranularityReport neighborhood;
};

struct ArtifactFile {
    std::string name;
    std::string sha256;
    std::uintmax_t bytes = 0;
};

struct RunArtifacts {
    std::filesystem::path output_dir;
    Dataset dataset;                       // buildings carry qscore_interp
    std::size_t excluded_floors = 0;
    std::size_t skipped_geometry = 0;
    std::size_t rejected_points = 0;
    Aggregation aggregation;
    std::vector<std::size_t> lisa_members;  // indices into aggregation.neighborhoods
    std::vector<VoronoiCell> voronoi;       // planar, one per LISA member
    SpatialWeights weights;                 // binary queen contiguity over voronoi
    std::vector<LisaResult> lisa;
    RegressionReport regression;
    std::vector<ArtifactFile> files;
    std::string manifest;                   // manifest.json contents
};

inline constexpr const char* kStageOrder[] = {"load", "interpolate", "aggregate", "voronoi",
                                              "weights", "lisa", "regress", "persist"};

/// Runs every stage in order and writes the artifact set to output_dir.
/// Throws StageError; nothing is left in output_dir by a failed run.
RunArtifacts run_pipeline(const PipelineConfig& config);

/// Recomputes every artifact hash listed in output_dir/manifest.json.
bool verify_manifest(const std::filesystem::path& output_dir);

std::string sha256_hex(std::string_view data);

// Serializers shared by the pipeline and the CLI verbs.
std::string buildings_csv(const std::vector<BuildingFootprint>& buildings);
std::string lowess_csv(const LowessCurve& curve);
std::string regression_json(const RegressionReport& report);
std::string voronoi_geojson(const std::vector<VoronoiCell>& cells, LonLat origin);
std::string lisa_csv(const std::vector<LisaResult>& results);

}  // namespace esda
