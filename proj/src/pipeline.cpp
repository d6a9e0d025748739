#include "esda/pipeline.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>

#include "json.hpp"

namespace esda {

namespace {

using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const char* begin = value.data();
    const char* end = value.data() + value.size();
    if (begin != end && *begin == '+') {
        ++begin;
    }
    const auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc() || ptr != end || begin == end) {
        throw ConfigError("invalid value '" + value + "' for " + key);
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") {
        return true;
    }
    if (value == "false" || value == "0" || value == "no") {
        return false;
    }
    throw ConfigError("invalid boolean '" + value + "' for " + key);
}

fs::path resolve(const std::string& value, const fs::path& base_dir) {
    fs::path p(value);
    if (p.is_relative() && !base_dir.empty()) {
        p = base_dir / p;
    }
    return p;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    return out + '"';
}

ordered_json fit_json(const RegressionFit& fit) {
    return {{"slope", fit.slope}, {"intercept", fit.intercept}, {"r2", fit.r2}, {"n", fit.n}};
}

ordered_json granularity_json(const GranularityReport& r) {
    ordered_json out;
    out["granularity"] = r.granularity;
    out["n"] = r.n;
    out["ols"] = r.fit ? fit_json(*r.fit) : ordered_json(nullptr);
    if (r.split) {
        out["split"] = {{"threshold", r.split->threshold},
                        {"low_share", r.split->low_share},
                        {"low", fit_json(r.split->low)},
                        {"high", fit_json(r.split->high)}};
    } else {
        out["split"] = nullptr;
    }
    if (!r.split_note.empty()) {
        out["split_note"] = r.split_note;
    }
    if (r.lowess) {
        out["lowess"] = {{"frac", r.lowess->frac},
                         {"iterations", r.lowess->iterations},
                         {"x", r.lowess->x},
                         {"y", r.lowess->y}};
    } else {
        out["lowess"] = nullptr;
    }
    return out;
}

ordered_json polygon_coordinates(const Polygon& polygon) {
    ordered_json rings = ordered_json::array();
    auto ring_json = [](const Ring& ring) {
        ordered_json out = ordered_json::array();
        for (const PointXY& p : ring) {
            out.push_back({p.x, p.y});
        }
        return out;
    };
    rings.push_back(ring_json(polygon.exterior));
    for (const Ring& hole : polygon.holes) {
        rings.push_back(ring_json(hole));
    }
    return rings;
}

std::string neighborhoods_csv(const Aggregation& agg) {
    std::ostringstream out;
    out << "id,name,building_count,mean_floors,mean_qscore\n";
    for (std::size_t k = 0; k < agg.neighborhoods.size(); ++k) {
        const NeighborhoodArea& a = agg.neighborhoods[k];
        out << a.id << ',' << csv_field(a.name) << ',' << a.building_count << ','
            << (agg.mean_floors[k] ? format_double(*agg.mean_floors[k]) : "") << ','
            << (a.mean_qscore ? format_double(*a.mean_qscore) : "") << '\n';
    }
    return out.str();
}

std::string lisa_geojson(const RunArtifacts& run) {
    ordered_json features = ordered_json::array();
    for (std::size_t s = 0; s < run.lisa.size(); ++s) {
        const NeighborhoodArea& area = run.aggregation.neighborhoods[run.lisa_members[s]];
        const LisaResult& r = run.lisa[s];
        ordered_json properties{{"neighborhood_id", area.id},
                                {"name", area.name},
                                {"mean_qscore", *area.mean_qscore},
                                {"z", r.z},
                                {"lag", r.lag},
                                {"local_i", r.local_i},
                                {"expected_i", r.expected_i},
                                {"pseudo_p", r.pseudo_p},
                                {"cluster", std::string(to_string(r.cluster))}};
        features.push_back(
            {{"type", "Feature"},
             {"id", area.id},
             {"geometry",
              {{"type", "Polygon"},
               {"coordinates", polygon_coordinates(unproject(run.voronoi[s].geometry, run.dataset.projection_origin))}}},
             {"properties", std::move(properties)}});
    }
    return ordered_json{{"type", "FeatureCollection"}, {"features", std::move(features)}}.dump();
}

std::string write_text_file(const fs::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << contents;
    out.close();
    if (!out) {
        throw std::runtime_error("failed writing " + path.string());
    }
    return contents;
}

template <typename Fn>
auto run_stage(const char* stage, Fn&& fn) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

GranularityReport regress_granularity(std::string name, const std::vector<double>& x, const std::vector<double>& y,
                                      const PipelineConfig& config, bool split_required) {
    GranularityReport report;
    report.granularity = std::move(name);
    report.n = x.size();
    try {
        report.fit = ols(x, y);
    } catch (const RegressionError& e) {
        if (split_required) {
            throw;
        }
        report.split_note = std::string("ols unavailable: ") + e.what();
    }
    try {
        report.split = split_regression(std::span<const double>(x), y, config.floor_threshold);
    } catch (const RegressionError& e) {
        if (split_required) {
            throw;
        }
        report.split_note = e.what();
    }
    if (x.size() >= 3) {
        report.lowess = lowess(x, y, config.lowess_frac, config.lowess_iterations);
    }
    return report;
}

}  // namespace

void set_config_value(PipelineConfig& c, const std::string& raw_key, const std::string& raw_value,
                      const fs::path& base_dir) {
    const std::string key = trim(raw_key);
    const std::string value = trim(raw_value);
    if (key == "points") {
        c.points = resolve(value, base_dir);
    } else if (key == "buildings") {
        c.buildings = resolve(value, base_dir);
    } else if (key == "neighborhoods") {
        c.neighborhoods = resolve(value, base_dir);
    } else if (key == "synthetic") {
        c.synthetic = parse_bool(key, value);
    } else if (key == "n_points") {
        c.n_points = parse_number<std::size_t>(key, value);
    } else if (key == "n_buildings") {
        c.n_buildings = parse_number<std::size_t>(key, value);
    } else if (key == "n_zones") {
        c.n_zones = parse_number<std::size_t>(key, value);
    } else if (key == "k") {
        c.k = parse_number<std::size_t>(key, value);
    } else if (key == "idw_power") {
        c.idw_power = parse_number<double>(key, value);
    } else if (key == "interpolation") {
        if (value == "idw") {
            c.interpolation = InterpolationMode::idw;
        } else if (value == "mean") {
            c.interpolation = InterpolationMode::mean;
        } else {
            throw ConfigError("interpolation must be 'idw' or 'mean', got '" + value + "'");
        }
    } else if (key == "floor_threshold") {
        c.floor_threshold = parse_number<int>(key, value);
    } else if (key == "n_perm") {
        c.n_perm = parse_number<std::size_t>(key, value);
    } else if (key == "alpha") {
        c.alpha = parse_number<double>(key, value);
    } else if (key == "lowess_frac") {
        c.lowess_frac = parse_number<double>(key, value);
    } else if (key == "lowess_iterations") {
        c.lowess_iterations = parse_number<int>(key, value);
    } else if (key == "snap_tol") {
        c.snap_tol = parse_number<double>(key, value);
    } else if (key == "seed") {
        c.seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "output_dir") {
        c.output_dir = resolve(value, base_dir);
    } else if (key == "threads") {
        c.threads = parse_number<unsigned>(key, value);
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }
}

PipelineConfig parse_config(std::istream& in, const fs::path& base_dir) {
    PipelineConfig config;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        if (trim(line).empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(number) + ": expected key=value");
        }
        set_config_value(config, line.substr(0, eq), line.substr(eq + 1), base_dir);
    }
    return config;
}

PipelineConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    return parse_config(in, path.parent_path());
}

void validate(const PipelineConfig& c) {
    if (c.k < 1) throw ConfigError("k must be at least 1");
    if (!(c.idw_power > 0.0)) throw ConfigError("idw_power must be positive");
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (c.n_perm < 1) throw ConfigError("n_perm must be at least 1");
    if (!(c.lowess_frac > 0.0 && c.lowess_frac <= 1.0)) throw ConfigError("lowess_frac must lie in (0, 1]");
    if (c.lowess_iterations < 0) throw ConfigError("lowess_iterations must be non-negative");
    if (c.floor_threshold < 2) throw ConfigError("floor_threshold must be at least 2");
    if (!(c.snap_tol >= 0.0)) throw ConfigError("snap_tol must be non-negative");
    if (c.output_dir.empty()) throw ConfigError("output_dir is required");
    if (c.synthetic) {
        if (c.n_points < 1 || c.n_buildings < 1 || c.n_zones < 1) {
            throw ConfigError("synthetic sizes must be at least 1");
        }
    } else if (c.points.empty() || c.buildings.empty() || c.neighborhoods.empty()) {
        throw ConfigError("points, buildings and neighborhoods are required unless synthetic=true");
    }
}

std::string config_text(const PipelineConfig& c) {
    std::ostringstream out;
    if (c.synthetic) {
        out << "synthetic=true\n"
            << "n_points=" << c.n_points << "\nn_buildings=" << c.n_buildings << "\nn_zones=" << c.n_zones << '\n';
    } else {
        out << "points=" << c.points.string() << "\nbuildings=" << c.buildings.string()
            << "\nneighborhoods=" << c.neighborhoods.string() << '\n';
    }
    out << "k=" << c.k << "\nidw_power=" << format_double(c.idw_power)
        << "\ninterpolation=" << (c.interpolation == InterpolationMode::idw ? "idw" : "mean")
        << "\nfloor_threshold=" << c.floor_threshold << "\nn_perm=" << c.n_perm
        << "\nalpha=" << format_double(c.alpha) << "\nlowess_frac=" << format_double(c.lowess_frac)
        << "\nlowess_iterations=" << c.lowess_iterations << "\nsnap_tol=" << format_double(c.snap_tol)
        << "\nseed=" << c.seed << "\noutput_dir=" << c.output_dir.string() << '\n';
    return out.str();
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * length);
    for (unsigned int i = 0; i < length; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

std::string buildings_csv(const std::vector<BuildingFootprint>& buildings) {
    std::ostringstream out;
    out << "id,floors,qscore_interp\n";
    for (const BuildingFootprint& b : buildings) {
        out << b.id << ',' << b.floors << ',' << (b.qscore_interp ? format_double(*b.qscore_interp) : "") << '\n';
    }
    return out.str();
}

std::string lowess_csv(const LowessCurve& curve) {
    std::ostringstream out;
    out << "x,y_smooth\n";
    for (std::size_t i = 0; i < curve.x.size(); ++i) {
        out << format_double(curve.x[i]) << ',' << format_double(curve.y[i]) << '\n';
    }
    return out.str();
}

std::string regression_json(const RegressionReport& report) {
    return ordered_json{{"building", granularity_json(report.building)},
                        {"neighborhood", granularity_json(report.neighborhood)}}
        .dump();
}

std::string voronoi_geojson(const std::vector<VoronoiCell>& cells, LonLat origin) {
    ordered_json features = ordered_json::array();
    for (const VoronoiCell& cell : cells) {
        features.push_back({{"type", "Feature"},
                            {"geometry",
                             {{"type", "Polygon"}, {"coordinates", polygon_coordinates(unproject(cell.geometry, origin))}}},
                            {"properties", {{"site_id", cell.site_id}}}});
    }
    return ordered_json{{"type", "FeatureCollection"}, {"features", std::move(features)}}.dump();
}

std::string lisa_csv(const std::vector<LisaResult>& results) {
    std::ostringstream out;
    out << "observation_id,z,lag,local_i,expected_i,pseudo_p,cluster\n";
    for (const LisaResult& r : results) {
        out << r.observation_id << ',' << format_double(r.z) << ',' << format_double(r.lag) << ','
            << format_double(r.local_i) << ',' << format_double(r.expected_i) << ',' << format_double(r.pseudo_p)
            << ',' << to_string(r.cluster) << '\n';
    }
    return out.str();
}

RunArtifacts run_pipeline(const PipelineConfig& config) {
    validate(config);
    RunArtifacts run;

    run_stage("load", [&] {
        if (config.synthetic) {
            run.dataset = generate_synthetic(config.seed, config.n_points, config.n_buildings, config.n_zones).dataset;
            return 0;
        }
        PointLoad points = load_points(config.points);
        run.rejected_points = points.errors.size();
        run.dataset.points = std::move(points.points);
        run.dataset.projection_origin = mean_location(run.dataset.points);
        BuildingLoad buildings = load_buildings(config.buildings, run.dataset.projection_origin);
        run.excluded_floors = buildings.excluded_floors;
        run.skipped_geometry = buildings.skipped_geometry;
        run.dataset.buildings = std::move(buildings.buildings);
        NeighborhoodLoad areas = load_neighborhoods(config.neighborhoods, run.dataset.projection_origin);
        run.skipped_geometry += areas.skipped_geometry;
        run.dataset.neighborhoods = std::move(areas.neighborhoods);
        if (run.dataset.buildings.empty()) {
            throw LoadError("no usable buildings");
        }
        if (run.dataset.neighborhoods.empty()) {
            throw LoadError("no usable neighborhoods");
        }
        return 0;
    });

    run_stage("interpolate", [&] {
        run.dataset = interpolate_buildings(std::move(run.dataset),
                                            {config.k, config.idw_power, config.interpolation, config.threads});
        return 0;
    });

    run_stage("aggregate", [&] {
        run.aggregation = aggregate_neighborhoods(run.dataset.buildings, run.dataset.neighborhoods,
                                                  run.dataset.projection_origin, config.threads);
        for (std::size_t k = 0; k < run.aggregation.neighborhoods.size(); ++k) {
            if (run.aggregation.neighborhoods[k].mean_qscore) {
                run.lisa_members.push_back(k);
            }
        }
        return 0;
    });

    run_stage("voronoi", [&] {
        std::vector<PointXY> sites;
        for (std::size_t k : run.lisa_members) {
            sites.push_back(run.aggregation.neighborhoods[k].centroid);
        }
        run.voronoi = voronoi(sites, expanded_bounds(sites));
        return 0;
    });

    run_stage("weights", [&] {
        std::vector<Polygon> cells;
        cells.reserve(run.voronoi.size());
        for (const VoronoiCell& cell : run.voronoi) {
            cells.push_back(cell.geometry);
        }
        run.weights = queen_contiguity(std::span<const Polygon>(cells), config.snap_tol);
        return 0;
    });

    run_stage("lisa", [&] {
        std::vector<double> values;
        for (std::size_t k : run.lisa_members) {
            values.push_back(*run.aggregation.neighborhoods[k].mean_qscore);
        }
        run.lisa = run_lisa(values, run.weights, {config.n_perm, config.alpha, config.seed, config.threads});
        for (std::size_t s = 0; s < run.lisa.size(); ++s) {
            run.lisa[s].observation_id = run.aggregation.neighborhoods[run.lisa_members[s]].id;
        }
        return 0;
    });

    run_stage("regress", [&] {
        std::vector<double> x;
        std::vector<double> y;
        for (const BuildingFootprint& b : run.dataset.buildings) {
            x.push_back(b.floors);
            y.push_back(*b.qscore_interp);
        }
        run.regression.building = regress_granularity("building", x, y, config, true);
        x.clear();
        y.clear();
        for (std::size_t k : run.lisa_members) {
            x.push_back(*run.aggregation.mean_floors[k]);
            y.push_back(*run.aggregation.neighborhoods[k].mean_qscore);
        }
        run.regression.neighborhood = regress_granularity("neighborhood", x, y, config, false);
        return 0;
    });

    run_stage("persist", [&] {
        fs::path out_dir = config.output_dir.lexically_normal();
        if (out_dir.filename().empty()) {
            out_dir = out_dir.parent_path();
        }
        const fs::path staging = out_dir.parent_path() / (out_dir.filename().string() + ".partial");
        try {
            fs::remove_all(staging);
            fs::create_directories(staging);
            const std::vector<std::pair<std::string, std::string>> contents = {
                {"buildings.geojson", buildings_geojson(run.dataset.buildings)},
                {"buildings.csv", buildings_csv(run.dataset.buildings)},
                {"neighborhoods.geojson", neighborhoods_geojson(run.aggregation.neighborhoods)},
                {"neighborhoods.csv", neighborhoods_csv(run.aggregation)},
                {"voronoi.geojson", voronoi_geojson(run.voronoi, run.dataset.projection_origin)},
                {"weights.gal",
                 [&] {
                     std::ostringstream gal;
                     write_gal(gal, run.weights);
                     return gal.str();
                 }()},
                {"lisa.geojson", lisa_geojson(run)},
                {"lisa.csv", lisa_csv(run.lisa)},
                {"regression.json", regression_json(run.regression)},
                {"lowess_building.csv",
                 run.regression.building.lowess ? lowess_csv(*run.regression.building.lowess) : "x,y_smooth\n"},
                {"lowess_neighborhood.csv",
                 run.regression.neighborhood.lowess ? lowess_csv(*run.regression.neighborhood.lowess)
                                                    : "x,y_smooth\n"},
            };
            for (const auto& [name, text] : contents) {
                write_text_file(staging / name, text);
                run.files.push_back({name, sha256_hex(text), text.size()});
            }

            ordered_json config_echo = ordered_json::object();
            std::istringstream echo(config_text(config));
            for (std::string line; std::getline(echo, line);) {
                const auto eq = line.find('=');
                config_echo[line.substr(0, eq)] = line.substr(eq + 1);
            }
            ordered_json artifacts = ordered_json::array();
            for (const ArtifactFile& f : run.files) {
                artifacts.push_back({{"name", f.name}, {"sha256", f.sha256}, {"bytes", f.bytes}});
            }
            const ordered_json manifest{
                {"config", std::move(config_echo)},
                {"stages", kStageOrder},
                {"counts",
                 {{"points", run.dataset.points.size()},
                  {"rejected_points", run.rejected_points},
                  {"buildings", run.dataset.buildings.size()},
                  {"excluded_floors", run.excluded_floors},
                  {"skipped_geometry", run.skipped_geometry},
                  {"neighborhoods", run.aggregation.neighborhoods.size()},
                  {"empty_neighborhoods", run.aggregation.empty},
                  {"unassigned_buildings", run.aggregation.unassigned.size()},
                  {"lisa_observations", run.lisa.size()}}},
                {"artifacts", std::move(artifacts)}};
            run.manifest = manifest.dump(2) + "\n";
            write_text_file(staging / "manifest.json", run.manifest);

            fs::create_directories(out_dir);
            for (const ArtifactFile& f : run.files) {
                fs::rename(staging / f.name, out_dir / f.name);
            }
            fs::rename(staging / "manifest.json", out_dir / "manifest.json");
            fs::remove_all(staging);
        } catch (...) {
            std::error_code ignored;
            fs::remove_all(staging, ignored);
            throw;
        }
        run.output_dir = out_dir;
        return 0;
    });
    return run;
}

bool verify_manifest(const fs::path& output_dir) {
    const auto manifest = nlohmann::json::parse(read_file(output_dir / "manifest.json"));
    for (const auto& artifact : manifest.at("artifacts")) {
        const std::string text = read_file(output_dir / artifact.at("name").get<std::string>());
        if (sha256_hex(text) != artifact.at("sha256").get<std::string>() ||
            text.size() != artifact.at("bytes").get<std::uintmax_t>()) {
            return false;
        }
    }
    return true;
}

}  // namespace esda
