// Command-line front end: run, synth, interpolate, lisa, regress, serve.

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "esda/geodata.hpp"
#include "esda/interpolate.hpp"
#include "esda/lisa.hpp"
#include "esda/pipeline.hpp"
#include "esda/regress.hpp"
#include "esda/service.hpp"
#include "esda/weights.hpp"
#include "json.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitStage = 2;

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path);
    }
    out << text;
}

esda::LonLat neighborhood_origin(const std::string& geojson) {
    const auto doc = nlohmann::json::parse(geojson);
    double lon = 0.0;
    double lat = 0.0;
    std::size_t count = 0;
    auto visit = [&](auto&& self, const nlohmann::json& node) -> void {
        if (node.is_array() && node.size() >= 2 && node[0].is_number() && node[1].is_number()) {
            lon += node[0].get<double>();
            lat += node[1].get<double>();
            ++count;
            return;
        }
        if (node.is_array() || node.is_object()) {
            for (const auto& child : node) {
                self(self, child);
            }
        }
    };
    for (const auto& feature : doc.value("features", nlohmann::json::array())) {
        if (feature.contains("geometry") && feature["geometry"].contains("coordinates")) {
            visit(visit, feature["geometry"]["coordinates"]);
        }
    }
    if (count == 0) {
        throw esda::LoadError("neighborhood layer has no coordinates");
    }
    return {lon / static_cast<double>(count), lat / static_cast<double>(count)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Exploratory spatial data analysis of perceived-safety scores against building height"};
    app.require_subcommand(1);

    // run
    auto* run_cmd = app.add_subcommand("run", "Run the full pipeline and write the artifact set");
    std::string config_path;
    run_cmd->add_option("--config", config_path, "key=value config file");
    std::map<std::string, std::string> overrides;
    const std::vector<std::pair<std::string, std::string>> flag_keys = {
        {"--points", "points"},
        {"--buildings", "buildings"},
        {"--neighborhoods", "neighborhoods"},
        {"--synthetic", "synthetic"},
        {"--n-points", "n_points"},
        {"--n-buildings", "n_buildings"},
        {"--n-zones", "n_zones"},
        {"--k", "k"},
        {"--idw-power", "idw_power"},
        {"--interpolation", "interpolation"},
        {"--floor-threshold", "floor_threshold"},
        {"--n-perm", "n_perm"},
        {"--alpha", "alpha"},
        {"--lowess-frac", "lowess_frac"},
        {"--lowess-iterations", "lowess_iterations"},
        {"--snap-tol", "snap_tol"},
        {"--seed", "seed"},
        {"--output-dir", "output_dir"},
        {"--threads", "threads"},
    };
    std::map<std::string, std::string> flag_values;
    for (const auto& [flag, key] : flag_keys) {
        run_cmd->add_option(flag, flag_values[key], "override config key " + key);
    }

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset (points.csv, buildings.geojson, neighborhoods.geojson)");
    std::uint64_t synth_seed = 0;
    std::size_t synth_points = 20000, synth_buildings = 10000, synth_zones = 195;
    std::string synth_out = "synthetic";
    synth_cmd->add_option("--seed", synth_seed);
    synth_cmd->add_option("--points", synth_points);
    synth_cmd->add_option("--buildings", synth_buildings);
    synth_cmd->add_option("--zones", synth_zones);
    synth_cmd->add_option("--out", synth_out, "output directory");

    // interpolate
    auto* interp_cmd = app.add_subcommand("interpolate", "Interpolate scores onto building centroids");
    std::string interp_points, interp_buildings, interp_out;
    esda::InterpolationOptions interp_options;
    std::string interp_mode = "idw";
    interp_cmd->add_option("--points", interp_points)->required();
    interp_cmd->add_option("--buildings", interp_buildings)->required();
    interp_cmd->add_option("--k", interp_options.k);
    interp_cmd->add_option("--idw-power", interp_options.power);
    interp_cmd->add_option("--interpolation", interp_mode)->check(CLI::IsMember({"idw", "mean"}));
    interp_cmd->add_option("--threads", interp_options.threads);
    interp_cmd->add_option("--out", interp_out, "output .csv or .geojson (default stdout csv)");

    // lisa
    auto* lisa_cmd = app.add_subcommand("lisa", "LISA cluster map over the Voronoi cells of neighborhood centroids");
    std::string lisa_neighborhoods, lisa_out;
    esda::LisaOptions lisa_options;
    double lisa_snap = esda::kDefaultSnapTolerance;
    lisa_cmd->add_option("--neighborhoods", lisa_neighborhoods, "GeoJSON with numeric property mean_qscore")->required();
    lisa_cmd->add_option("--n-perm", lisa_options.n_perm);
    lisa_cmd->add_option("--alpha", lisa_options.alpha);
    lisa_cmd->add_option("--seed", lisa_options.seed);
    lisa_cmd->add_option("--snap-tol", lisa_snap);
    lisa_cmd->add_option("--threads", lisa_options.threads);
    lisa_cmd->add_option("--out", lisa_out, "output CSV (default stdout)");

    // regress
    auto* regress_cmd = app.add_subcommand("regress", "Floors vs score regressions from an id,floors,qscore_interp CSV");
    std::string regress_input, regress_out;
    int regress_threshold = esda::kDefaultFloorThreshold;
    double regress_frac = 0.3;
    int regress_iterations = 3;
    regress_cmd->add_option("--buildings", regress_input, "buildings.csv from interpolate or run")->required();
    regress_cmd->add_option("--floor-threshold", regress_threshold);
    regress_cmd->add_option("--lowess-frac", regress_frac);
    regress_cmd->add_option("--lowess-iterations", regress_iterations);
    regress_cmd->add_option("--out", regress_out, "output JSON (default stdout)");

    // serve
    auto* serve_cmd = app.add_subcommand("serve", "Serve a persisted artifact directory over HTTP");
    std::string serve_dir = "esda-out";
    std::string serve_host = "127.0.0.1";
    int serve_port = 8080;
    serve_cmd->add_option("--dir", serve_dir);
    serve_cmd->add_option("--host", serve_host);
    serve_cmd->add_option("--port", serve_port);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*run_cmd) {
            esda::PipelineConfig config;
            if (!config_path.empty()) {
                config = esda::load_config(config_path);
            }
            for (const auto& [flag, key] : flag_keys) {
                if (run_cmd->count(flag) > 0) {
                    esda::set_config_value(config, key, flag_values[key]);
                }
            }
            esda::validate(config);
            const esda::RunArtifacts run = esda::run_pipeline(config);
            std::size_t significant = 0;
            for (const auto& r : run.lisa) {
                significant += r.cluster != esda::ClusterClass::not_significant &&
                               r.cluster != esda::ClusterClass::isolate;
            }
            std::cout << "wrote " << run.files.size() + 1 << " artifacts to " << run.output_dir.string() << '\n'
                      << "buildings " << run.dataset.buildings.size() << " (excluded " << run.excluded_floors
                      << "), neighborhoods in LISA " << run.lisa.size() << ", significant " << significant << '\n';
            if (const auto& split = run.regression.building.split) {
                std::cout << "split at " << split->threshold << " floors: low slope " << split->low.slope
                          << ", high slope " << split->high.slope << ", low share " << split->low_share << '\n';
            }
        } else if (*synth_cmd) {
            const esda::SyntheticDataset synth =
                esda::generate_synthetic(synth_seed, synth_points, synth_buildings, synth_zones);
            std::filesystem::create_directories(synth_out);
            std::ostringstream points;
            esda::write_points(points, synth.dataset.points);
            write_output((std::filesystem::path(synth_out) / "points.csv").string(), points.str());
            write_output((std::filesystem::path(synth_out) / "buildings.geojson").string(),
                         esda::buildings_geojson(synth.dataset.buildings));
            write_output((std::filesystem::path(synth_out) / "neighborhoods.geojson").string(),
                         esda::neighborhoods_geojson(synth.dataset.neighborhoods));
            write_output((std::filesystem::path(synth_out) / "planted.json").string(),
                         nlohmann::json{{"high_zones", synth.high_zones}, {"low_zones", synth.low_zones}}.dump() + "\n");
            std::cout << "wrote synthetic dataset to " << synth_out << '\n';
        } else if (*interp_cmd) {
            interp_options.mode = interp_mode == "mean" ? esda::InterpolationMode::mean : esda::InterpolationMode::idw;
            esda::Dataset data;
            const esda::PointLoad points = esda::load_points(interp_points);
            for (const auto& e : points.errors) {
                std::cerr << "row " << e.row << ": " << e.message << '\n';
            }
            data.points = points.points;
            data.projection_origin = esda::mean_location(data.points);
            esda::BuildingLoad buildings = esda::load_buildings(interp_buildings, data.projection_origin);
            std::cerr << "excluded " << buildings.excluded_floors << " buildings without valid floors, skipped "
                      << buildings.skipped_geometry << " geometries\n";
            data.buildings = std::move(buildings.buildings);
            data = esda::interpolate_buildings(std::move(data), interp_options);
            const bool geojson = interp_out.ends_with(".geojson") || interp_out.ends_with(".json");
            write_output(interp_out,
                         geojson ? esda::buildings_geojson(data.buildings) : esda::buildings_csv(data.buildings));
        } else if (*lisa_cmd) {
            const std::string text = esda::read_file(lisa_neighborhoods);
            const esda::LonLat origin = neighborhood_origin(text);
            const esda::NeighborhoodLoad load = esda::parse_neighborhoods(text, origin);
            std::vector<esda::PointXY> sites;
            std::vector<double> values;
            std::vector<std::int64_t> ids;
            for (const auto& area : load.neighborhoods) {
                if (area.mean_qscore) {
                    sites.push_back(area.centroid);
                    values.push_back(*area.mean_qscore);
                    ids.push_back(area.id);
                }
            }
            const auto cells = esda::voronoi(sites, esda::expanded_bounds(sites));
            std::vector<esda::Polygon> polygons;
            for (const auto& cell : cells) {
                polygons.push_back(cell.geometry);
            }
            const auto weights = esda::queen_contiguity(std::span<const esda::Polygon>(polygons), lisa_snap);
            auto results = esda::run_lisa(values, weights, lisa_options);
            for (std::size_t i = 0; i < results.size(); ++i) {
                results[i].observation_id = ids[i];
            }
            write_output(lisa_out, esda::lisa_csv(results));
        } else if (*regress_cmd) {
            std::ifstream in(regress_input);
            if (!in) {
                throw esda::LoadError("cannot open " + regress_input);
            }
            std::string line;
            std::getline(in, line);
            if (line.rfind("id,floors,qscore_interp", 0) != 0) {
                throw esda::LoadError("expected header id,floors,qscore_interp");
            }
            std::vector<double> floors, scores;
            while (std::getline(in, line)) {
                std::istringstream row(line);
                std::string id, f, q;
                if (std::getline(row, id, ',') && std::getline(row, f, ',') && std::getline(row, q) && !q.empty()) {
                    floors.push_back(std::stod(f));
                    scores.push_back(std::stod(q));
                }
            }
            esda::RegressionReport report;
            report.building.granularity = "building";
            report.building.n = floors.size();
            report.building.fit = esda::ols(floors, scores);
            try {
                report.building.split =
                    esda::split_regression(std::span<const double>(floors), scores, regress_threshold);
            } catch (const esda::RegressionError& e) {
                report.building.split_note = e.what();
            }
            report.building.lowess = esda::lowess(floors, scores, regress_frac, regress_iterations);
            report.neighborhood.granularity = "neighborhood";
            report.neighborhood.split_note = "not computed by the regress verb";
            write_output(regress_out, esda::regression_json(report) + "\n");
        } else if (*serve_cmd) {
            esda::ArtifactServer server{esda::ArtifactService(serve_dir)};
            const int port = server.bind(serve_host, serve_port);
            std::cout << "serving " << serve_dir << " on http://" << serve_host << ':' << port << std::endl;
            server.listen();
        }
    } catch (const esda::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const esda::StageError& e) {
        std::cerr << "stage failure in " << e.what() << '\n';
        return kExitStage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitStage;
    }
    return 0;
}
