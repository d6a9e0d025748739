#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "esda/pipeline.hpp"
#include "json.hpp"

using namespace esda;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("esda_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

PipelineConfig small_synthetic(const fs::path& out) {
    PipelineConfig c;
    c.synthetic = true;
    c.n_points = 4000;
    c.n_buildings = 2000;
    c.n_zones = 40;
    c.n_perm = 99;
    c.seed = 7;
    c.output_dir = out;
    return c;
}

std::vector<std::pair<std::string, std::string>> hashes(const RunArtifacts& run) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& f : run.files) {
        out.emplace_back(f.name, f.sha256);
    }
    out.emplace_back("manifest.json", sha256_hex(run.manifest));
    return out;
}

}  // namespace

TEST_CASE("config text parses with comments and overrides defaults") {
    std::istringstream in(
        "# comment\n"
        "synthetic = true\n"
        "k=12   # trailing comment\n"
        "\n"
        "interpolation=mean\n"
        "alpha=0.01\n"
        "output_dir=out\n");
    const PipelineConfig c = parse_config(in, "/data/run");
    CHECK(c.synthetic);
    CHECK(c.k == 12);
    CHECK(c.interpolation == InterpolationMode::mean);
    CHECK(c.alpha == 0.01);
    CHECK(c.output_dir == fs::path("/data/run/out"));
    CHECK(c.n_perm == 999);
    CHECK(c.lowess_frac == 0.3);
    CHECK(c.floor_threshold == 8);
    CHECK_NOTHROW(validate(c));
}

TEST_CASE("config errors") {
    PipelineConfig c;
    CHECK_THROWS_AS(set_config_value(c, "bogus", "1"), ConfigError);
    CHECK_THROWS_AS(set_config_value(c, "k", "ten"), ConfigError);
    CHECK_THROWS_AS(set_config_value(c, "interpolation", "kriging"), ConfigError);
    std::istringstream no_equals("k 30\n");
    CHECK_THROWS_AS(parse_config(no_equals), ConfigError);
    CHECK_THROWS_AS(validate(c), ConfigError);  // no inputs and not synthetic
    c.synthetic = true;
    c.alpha = 1.0;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c.alpha = 0.05;
    c.floor_threshold = 1;
    CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("config echo round-trips every artifact-relevant key") {
    PipelineConfig c;
    c.synthetic = true;
    c.k = 17;
    c.idw_power = 1.5;
    c.seed = 99;
    c.threads = 3;
    std::istringstream echo(config_text(c));
    const PipelineConfig back = parse_config(echo);
    CHECK(back.k == 17);
    CHECK(back.idw_power == 1.5);
    CHECK(back.seed == 99);
    CHECK(back.threads == 0);
    CHECK(config_text(c).find("threads") == std::string::npos);
}

TEST_CASE("synthetic run writes a complete, verifiable artifact set") {
    const fs::path dir = scratch("complete");
    const RunArtifacts run = run_pipeline(small_synthetic(dir / "out"));
    for (const char* name : {"buildings.geojson", "buildings.csv", "neighborhoods.geojson", "neighborhoods.csv",
                             "voronoi.geojson", "weights.gal", "lisa.geojson", "lisa.csv", "regression.json",
                             "lowess_building.csv", "lowess_neighborhood.csv", "manifest.json"}) {
        CHECK_MESSAGE(fs::exists(dir / "out" / name), name);
    }
    CHECK_FALSE(fs::exists(dir / "out.partial"));
    CHECK(verify_manifest(dir / "out"));

    const auto manifest = nlohmann::json::parse(run.manifest);
    CHECK(manifest["counts"]["buildings"] == 2000);
    CHECK(manifest["config"]["seed"] == "7");
    const auto lisa = nlohmann::json::parse(std::ifstream(dir / "out" / "lisa.geojson"));
    CHECK(lisa["features"].size() == run.lisa.size());
    CHECK(run.voronoi.size() == run.lisa.size());

    // Tampering is detected.
    std::ofstream(dir / "out" / "weights.gal", std::ios::app) << "\n";
    CHECK_FALSE(verify_manifest(dir / "out"));
    fs::remove_all(dir);
}

TEST_CASE("identical configs give byte-identical artifacts for any thread count") {
    const fs::path dir = scratch("determinism");
    PipelineConfig a = small_synthetic(dir / "a");
    a.threads = 1;
    PipelineConfig b = small_synthetic(dir / "b");
    b.threads = 4;
    PipelineConfig c = small_synthetic(dir / "a");  // same output dir as a, rerun
    c.threads = 2;
    const auto ha = hashes(run_pipeline(a));
    const auto hb = hashes(run_pipeline(b));
    CHECK(ha == hashes(run_pipeline(c)));
    // The manifest echoes output_dir, so compare everything else.
    REQUIRE(ha.size() == hb.size());
    for (std::size_t i = 0; i + 1 < ha.size(); ++i) {
        CHECK(ha[i] == hb[i]);
    }
    fs::remove_all(dir);
}

TEST_CASE("k larger than the point count aborts in the interpolate stage") {
    const fs::path dir = scratch("k_too_large");
    PipelineConfig c = small_synthetic(dir / "out");
    c.n_points = 20;
    c.k = 30;
    try {
        run_pipeline(c);
        FAIL("expected a stage error");
    } catch (const StageError& e) {
        CHECK(e.stage() == "interpolate");
        CHECK(std::string(e.what()).find("exceeds") != std::string::npos);
    }
    CHECK_FALSE(fs::exists(dir / "out" / "manifest.json"));
    CHECK_FALSE(fs::exists(dir / "out.partial"));
    fs::remove_all(dir);
}

TEST_CASE("missing input files fail in the load stage") {
    const fs::path dir = scratch("missing");
    PipelineConfig c;
    c.points = dir / "nope.csv";
    c.buildings = dir / "nope.geojson";
    c.neighborhoods = dir / "nope2.geojson";
    c.output_dir = dir / "out";
    CHECK_THROWS_WITH_AS(run_pipeline(c), doctest::Contains("load"), StageError);
    fs::remove_all(dir);
}

TEST_CASE("file inputs reproduce the synthetic run") {
    const fs::path dir = scratch("files");
    const PipelineConfig syn = small_synthetic(dir / "syn");
    const RunArtifacts first = run_pipeline(syn);

    const SyntheticDataset data = generate_synthetic(syn.seed, syn.n_points, syn.n_buildings, syn.n_zones);
    {
        std::ofstream pts(dir / "points.csv");
        write_points(pts, data.dataset.points);
        std::ofstream(dir / "buildings.geojson") << buildings_geojson(data.dataset.buildings);
        std::ofstream(dir / "neighborhoods.geojson") << neighborhoods_geojson(data.dataset.neighborhoods);
        std::ofstream cfg(dir / "run.cfg");
        cfg << "points=points.csv\nbuildings=buildings.geojson\nneighborhoods=neighborhoods.geojson\n"
               "n_perm=99\nseed=7\noutput_dir=fromfiles\n";
    }
    const RunArtifacts second = run_pipeline(load_config(dir / "run.cfg"));
    CHECK(fs::exists(dir / "fromfiles" / "manifest.json"));
    // Interpolation uses the mean point location as origin, so compare statistics.
    REQUIRE(first.lisa.size() == second.lisa.size());
    CHECK(first.regression.building.split->low.n == second.regression.building.split->low.n);
    CHECK(second.dataset.buildings.size() == first.dataset.buildings.size());
    fs::remove_all(dir);
}

#ifdef ESDA_CLI_PATH
TEST_CASE("CLI exit codes") {
    const fs::path dir = scratch("cli");
    const std::string cli = ESDA_CLI_PATH;
    auto run = [](const std::string& cmd) {
        const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
        return WEXITSTATUS(status);
    };
    CHECK(run(cli + " run --synthetic true --n-points 2000 --n-buildings 800 --n-zones 30 --n-perm 49 --output-dir " +
              (dir / "ok").string()) == 0);
    CHECK(fs::exists(dir / "ok" / "manifest.json"));
    CHECK(run(cli + " run --synthetic true --alpha 2 --output-dir " + (dir / "bad").string()) == 1);
    CHECK(run(cli + " run --config " + (dir / "missing.cfg").string()) == 1);
    CHECK(run(cli + " run --synthetic true --n-points 10 --k 30 --output-dir " + (dir / "stage").string()) == 2);
    CHECK(run(cli + " synth --seed 3 --points 1500 --buildings 2000 --zones 12 --out " + (dir / "synth").string()) == 0);
    CHECK(run(cli + " interpolate --points " + (dir / "synth" / "points.csv").string() + " --buildings " +
              (dir / "synth" / "buildings.geojson").string() + " --out " + (dir / "b.csv").string()) == 0);
    CHECK(run(cli + " regress --buildings " + (dir / "b.csv").string() + " --out " + (dir / "r.json").string()) == 0);
    CHECK(run(cli + " lisa --neighborhoods " + (dir / "ok" / "neighborhoods.geojson").string() + " --n-perm 49 --out " +
              (dir / "l.csv").string()) == 0);
    CHECK(run(cli + " bogus") == 1);
    fs::remove_all(dir);
}
#endif
