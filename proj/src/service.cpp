#include "esda/service.hpp"

#include <charconv>
#include <sstream>

#include "esda/geodata.hpp"
#include "httplib.h"
#include "json.hpp"

namespace esda {

namespace {

using ordered_json = nlohmann::ordered_json;

// Minimal RFC 4180 reader for the artifact CSVs (quoted fields allowed).
std::vector<std::vector<std::string>> read_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            row.push_back(std::move(field));
            field.clear();
            rows.push_back(std::move(row));
            row.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    if (!field.empty() || !row.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

ordered_json number_or_null(const std::string& s) {
    if (s.empty()) {
        return nullptr;
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ServiceError("artifact field '" + s + "' is not numeric");
    }
    return v;
}

std::int64_t integer(const std::string& s) {
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ServiceError("artifact field '" + s + "' is not an integer");
    }
    return v;
}

std::string building_scatter(const std::string& csv) {
    const auto rows = read_csv(csv);
    if (rows.empty() || rows.front() != std::vector<std::string>{"id", "floors", "qscore_interp"}) {
        throw ServiceError("buildings.csv has an unexpected header");
    }
    ordered_json records = ordered_json::array();
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != 3) {
            throw ServiceError("buildings.csv row " + std::to_string(r + 1) + " has the wrong field count");
        }
        records.push_back(
            {{"id", integer(rows[r][0])}, {"floors", integer(rows[r][1])}, {"qscore_interp", number_or_null(rows[r][2])}});
    }
    return ordered_json{{"granularity", "building"}, {"records", std::move(records)}}.dump();
}

std::string neighborhood_scatter(const std::string& csv) {
    const auto rows = read_csv(csv);
    if (rows.empty() ||
        rows.front() != std::vector<std::string>{"id", "name", "building_count", "mean_floors", "mean_qscore"}) {
        throw ServiceError("neighborhoods.csv has an unexpected header");
    }
    ordered_json records = ordered_json::array();
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != 5) {
            throw ServiceError("neighborhoods.csv row " + std::to_string(r + 1) + " has the wrong field count");
        }
        records.push_back({{"id", integer(rows[r][0])},
                           {"name", rows[r][1]},
                           {"building_count", integer(rows[r][2])},
                           {"mean_floors", number_or_null(rows[r][3])},
                           {"mean_qscore", number_or_null(rows[r][4])}});
    }
    return ordered_json{{"granularity", "neighborhood"}, {"records", std::move(records)}}.dump();
}

HttpResponse json_error(int status, const std::string& message) {
    return {status, "application/json", ordered_json{{"error", message}}.dump()};
}

std::string load_artifact(const std::filesystem::path& dir, const char* name) {
    try {
        return read_file(dir / name);
    } catch (const LoadError& e) {
        throw ServiceError(std::string("artifact set incomplete: ") + e.what());
    }
}

}  // namespace

ArtifactService::ArtifactService(const std::filesystem::path& dir)
    : buildings_geojson_(load_artifact(dir, "buildings.geojson")),
      neighborhoods_geojson_(load_artifact(dir, "neighborhoods.geojson")),
      lisa_geojson_(load_artifact(dir, "lisa.geojson")),
      regression_json_(load_artifact(dir, "regression.json")),
      building_scatter_(building_scatter(load_artifact(dir, "buildings.csv"))),
      neighborhood_scatter_(neighborhood_scatter(load_artifact(dir, "neighborhoods.csv"))) {}

HttpResponse ArtifactService::handle(const std::string& method, const std::string& path,
                                     const std::map<std::string, std::string>& query) const {
    if (method != "GET") {
        return json_error(405, "read-only service");
    }
    if (path == "/api/health") {
        return {200, "application/json", R"({"status":"ok"})"};
    }
    if (path == "/api/scatter") {
        const auto it = query.find("granularity");
        const std::string granularity = it == query.end() ? "building" : it->second;
        if (granularity == "building") {
            return {200, "application/json", building_scatter_};
        }
        if (granularity == "neighborhood") {
            return {200, "application/json", neighborhood_scatter_};
        }
        return json_error(400, "granularity must be 'building' or 'neighborhood'");
    }
    if (path == "/api/map/buildings") {
        return {200, "application/geo+json", buildings_geojson_};
    }
    if (path == "/api/map/neighborhoods") {
        return {200, "application/geo+json", neighborhoods_geojson_};
    }
    if (path == "/api/lisa") {
        return {200, "application/geo+json", lisa_geojson_};
    }
    if (path == "/api/regression") {
        return {200, "application/json", regression_json_};
    }
    return json_error(404, "no route for " + path);
}

struct ArtifactServer::Impl {
    explicit Impl(ArtifactService s) : service(std::move(s)) {}
    ArtifactService service;
    httplib::Server server;
};

ArtifactServer::ArtifactServer(ArtifactService service) : impl_(std::make_unique<Impl>(std::move(service))) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
        std::map<std::string, std::string> query;
        for (const auto& [k, v] : req.params) {
            query.emplace(k, v);
        }
        const HttpResponse out = impl_->service.handle(req.method, req.path, query);
        res.status = out.status;
        res.set_header("Access-Control-Allow-Origin", "*");
        res.set_content(out.body, out.content_type);
    };
    // SO_REUSEADDR only: httplib's default SO_REUSEPORT would let a second
    // server bind a port that is already serving.
    impl_->server.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    impl_->server.Get(".*", handler);
    impl_->server.Post(".*", handler);
}

ArtifactServer::~ArtifactServer() { stop(); }

int ArtifactServer::bind(const std::string& host, int port) {
    if (port == 0) {
        const int bound = impl_->server.bind_to_any_port(host);
        if (bound <= 0) {
            throw ServiceError("cannot bind " + host + " to a free port");
        }
        return bound;
    }
    if (!impl_->server.bind_to_port(host, port)) {
        throw ServiceError("port " + std::to_string(port) + " on " + host + " is unavailable");
    }
    return port;
}

void ArtifactServer::listen() {
    if (!impl_->server.listen_after_bind()) {
        throw ServiceError("server stopped with an error");
    }
}

void ArtifactServer::stop() {
    if (impl_) {
        impl_->server.stop();
    }
}

void serve(const std::filesystem::path& artifact_dir, int port, const std::string& host) {
    ArtifactServer server{ArtifactService(artifact_dir)};
    server.bind(host, port);
    server.listen();
}

}  // namespace esda
