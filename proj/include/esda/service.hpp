#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>

namespace esda {

class ServiceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct HttpResponse {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

/// Read-only view over a persisted artifact directory. Every response is a
/// projection of the files loaded at construction; nothing is recomputed.
class ArtifactService {
public:
    explicit ArtifactService(const std::filesystem::path& artifact_dir);

    HttpResponse handle(const std::string& method, const std::string& path,
                        const std::map<std::string, std::string>& query) const;

private:
    std::string buildings_geojson_;
    std::string neighborhoods_geojson_;
    std::string lisa_geojson_;
    std::string regression_json_;
    std::string building_scatter_;
    std::string neighborhood_scatter_;
};

/// HTTP front end for an ArtifactService.
class ArtifactServer {
public:
    explicit ArtifactServer(ArtifactService service);
    ~ArtifactServer();
    ArtifactServer(const ArtifactServer&) = delete;
    ArtifactServer& operator=(const ArtifactServer&) = delete;

    /// Binds host:port (port 0 picks a free port) and returns the bound port.
    /// Throws ServiceError when the port is unavailable.
    int bind(const std::string& host, int port);
    /// Blocks serving requests until stop() is called.
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// bind + listen; blocks.
void serve(const std::filesystem::path& artifact_dir, int port, const std::string& host = "127.0.0.1");

}  // namespace esda
