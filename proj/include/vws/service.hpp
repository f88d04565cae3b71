#pragma once

#include "vws/project.hpp"

#include <filesystem>
#include <string>

namespace httplib {
class Server;
}

namespace vws::service {

struct Options {
    std::string host = "127.0.0.1";
    int port = 8080;
    /// Directory holding the UI bundle; nothing is mounted when it does not exist.
    std::filesystem::path static_dir;
};

/// Installs the review API on `server`:
///   GET  /api/plots
///   GET  /api/plots/{id}/{treatment}/ratio
///   GET  /api/plots/{id}/{treatment}/candidates
///   POST /api/plots/{id}/{treatment}/selection
///   GET  /api/plots/{id}/{treatment}/ks-preview?candidate=i
/// Error bodies are {"error": message}; 400 malformed, 404 unknown plot,
/// 409 selection already committed, 412 stale upstream artifacts.
void register_routes(httplib::Server& server, project::Project& project, const Options& options);

/// Blocks until the server stops.
void serve(project::Project& project, const Options& options);

} // namespace vws::service
