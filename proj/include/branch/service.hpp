#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>

#include <json.hpp>

#include "branch/error.hpp"
#include "branch/store.hpp"

namespace httplib {
class Server;
}

namespace branch {

struct ApiError {
    int http_status = 500;
    std::string code;
    std::string message;
    std::string location;
};

int http_status_for(ErrorCode code) noexcept;
ApiError to_api_error(const Error& e);
nlohmann::json api_error_to_json(const ApiError& e);

struct ServiceConfig {
    std::string host = "0.0.0.0";
    int port = 8080;  // 0 picks a free port
    std::filesystem::path store = "store";
    std::filesystem::path assets;  // empty: no web UI bundle
    std::chrono::seconds request_timeout{30};
};

// REST front end over a LibraryStore. Handlers are stateless apart from the
// store and run concurrently on the server's worker threads.
class Service {
public:
    Service(std::shared_ptr<LibraryStore> store, ServiceConfig config);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    // Binds the socket; returns the bound port. Throws on failure.
    int bind();
    // Blocks serving requests until stop().
    void listen();
    void stop();
    bool running() const;

private:
    void install_routes();

    std::shared_ptr<LibraryStore> store_;
    ServiceConfig config_;
    std::unique_ptr<httplib::Server> server_;
    int bound_port_ = -1;
};

// Parses flags and BRANCH_* environment variables, opens the store and serves
// until interrupted. Returns a process exit code.
int serve_main(const ServiceConfig& config);

}  // namespace branch
