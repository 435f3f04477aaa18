#pragma once

#include "edgetalk/config.hpp"

#include <memory>
#include <thread>

namespace httplib {
class Server;
}

namespace edgetalk {

class Gateway;

// REST + server-sent events front end for a Gateway.
//
//   POST /command          {"session_id": ..., "text": ...} -> trace
//   GET  /devices          device list with live state
//   GET  /traces/{id}      one trace (404 if unknown)
//   GET  /traces?session=  traces, newest first
//   GET  /health
//   GET  /events           text/event-stream, one JSON object per event
class ApiServer {
public:
    ApiServer(Gateway& gateway, ApiSettings settings);
    ~ApiServer();
    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    // Binds (port 0 picks a free one) and serves on a background thread.
    void start();
    void stop();
    int port() const { return port_; }

private:
    void install_routes();

    Gateway& gateway_;
    ApiSettings settings_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;
};

} // namespace edgetalk
