#pragma once

#include <memory>
#include <string>

#include "aiv/session.hpp"

namespace httplib {
class Server;
}

namespace aiv {

struct BindAddress {
    std::string host = "127.0.0.1";
    int port = 7070;
};

/// Parses "host:port" (AIV_BIND). Throws std::invalid_argument.
BindAddress parse_bind(const std::string& text);

/// JSON API over a SessionManager.
class ApiServer {
public:
    explicit ApiServer(SessionManager& sessions);
    ~ApiServer();

    /// Blocks serving until stop(). Returns false if the socket cannot be bound.
    bool listen(const BindAddress& addr);
    /// Binds an ephemeral port on `host` and returns it (-1 on failure); call
    /// listen_after_bind() afterwards, typically on another thread.
    int bind_any_port(const std::string& host);
    bool listen_after_bind();
    void stop();
    bool running() const;

private:
    void routes();

    SessionManager& sessions_;
    std::unique_ptr<httplib::Server> server_;
};

}  // namespace aiv
