#include "aiv/server.hpp"

#include <httplib.h>

#include "aiv/raster.hpp"

namespace aiv {

using nlohmann::json;

BindAddress parse_bind(const std::string& text) {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) {
        throw std::invalid_argument("bind address must look like host:port, got '" + text + "'");
    }
    BindAddress a;
    a.host = text.substr(0, colon);
    std::size_t used = 0;
    int port = -1;
    try {
        port = std::stoi(text.substr(colon + 1), &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != text.size() - colon - 1 || port < 0 || port > 65535) {
        throw std::invalid_argument("bad port in bind address '" + text + "'");
    }
    a.port = port;
    return a;
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message, const json& fields = nullptr) {
    json body = {{"error", message}};
    if (!fields.is_null()) body["fields"] = fields;
    send_json(res, status, body);
}

int status_for(SessionError::Kind k) {
    switch (k) {
        case SessionError::Kind::BadRequest: return 400;
        case SessionError::Kind::NotFound: return 404;
        case SessionError::Kind::Conflict: return 409;
        case SessionError::Kind::Unavailable: return 422;
    }
    return 500;
}

json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    json j = json::parse(req.body, nullptr, false);
    if (j.is_discarded()) throw SessionError(SessionError::Kind::BadRequest, "request body is not valid JSON");
    return j;
}

/// Runs a handler, mapping library exceptions onto HTTP errors.
template <class F>
httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const ValidationError& e) {
            json fields = json::array();
            for (const auto& fe : e.errors()) fields.push_back({{"field", fe.field}, {"message", fe.message}});
            send_error(res, 400, e.what(), fields);
        } catch (const SessionError& e) {
            send_error(res, status_for(e.kind()), e.what());
        } catch (const GeometryError& e) {
            send_error(res, 400, e.what());
        } catch (const std::invalid_argument& e) {
            send_error(res, 400, e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, e.what());
        }
    };
}

}  // namespace

ApiServer::ApiServer(SessionManager& sessions) : sessions_(sessions), server_(std::make_unique<httplib::Server>()) {
    routes();
}

ApiServer::~ApiServer() { stop(); }

bool ApiServer::listen(const BindAddress& addr) { return server_->listen(addr.host, addr.port); }

int ApiServer::bind_any_port(const std::string& host) { return server_->bind_to_any_port(host); }

bool ApiServer::listen_after_bind() { return server_->listen_after_bind(); }

void ApiServer::stop() {
    if (server_->is_running()) server_->stop();
}

bool ApiServer::running() const { return server_->is_running(); }

void ApiServer::routes() {
    auto& srv = *server_;
    const std::string sid = R"(/api/sessions/([^/]+))";

    srv.Post("/api/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const auto spec = SessionSpec::from_json(parse_body(req));
        const auto s = sessions_.create(spec);
        send_json(res, 201, {{"session_id", s->id()}});
    }));

    srv.Get(sid, guarded([this](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, sessions_.get(req.matches[1])->describe());
    }));

    srv.Get(sid + R"(/frame/(\d+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const auto s = sessions_.get(req.matches[1]);
        const auto src = s->frame_source();
        if (!src->has_pixels()) throw SessionError(SessionError::Kind::Conflict, "session has no frame images");
        const std::int64_t i = std::stoll(req.matches[2]);
        if (i >= src->frame_count()) throw SessionError(SessionError::Kind::NotFound, "frame out of range");
        const auto png = encode_png(src->get_frame(i));
        res.set_content(std::string(png.begin(), png.end()), "image/png");
    }));

    srv.Put(sid + "/mask", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const auto s = sessions_.get(req.matches[1]);
        s->set_mask(polygons_from_json(parse_body(req)));
        send_json(res, 200, {{"mask", polygons_to_json(s->mask())}});
    }));

    srv.Put(sid + "/zones", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const auto s = sessions_.get(req.matches[1]);
        const bool changed = s->set_zones(CountingConfig::from_json(parse_body(req)));
        send_json(res, 200, {{"zones", s->zones()->to_json()}, {"changed", changed}});
    }));

    srv.Post(sid + "/run", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const auto s = sessions_.get(req.matches[1]);
        if (s->start_run()) {
            send_json(res, 202, {{"accepted", true}, {"state", state_name(s->state())}});
        } else {
            send_json(res, 409, {{"accepted", false}, {"error", "a run is already in progress"}});
        }
    }));

    srv.Post(sid + "/count", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const auto s = sessions_.get(req.matches[1]);
        const json body = parse_body(req);
        std::optional<CountMethod> method;
        if (body.contains("method") && !body["method"].is_null() && body["method"] != "all") {
            method = method_from_name(body["method"].get<std::string>());
            if (!method) throw SessionError(SessionError::Kind::BadRequest, "unknown counting method");
        }
        const std::string mode = body.value("mode", "quick");
        if (mode != "quick" && mode != "full") throw SessionError(SessionError::Kind::BadRequest, "mode must be quick or full");
        std::optional<CountingConfig> zones;
        if (body.contains("zones")) zones = CountingConfig::from_json(body["zones"]);
        const auto entry = s->count(method, mode == "quick" ? CountMode::Quick : CountMode::Full, zones);
        send_json(res, 200, entry.to_json());
    }));

    srv.Post(sid + "/eval", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const auto s = sessions_.get(req.matches[1]);
        const json body = parse_body(req);
        if (!body.contains("gt_path") || !body["gt_path"].is_string()) {
            throw ValidationError(std::vector<FieldError>{{"gt_path", "required string"}});
        }
        s->evaluate(body["gt_path"].get<std::string>());
        send_json(res, 200, *s->report());
    }));

    srv.Get(sid + "/counts", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const auto s = sessions_.get(req.matches[1]);
        const auto all = s->ledgers();
        json list = json::array();
        for (const auto& e : all) list.push_back(e.to_json());
        json body = {{"ledgers", list}};
        body["latest"] = all.empty() ? json(nullptr) : list.back();
        send_json(res, 200, body);
    }));

    srv.Get(sid + "/gallery", guarded([this](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, sessions_.get(req.matches[1])->gallery()->index_json());
    }));

    srv.Get(sid + "/events", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const auto s = sessions_.get(req.matches[1]);
        std::uint64_t after = 0;
        if (req.has_header("Last-Event-ID")) after = std::stoull(req.get_header_value("Last-Event-ID"));
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider("text/event-stream", [s, after](std::size_t, httplib::DataSink& sink) mutable {
            const auto events = s->events().since(after, std::chrono::milliseconds(1000));
            if (events.empty()) {
                if (s->events().closed()) return false;
                const std::string ping = ": keep-alive\n\n";
                return sink.write(ping.data(), ping.size());
            }
            for (const auto& e : events) {
                const std::string msg =
                    "id: " + std::to_string(e.seq) + "\nevent: status\ndata: " + e.to_json().dump() + "\n\n";
                if (!sink.write(msg.data(), msg.size())) return false;
                after = e.seq;
            }
            return true;
        });
    }));

    srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.body.empty()) send_error(res, res.status, res.status == 404 ? "not found" : "request failed");
    });
}

}  // namespace aiv
