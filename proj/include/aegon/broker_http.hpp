#pragma once

#include <httplib.h>

#include <memory>
#include <string>
#include <thread>

#include "aegon/broker.hpp"

namespace aegon {

// HTTP facade over BrokerCore. Routes mirror the protocol surface exactly;
// bodies are JSON and errors carry {error_code, message}.
class BrokerHttpServer {
public:
    explicit BrokerHttpServer(BrokerCore& core) : core_(core) {
        server_.set_tcp_nodelay(true);
        wire_routes();
    }

    ~BrokerHttpServer() { stop(); }

    // Binds to an ephemeral port on host and serves from a background thread.
    int start(const std::string& host = "127.0.0.1") {
        port_ = server_.bind_to_any_port(host);
        if (port_ < 0) throw std::runtime_error("bind failed");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return port_;
    }

    void start_on(const std::string& host, int port) {
        if (!server_.bind_to_port(host, port)) throw std::runtime_error("bind failed");
        port_ = port;
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    void stop() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    int port() const { return port_; }
    std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

private:
    static void reply(httplib::Response& res, const ApiResult& r) {
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    }

    static Json parse_body(const httplib::Request& req, httplib::Response& res, bool* ok) {
        Json body = Json::parse(req.body, nullptr, false);
        if (body.is_discarded()) {
            reply(res, api_error(400, "invalid_request", "body is not valid JSON"));
            *ok = false;
            return {};
        }
        *ok = true;
        return body;
    }

    void wire_routes() {
        server_.Post("/v1/licenses", [this](const httplib::Request& req, httplib::Response& res) {
            bool ok;
            Json body = parse_body(req, res, &ok);
            if (ok) reply(res, core_.post_license(body));
        });
        server_.Post("/v1/content-hash",
                     [this](const httplib::Request& req, httplib::Response& res) {
                         bool ok;
                         Json body = parse_body(req, res, &ok);
                         if (ok) reply(res, core_.post_content_hash(body));
                     });
        server_.Post("/v1/provenance",
                     [this](const httplib::Request& req, httplib::Response& res) {
                         bool ok;
                         Json body = parse_body(req, res, &ok);
                         if (ok) reply(res, core_.post_provenance(body));
                     });
        server_.Get(R"(/v1/provenance/([^/]+))",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        reply(res, core_.get_chain_status(req.matches[1]));
                    });
        server_.Post("/v1/receipts", [this](const httplib::Request& req, httplib::Response& res) {
            bool ok;
            Json body = parse_body(req, res, &ok);
            if (ok) reply(res, core_.post_receipts(body));
        });
        server_.Get("/v1/devices/challenge",
                    [this](const httplib::Request&, httplib::Response& res) {
                        reply(res, core_.get_device_challenge());
                    });
        server_.Post("/v1/devices", [this](const httplib::Request& req, httplib::Response& res) {
            bool ok;
            Json body = parse_body(req, res, &ok);
            if (ok) reply(res, core_.post_device_register(body));
        });
        server_.Post("/v1/devices/revoke",
                     [this](const httplib::Request& req, httplib::Response& res) {
                         bool ok;
                         Json body = parse_body(req, res, &ok);
                         if (ok) reply(res, core_.post_device_revoke(body));
                     });
        server_.Post("/v1/platforms",
                     [this](const httplib::Request& req, httplib::Response& res) {
                         bool ok;
                         Json body = parse_body(req, res, &ok);
                         if (ok) reply(res, core_.post_platform_register(body));
                     });
        server_.Get("/.well-known/jwks.json",
                    [this](const httplib::Request&, httplib::Response& res) {
                        reply(res, core_.get_jwks());
                    });
        server_.Get("/v1/sth", [this](const httplib::Request&, httplib::Response& res) {
            reply(res, core_.get_sth());
        });
        server_.Get("/v1/sth/history", [this](const httplib::Request&, httplib::Response& res) {
            reply(res, core_.get_sth_history());
        });
        server_.Get("/v1/proof", [this](const httplib::Request& req, httplib::Response& res) {
            std::string txn_id = req.get_param_value("txn_id");
            std::optional<std::uint64_t> size;
            if (req.has_param("tree_size")) {
                size = std::stoull(req.get_param_value("tree_size"));
            }
            reply(res, core_.get_proof(txn_id, size));
        });
        server_.Get(R"(/v1/entries/([^/]+))",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        reply(res, core_.get_entry(req.matches[1]));
                    });
        server_.Get("/v1/consistency",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        if (!req.has_param("old") || !req.has_param("new")) {
                            reply(res, api_error(400, "invalid_request", "old and new required"));
                            return;
                        }
                        reply(res, core_.get_consistency(std::stoull(req.get_param_value("old")),
                                                         std::stoull(req.get_param_value("new"))));
                    });
        server_.Get("/v1/admin/spot-checks",
                    [this](const httplib::Request&, httplib::Response& res) {
                        reply(res, core_.get_spot_checks());
                    });
        server_.Get("/v1/admin/publisher-health",
                    [this](const httplib::Request&, httplib::Response& res) {
                        reply(res, core_.get_publisher_health());
                    });
    }

    BrokerCore& core_;
    httplib::Server server_;
    std::thread thread_;
    int port_ = -1;
};

} // namespace aegon
