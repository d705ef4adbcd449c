#pragma once

#include <httplib.h>

#include <memory>

#include "aegon/auditor.hpp"

namespace aegon {

// Default auditor transport against a live broker over HTTP.
inline Auditor::Fetch make_http_fetch(const std::string& broker_base_url) {
    auto client = std::make_shared<httplib::Client>(broker_base_url);
    client->set_connection_timeout(5);
    client->set_read_timeout(10);
    return [client](const std::string& path) -> std::optional<std::pair<int, std::string>> {
        auto res = client->Get(path);
        if (!res) return std::nullopt;
        return std::make_pair(res->status, res->body);
    };
}

} // namespace aegon
