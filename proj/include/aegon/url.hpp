#pragma once

#include <algorithm>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>

namespace aegon {

// Normalization for resource-URL binding: lowercase scheme and host, drop
// default ports, keep path and query byte-exact. Deliberately nothing more,
// so equivalence stays predictable.
inline std::optional<std::string> normalize_url(std::string_view url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string_view::npos || scheme_end == 0) return std::nullopt;
    std::string scheme(url.substr(0, scheme_end));
    std::transform(scheme.begin(), scheme.end(), scheme.begin(),
                   [](unsigned char c) { return std::tolower(c); });

    std::string_view rest = url.substr(scheme_end + 3);
    auto path_start = rest.find_first_of("/?");
    std::string authority(rest.substr(0, path_start));
    std::string path_query =
        path_start == std::string_view::npos ? "/" : std::string(rest.substr(path_start));
    if (path_query.empty() || path_query[0] == '?') path_query = "/" + path_query;
    if (authority.empty()) return std::nullopt;

    std::string host = authority;
    std::string port;
    auto colon = authority.rfind(':');
    if (colon != std::string::npos) {
        host = authority.substr(0, colon);
        port = authority.substr(colon + 1);
        if (!port.empty() && !std::all_of(port.begin(), port.end(), [](unsigned char c) {
                return std::isdigit(c);
            })) {
            return std::nullopt;
        }
    }
    std::transform(host.begin(), host.end(), host.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (host.empty()) return std::nullopt;

    bool default_port = port.empty() || (scheme == "http" && port == "80") ||
                        (scheme == "https" && port == "443");
    std::string out = scheme + "://" + host;
    if (!default_port) out += ":" + port;
    out += path_query;
    return out;
}

inline bool urls_equivalent(std::string_view a, std::string_view b) {
    auto na = normalize_url(a);
    auto nb = normalize_url(b);
    return na && nb && *na == *nb;
}

} // namespace aegon
