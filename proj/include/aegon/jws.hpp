#pragma once

#include <optional>
#include <string>

#include "aegon/canonical.hpp"
#include "aegon/ecdsa.hpp"

namespace aegon {

// ES256 JWS compact serialization: base64url(header).base64url(payload).base64url(sig).
inline std::string jws_sign(const Json& payload, const EcKey& key, const std::string& kid,
                            const std::string& typ = "JWT") {
    Json header{{"alg", "ES256"}, {"typ", typ}};
    if (!kid.empty()) header["kid"] = kid;
    std::string signing_input =
        base64url_encode(canonical_encode(header)) + "." +
        base64url_encode(canonical_encode(payload));
    Bytes sig = key.sign(signing_input);
    return signing_input + "." + base64url_encode(sig);
}

struct JwsParts {
    Json header;
    Json payload;
    std::string signing_input;
    Bytes signature;
};

// Structural decode only; signature is NOT checked here.
inline std::optional<JwsParts> jws_decode(const std::string& compact) {
    auto dot1 = compact.find('.');
    if (dot1 == std::string::npos) return std::nullopt;
    auto dot2 = compact.find('.', dot1 + 1);
    if (dot2 == std::string::npos || compact.find('.', dot2 + 1) != std::string::npos) {
        return std::nullopt;
    }
    try {
        JwsParts parts;
        parts.signing_input = compact.substr(0, dot2);
        parts.header = Json::parse(to_string(base64url_decode(compact.substr(0, dot1))));
        parts.payload = Json::parse(
            to_string(base64url_decode(compact.substr(dot1 + 1, dot2 - dot1 - 1))));
        parts.signature = base64url_decode(compact.substr(dot2 + 1));
        if (!parts.header.is_object() || !parts.payload.is_object()) return std::nullopt;
        return parts;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

inline bool jws_verify(const JwsParts& parts, const EcKey& key) {
    if (parts.header.value("alg", "") != "ES256") return false;
    return key.verify(parts.signing_input, parts.signature);
}

} // namespace aegon
