#pragma once

#include <optional>
#include <string>
#include <variant>

#include "aegon/clock.hpp"
#include "aegon/errors.hpp"
#include "aegon/jws.hpp"
#include "aegon/keyset.hpp"
#include "aegon/ledger.hpp"

namespace aegon {

enum class Scope { metadata_only, excerpt, full_article_html, structured_json, training_corpus };
enum class LicenseType { single_use, session, time_bound_cache, training_corpus };

inline const char* to_string(Scope s) {
    switch (s) {
        case Scope::metadata_only: return "metadata_only";
        case Scope::excerpt: return "excerpt";
        case Scope::full_article_html: return "full_article_html";
        case Scope::structured_json: return "structured_json";
        case Scope::training_corpus: return "training_corpus";
    }
    return "?";
}

inline const char* to_string(LicenseType t) {
    switch (t) {
        case LicenseType::single_use: return "single_use";
        case LicenseType::session: return "session";
        case LicenseType::time_bound_cache: return "time_bound_cache";
        case LicenseType::training_corpus: return "training_corpus";
    }
    return "?";
}

inline std::optional<Scope> scope_from_string(const std::string& s) {
    if (s == "metadata_only") return Scope::metadata_only;
    if (s == "excerpt") return Scope::excerpt;
    if (s == "full_article_html") return Scope::full_article_html;
    if (s == "structured_json") return Scope::structured_json;
    if (s == "training_corpus") return Scope::training_corpus;
    return std::nullopt;
}

inline std::optional<LicenseType> license_type_from_string(const std::string& s) {
    if (s == "single_use") return LicenseType::single_use;
    if (s == "session") return LicenseType::session;
    if (s == "time_bound_cache") return LicenseType::time_bound_cache;
    if (s == "training_corpus") return LicenseType::training_corpus;
    return std::nullopt;
}

// Token lifetimes in seconds. single_use is pinned to the 5-minute TTL that
// replay protection relies on; intentionally no content hash claim exists
// (the hash is recorded post-delivery in the ledger instead).
inline std::int64_t token_ttl_s(LicenseType t) {
    switch (t) {
        case LicenseType::single_use: return 300;
        case LicenseType::session: return 3600;
        case LicenseType::time_bound_cache: return 86400;
        case LicenseType::training_corpus: return 86400;
    }
    return 300;
}

struct LicenseClaims {
    std::string iss;
    std::string sub; // platform_id
    std::string aud; // publisher domain
    std::int64_t exp = 0;
    std::int64_t iat = 0;
    std::string jti; // == ledger txn_id
    std::string aegon_version = "1.0";
    std::string aegon_resource_url;
    Scope aegon_scope{};
    LicenseType aegon_license_type{};
    bool aegon_training_allowed = false;
    bool aegon_attribution_required = false;
    bool aegon_provenance_required = false;

    Json to_json() const {
        return Json{{"iss", iss},
                    {"sub", sub},
                    {"aud", aud},
                    {"exp", exp},
                    {"iat", iat},
                    {"jti", jti},
                    {"aegon_version", aegon_version},
                    {"aegon_resource_url", aegon_resource_url},
                    {"aegon_scope", to_string(aegon_scope)},
                    {"aegon_license_type", to_string(aegon_license_type)},
                    {"aegon_training_allowed", aegon_training_allowed},
                    {"aegon_attribution_required", aegon_attribution_required},
                    {"aegon_provenance_required", aegon_provenance_required}};
    }
};

enum class TokenReject {
    bad_signature,
    expired,
    wrong_audience,
    unknown_kid,
    malformed,
    unsupported_version,
    invalid_claims,
};

inline const char* to_string(TokenReject r) {
    switch (r) {
        case TokenReject::bad_signature: return "bad_signature";
        case TokenReject::expired: return "expired";
        case TokenReject::wrong_audience: return "wrong_audience";
        case TokenReject::unknown_kid: return "unknown_kid";
        case TokenReject::malformed: return "malformed";
        case TokenReject::unsupported_version: return "unsupported_version";
        case TokenReject::invalid_claims: return "invalid_claims";
    }
    return "?";
}

using TokenValidation = std::variant<LicenseClaims, TokenReject>;

inline std::string new_txn_id() { return "txn_" + base32_lower_encode(random_bytes(16)); }

struct LicenseRequest {
    std::string platform_id;
    std::string publisher_domain;
    std::string resource_url;
    Scope scope{};
    LicenseType license_type{};
    bool training_allowed = false;
    bool attribution_required = false;
    bool provenance_required = false;
};

struct IssuedToken {
    std::string token;
    std::string txn_id;
    LicenseClaims claims;
};

// Issues an ES256 license token. The license_issued ledger entry is appended
// before the token is returned, so every live token is already committed.
inline IssuedToken issue_token(const LicenseRequest& req, const std::string& issuer,
                               const BrokerKeySet& keys, Ledger& ledger, std::int64_t now_s) {
    if (req.publisher_domain.empty() || req.resource_url.empty() || req.platform_id.empty()) {
        throw ValidationError("missing request field");
    }
    BrokerKey signing = keys.active(KeyPurpose::token_signing);

    LicenseClaims claims;
    claims.iss = issuer;
    claims.sub = req.platform_id;
    claims.aud = req.publisher_domain;
    claims.iat = now_s;
    claims.exp = now_s + token_ttl_s(req.license_type);
    claims.jti = new_txn_id();
    claims.aegon_resource_url = req.resource_url;
    claims.aegon_scope = req.scope;
    claims.aegon_license_type = req.license_type;
    claims.aegon_training_allowed = req.training_allowed;
    claims.aegon_attribution_required = req.attribution_required;
    claims.aegon_provenance_required = req.provenance_required;

    Json entry_payload{{"platform_id", req.platform_id},
                       {"publisher_domain", req.publisher_domain},
                       {"resource_url", req.resource_url},
                       {"scope", to_string(req.scope)},
                       {"license_type", to_string(req.license_type)},
                       {"training_allowed", req.training_allowed},
                       {"attribution_required", req.attribution_required},
                       {"provenance_required", req.provenance_required},
                       {"exp", claims.exp}};
    ledger.append(claims.jti, EntryType::license_issued, canonical_encode(entry_payload), now_s);

    return IssuedToken{jws_sign(claims.to_json(), signing.key, signing.kid), claims.jti, claims};
}

// Pure function of its arguments: no broker access, usable offline at the
// edge against a cached JWKS.
inline TokenValidation validate_token(const std::string& token, const Json& jwks,
                                      const std::string& expected_aud, std::int64_t now_s) {
    auto parts = jws_decode(token);
    if (!parts) return TokenReject::malformed;
    if (parts->header.value("alg", "") != "ES256") return TokenReject::malformed;
    std::string kid = parts->header.value("kid", "");
    auto key = jwks_find_key(jwks, kid);
    if (!key) return TokenReject::unknown_kid;
    if (!key->verify(parts->signing_input, parts->signature)) return TokenReject::bad_signature;

    const Json& p = parts->payload;
    for (const char* field : {"iss", "sub", "aud", "jti", "aegon_version", "aegon_resource_url",
                              "aegon_scope", "aegon_license_type"}) {
        if (!p.contains(field) || !p[field].is_string()) return TokenReject::invalid_claims;
    }
    if (!p.contains("exp") || !p["exp"].is_number_integer()) return TokenReject::invalid_claims;
    if (!p.contains("iat") || !p["iat"].is_number_integer()) return TokenReject::invalid_claims;
    if (!p.contains("aegon_training_allowed") || !p["aegon_training_allowed"].is_boolean() ||
        !p.contains("aegon_attribution_required") ||
        !p["aegon_attribution_required"].is_boolean()) {
        return TokenReject::invalid_claims;
    }
    if (p["aegon_version"].get<std::string>() != "1.0") return TokenReject::unsupported_version;

    auto scope = scope_from_string(p["aegon_scope"].get<std::string>());
    auto lt = license_type_from_string(p["aegon_license_type"].get<std::string>());
    if (!scope || !lt) return TokenReject::invalid_claims;

    LicenseClaims claims;
    claims.iss = p["iss"].get<std::string>();
    claims.sub = p["sub"].get<std::string>();
    claims.aud = p["aud"].get<std::string>();
    claims.exp = p["exp"].get<std::int64_t>();
    claims.iat = p["iat"].get<std::int64_t>();
    claims.jti = p["jti"].get<std::string>();
    claims.aegon_version = p["aegon_version"].get<std::string>();
    claims.aegon_resource_url = p["aegon_resource_url"].get<std::string>();
    claims.aegon_scope = *scope;
    claims.aegon_license_type = *lt;
    claims.aegon_training_allowed = p["aegon_training_allowed"].get<bool>();
    claims.aegon_attribution_required = p["aegon_attribution_required"].get<bool>();
    claims.aegon_provenance_required = p.value("aegon_provenance_required", false);

    if (now_s >= claims.exp) return TokenReject::expired;
    if (claims.aud != expected_aud) return TokenReject::wrong_audience;
    return claims;
}

} // namespace aegon
