#include <doctest.h>

#include <filesystem>

#include "aegon/token.hpp"

using namespace aegon;

namespace {

LicenseRequest sample_request() {
    LicenseRequest req;
    req.platform_id = "platform_test";
    req.publisher_domain = "publisher.com";
    req.resource_url = "https://publisher.com/article/123";
    req.scope = Scope::full_article_html;
    req.license_type = LicenseType::session;
    req.training_allowed = false;
    req.attribution_required = true;
    return req;
}

} // namespace

TEST_CASE("issued token round-trips through validation with identical claims") {
    Ledger ledger;
    BrokerKeySet keys = BrokerKeySet::generate();
    std::int64_t now = 1'750'000'000;
    IssuedToken tok = issue_token(sample_request(), "broker.aegon.test", keys, ledger, now);

    CHECK(tok.txn_id.rfind("txn_", 0) == 0);
    CHECK(tok.txn_id.size() == 4 + 26);

    auto v = validate_token(tok.token, keys.jwks(), "publisher.com", now + 10);
    REQUIRE(std::holds_alternative<LicenseClaims>(v));
    const auto& claims = std::get<LicenseClaims>(v);
    CHECK(claims.aud == "publisher.com");
    CHECK(claims.sub == "platform_test");
    CHECK(claims.jti == tok.txn_id);
    CHECK(claims.aegon_version == "1.0");
    CHECK(claims.aegon_scope == Scope::full_article_html);
    CHECK(claims.aegon_license_type == LicenseType::session);
    CHECK_FALSE(claims.aegon_training_allowed);
    CHECK(claims.aegon_attribution_required);
    CHECK_FALSE(claims.aegon_provenance_required); // optional, defaults false

    // No content hash claim exists anywhere in the token payload.
    auto parts = jws_decode(tok.token);
    for (const auto& item : parts->payload.items()) {
        CHECK(item.key().find("hash") == std::string::npos);
    }
}

TEST_CASE("ledger write precedes issuance") {
    Ledger ledger;
    BrokerKeySet keys = BrokerKeySet::generate();
    IssuedToken tok = issue_token(sample_request(), "broker", keys, ledger, 1000);
    auto entry = ledger.license_entry(tok.txn_id);
    REQUIRE(entry.has_value());
    CHECK(entry->entry_type == EntryType::license_issued);
}

TEST_CASE("single_use tokens carry the 5-minute TTL") {
    Ledger ledger;
    BrokerKeySet keys = BrokerKeySet::generate();
    auto req = sample_request();
    req.license_type = LicenseType::single_use;
    std::int64_t now = 1'750'000'000;
    IssuedToken tok = issue_token(req, "broker", keys, ledger, now);
    CHECK(tok.claims.exp <= now + 300);
    CHECK(tok.claims.exp - tok.claims.iat <= 300);
}

TEST_CASE("two issuances produce distinct jti values") {
    Ledger ledger;
    BrokerKeySet keys = BrokerKeySet::generate();
    auto a = issue_token(sample_request(), "broker", keys, ledger, 1000);
    auto b = issue_token(sample_request(), "broker", keys, ledger, 1000);
    CHECK(a.txn_id != b.txn_id);
}

TEST_CASE("validation reason codes") {
    Ledger ledger;
    BrokerKeySet keys = BrokerKeySet::generate();
    std::int64_t now = 1'750'000'000;
    IssuedToken tok = issue_token(sample_request(), "broker", keys, ledger, now);
    Json jwks = keys.jwks();

    SUBCASE("expired exactly at the boundary") {
        auto v = validate_token(tok.token, jwks, "publisher.com", tok.claims.exp);
        CHECK(std::get<TokenReject>(v) == TokenReject::expired);
        auto v2 = validate_token(tok.token, jwks, "publisher.com", tok.claims.exp - 1);
        CHECK(std::holds_alternative<LicenseClaims>(v2));
    }
    SUBCASE("wrong audience") {
        auto v = validate_token(tok.token, jwks, "other.com", now);
        CHECK(std::get<TokenReject>(v) == TokenReject::wrong_audience);
    }
    SUBCASE("flipped signature byte") {
        std::string forged = tok.token;
        char& c = forged[forged.size() - 5];
        c = c == 'A' ? 'B' : 'A';
        auto v = validate_token(forged, jwks, "publisher.com", now);
        CHECK(std::get<TokenReject>(v) == TokenReject::bad_signature);
    }
    SUBCASE("malformed token") {
        auto v = validate_token("not-a-jws", jwks, "publisher.com", now);
        CHECK(std::get<TokenReject>(v) == TokenReject::malformed);
    }
    SUBCASE("unknown kid") {
        BrokerKeySet other = BrokerKeySet::generate();
        auto v = validate_token(tok.token, other.jwks(), "publisher.com", now);
        CHECK(std::get<TokenReject>(v) == TokenReject::unknown_kid);
    }
}

TEST_CASE("claim tampering: altering any field under the original signature fails") {
    Ledger ledger;
    BrokerKeySet keys = BrokerKeySet::generate();
    std::int64_t now = 1'750'000'000;
    IssuedToken tok = issue_token(sample_request(), "broker", keys, ledger, now);
    Json jwks = keys.jwks();
    auto parts = jws_decode(tok.token);
    REQUIRE(parts.has_value());

    for (const auto& item : parts->payload.items()) {
        Json tampered = parts->payload;
        const Json& v = item.value();
        if (v.is_string()) {
            tampered[item.key()] = v.get<std::string>() + "x";
        } else if (v.is_boolean()) {
            tampered[item.key()] = !v.get<bool>();
        } else if (v.is_number_integer()) {
            tampered[item.key()] = v.get<std::int64_t>() + 1;
        }
        std::string header_b64 = tok.token.substr(0, tok.token.find('.'));
        std::string sig_b64 = tok.token.substr(tok.token.rfind('.') + 1);
        std::string forged =
            header_b64 + "." + base64url_encode(canonical_encode(tampered)) + "." + sig_b64;
        auto result = validate_token(forged, jwks, "publisher.com", now);
        INFO("tampered claim: ", item.key());
        CHECK(std::holds_alternative<TokenReject>(result));
    }
}

TEST_CASE("JWKS: rotation keeps the old kid resolvable") {
    BrokerKeySet keys = BrokerKeySet::generate();
    std::string old_kid = keys.active(KeyPurpose::token_signing).kid;
    Ledger ledger;
    IssuedToken old_tok = issue_token(sample_request(), "broker", keys, ledger, 1000);

    std::string new_kid = keys.rotate(KeyPurpose::token_signing);
    CHECK(new_kid != old_kid);
    Json jwks = keys.jwks();
    CHECK(jwks["keys"].size() == 3); // old token key, new token key, sth key
    CHECK(jwks_find_key(jwks, old_kid).has_value());
    CHECK(jwks_find_key(jwks, new_kid).has_value());

    // Tokens signed before rotation still validate.
    auto v = validate_token(old_tok.token, jwks, "publisher.com", 1010);
    CHECK(std::holds_alternative<LicenseClaims>(v));

    // New issuance uses the new kid.
    IssuedToken new_tok = issue_token(sample_request(), "broker", keys, ledger, 1000);
    CHECK(jws_decode(new_tok.token)->header["kid"] == new_kid);
}

TEST_CASE("JWKS document never contains private material") {
    BrokerKeySet keys = BrokerKeySet::generate();
    std::string doc = keys.jwks().dump();
    CHECK(doc.find("\"d\"") == std::string::npos);
    for (const auto& jwk : keys.jwks()["keys"]) {
        CHECK(jwk["kty"] == "EC");
        CHECK(jwk["crv"] == "P-256");
        CHECK(jwk["use"] == "sig");
        CHECK(jwk.contains("kid"));
        CHECK(jwk.contains("x"));
        CHECK(jwk.contains("y"));
    }
}

TEST_CASE("key store round-trips through save/load") {
    auto path = std::filesystem::temp_directory_path() / "aegon-keys-test.json";
    BrokerKeySet keys = BrokerKeySet::generate();
    keys.save(path);
    BrokerKeySet loaded = BrokerKeySet::load(path);
    CHECK(loaded.jwks() == keys.jwks());

    // Loaded private keys still sign verifiably.
    Ledger ledger;
    IssuedToken tok = issue_token(sample_request(), "broker", loaded, ledger, 1000);
    auto v = validate_token(tok.token, keys.jwks(), "publisher.com", 1001);
    CHECK(std::holds_alternative<LicenseClaims>(v));
    std::filesystem::remove(path);
}
