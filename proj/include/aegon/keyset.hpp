#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "aegon/ecdsa.hpp"
#include "aegon/errors.hpp"

namespace aegon {

enum class KeyPurpose { token_signing, sth_signing };
enum class KeyStatus { active, retired };

inline const char* to_string(KeyPurpose p) {
    return p == KeyPurpose::token_signing ? "token_signing" : "sth_signing";
}
inline const char* to_string(KeyStatus s) { return s == KeyStatus::active ? "active" : "retired"; }

struct BrokerKey {
    std::string kid;
    KeyPurpose purpose{};
    EcKey key;
    KeyStatus status = KeyStatus::active;
};

// Broker key material. One active token-signing key at a time; retired public
// keys stay in the JWKS so previously issued tokens keep validating. The STH
// signing key is a separate pair under its own kid.
class BrokerKeySet {
public:
    static BrokerKeySet generate() {
        BrokerKeySet ks;
        ks.keys_.push_back({fresh_kid("tok"), KeyPurpose::token_signing, EcKey::generate()});
        ks.keys_.push_back({fresh_kid("sth"), KeyPurpose::sth_signing, EcKey::generate()});
        return ks;
    }

    BrokerKey active(KeyPurpose purpose) const {
        std::lock_guard lock(*mu_);
        for (const auto& k : keys_) {
            if (k.purpose == purpose && k.status == KeyStatus::active) return k;
        }
        throw KeyError(std::string("no active key for ") + to_string(purpose));
    }

    std::optional<BrokerKey> find(const std::string& kid) const {
        std::lock_guard lock(*mu_);
        for (const auto& k : keys_) {
            if (k.kid == kid) return k;
        }
        return std::nullopt;
    }

    // Retires the current active key of this purpose and installs a fresh one.
    std::string rotate(KeyPurpose purpose) {
        std::lock_guard lock(*mu_);
        for (auto& k : keys_) {
            if (k.purpose == purpose && k.status == KeyStatus::active) k.status = KeyStatus::retired;
        }
        std::string kid = fresh_kid(purpose == KeyPurpose::token_signing ? "tok" : "sth");
        keys_.push_back({kid, purpose, EcKey::generate()});
        return kid;
    }

    // Public halves only, RFC 7517 field names.
    Json jwks() const {
        std::lock_guard lock(*mu_);
        Json keys = Json::array();
        for (const auto& k : keys_) {
            Json jwk = k.key.public_jwk();
            jwk["kid"] = k.kid;
            jwk["use"] = "sig";
            jwk["alg"] = "ES256";
            keys.push_back(jwk);
        }
        return Json{{"keys", keys}};
    }

    void save(const std::filesystem::path& path) const {
        std::lock_guard lock(*mu_);
        Json doc = Json::array();
        for (const auto& k : keys_) {
            doc.push_back(Json{{"kid", k.kid},
                               {"purpose", to_string(k.purpose)},
                               {"status", to_string(k.status)},
                               {"jwk", k.key.private_jwk()}});
        }
        std::ofstream(path) << doc.dump(2);
    }

    static BrokerKeySet load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw KeyError("cannot open key store: " + path.string());
        Json doc = Json::parse(in);
        BrokerKeySet ks;
        for (const auto& item : doc) {
            BrokerKey k{item.at("kid").get<std::string>(),
                        item.at("purpose") == "token_signing" ? KeyPurpose::token_signing
                                                              : KeyPurpose::sth_signing,
                        EcKey::from_private_jwk(item.at("jwk")),
                        item.at("status") == "active" ? KeyStatus::active : KeyStatus::retired};
            ks.keys_.push_back(std::move(k));
        }
        return ks;
    }

private:
    static std::string fresh_kid(const char* prefix) {
        return std::string(prefix) + "-" + hex_encode(random_bytes(6));
    }

    mutable std::unique_ptr<std::mutex> mu_ = std::make_unique<std::mutex>();
    std::vector<BrokerKey> keys_;
};

// Key lookup against a parsed JWKS document.
inline std::optional<EcKey> jwks_find_key(const Json& jwks, const std::string& kid) {
    if (!jwks.contains("keys") || !jwks["keys"].is_array()) return std::nullopt;
    for (const auto& jwk : jwks["keys"]) {
        if (jwk.value("kid", "") != kid) continue;
        if (jwk.value("kty", "") != "EC" || jwk.value("crv", "") != "P-256") return std::nullopt;
        try {
            return EcKey::from_public_jwk(jwk);
        } catch (const std::exception&) {
            return std::nullopt;
        }
    }
    return std::nullopt;
}

} // namespace aegon
