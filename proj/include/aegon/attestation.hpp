#pragma once

#include <atomic>
#include <ctime>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "aegon/clock.hpp"
#include "aegon/jws.hpp"
#include "aegon/ledger.hpp"

namespace aegon {

enum class SecurityLevel { STRONGBOX, TRUSTED_ENVIRONMENT, SOFTWARE };
enum class BootState { VERIFIED, SELF_SIGNED, UNVERIFIED, FAILED };

inline const char* to_string(SecurityLevel s) {
    switch (s) {
        case SecurityLevel::STRONGBOX: return "STRONGBOX";
        case SecurityLevel::TRUSTED_ENVIRONMENT: return "TRUSTED_ENVIRONMENT";
        case SecurityLevel::SOFTWARE: return "SOFTWARE";
    }
    return "?";
}

inline const char* to_string(BootState s) {
    switch (s) {
        case BootState::VERIFIED: return "VERIFIED";
        case BootState::SELF_SIGNED: return "SELF_SIGNED";
        case BootState::UNVERIFIED: return "UNVERIFIED";
        case BootState::FAILED: return "FAILED";
    }
    return "?";
}

inline std::optional<SecurityLevel> security_level_from_string(const std::string& s) {
    if (s == "STRONGBOX") return SecurityLevel::STRONGBOX;
    if (s == "TRUSTED_ENVIRONMENT") return SecurityLevel::TRUSTED_ENVIRONMENT;
    if (s == "SOFTWARE") return SecurityLevel::SOFTWARE;
    return std::nullopt;
}

inline std::optional<BootState> boot_state_from_string(const std::string& s) {
    if (s == "VERIFIED") return BootState::VERIFIED;
    if (s == "SELF_SIGNED") return BootState::SELF_SIGNED;
    if (s == "UNVERIFIED") return BootState::UNVERIFIED;
    if (s == "FAILED") return BootState::FAILED;
    return std::nullopt;
}

// A chain is an ordered array of JWS "certificates", leaf first. Each cert's
// payload carries the subject public key (JWK) plus validity window; the leaf
// additionally carries the attestation extension. Each cert is signed by the
// next cert's subject key; the last is self-signed by a pinned trust root.
// The format is versioned ("aegon-cert-v1") so an X.509 adapter can sit
// behind the same contract later.
struct ChainAccept {
    EcKey device_pubkey;
    SecurityLevel security_level{};
    BootState verified_boot_state{};
};

enum class ChainReject {
    untrusted_root,
    broken_link,
    expired_cert,
    challenge_mismatch,
    software_level,
    unlocked_bootloader,
    malformed_chain,
};

inline const char* to_string(ChainReject r) {
    switch (r) {
        case ChainReject::untrusted_root: return "untrusted_root";
        case ChainReject::broken_link: return "broken_link";
        case ChainReject::expired_cert: return "expired_cert";
        case ChainReject::challenge_mismatch: return "challenge_mismatch";
        case ChainReject::software_level: return "software_level";
        case ChainReject::unlocked_bootloader: return "unlocked_bootloader";
        case ChainReject::malformed_chain: return "malformed_chain";
    }
    return "?";
}

using ChainVerdict = std::variant<ChainAccept, ChainReject>;

inline bool same_public_key(const Json& a, const Json& b) {
    return a.value("x", "") == b.value("x", "") && a.value("y", "") == b.value("y", "");
}

inline ChainVerdict verify_chain(const Json& chain, const std::vector<Json>& trust_root_jwks,
                                 const std::string& expected_challenge_hex, std::int64_t now_s) {
    if (!chain.is_array() || chain.size() < 2) return ChainReject::malformed_chain;

    std::vector<JwsParts> certs;
    for (const auto& c : chain) {
        if (!c.is_string()) return ChainReject::malformed_chain;
        auto parts = jws_decode(c.get<std::string>());
        if (!parts) return ChainReject::malformed_chain;
        const Json& p = parts->payload;
        if (p.value("format", "") != "aegon-cert-v1" || !p.contains("subject_public_key")) {
            return ChainReject::malformed_chain;
        }
        certs.push_back(std::move(*parts));
    }

    // Root pinning: the last cert's subject key must be a configured root.
    const Json& root_key = certs.back().payload["subject_public_key"];
    bool rooted = false;
    for (const auto& trusted : trust_root_jwks) {
        if (same_public_key(root_key, trusted)) rooted = true;
    }
    if (!rooted) return ChainReject::untrusted_root;

    // Link signatures: cert i is signed by cert i+1's subject; root self-signs.
    for (std::size_t i = 0; i < certs.size(); ++i) {
        const Json& signer_jwk = (i + 1 < certs.size())
                                     ? certs[i + 1].payload["subject_public_key"]
                                     : certs[i].payload["subject_public_key"];
        EcKey signer = [&]() -> EcKey {
            try {
                return EcKey::from_public_jwk(signer_jwk);
            } catch (const std::exception&) {
                throw ValidationError("bad key in chain");
            }
        }();
        if (!jws_verify(certs[i], signer)) return ChainReject::broken_link;
    }

    for (const auto& cert : certs) {
        std::int64_t nb = cert.payload.value("not_before", std::int64_t{0});
        std::int64_t na = cert.payload.value("not_after", std::int64_t{0});
        if (now_s < nb || now_s > na) return ChainReject::expired_cert;
    }

    const Json& leaf = certs.front().payload;
    if (!leaf.contains("attestation_ext")) return ChainReject::malformed_chain;
    const Json& ext = leaf["attestation_ext"];
    if (ext.value("attestation_challenge", "") != expected_challenge_hex) {
        return ChainReject::challenge_mismatch;
    }
    auto level = security_level_from_string(ext.value("security_level", ""));
    auto boot = boot_state_from_string(ext.value("verified_boot_state", ""));
    if (!level || !boot) return ChainReject::malformed_chain;
    if (*level == SecurityLevel::SOFTWARE) return ChainReject::software_level;
    if (*boot != BootState::VERIFIED) return ChainReject::unlocked_bootloader;

    return ChainAccept{EcKey::from_public_jwk(leaf["subject_public_key"]), *level, *boot};
}

struct DeviceRecord {
    std::string device_id;
    EcKey public_key;
    SecurityLevel security_level{};
    BootState verified_boot_state{};
    std::int64_t registered_at = 0;
    bool revoked = false;
};

enum class ReceiptReject {
    unknown_device,
    revoked_device,
    bad_signature,
    unknown_txn,
    no_publisher_hash,
    hash_mismatch,
    stale_receipt,
    duplicate_receipt,
    malformed,
};

inline const char* to_string(ReceiptReject r) {
    switch (r) {
        case ReceiptReject::unknown_device: return "unknown_device";
        case ReceiptReject::revoked_device: return "revoked_device";
        case ReceiptReject::bad_signature: return "bad_signature";
        case ReceiptReject::unknown_txn: return "unknown_txn";
        case ReceiptReject::no_publisher_hash: return "no_publisher_hash";
        case ReceiptReject::hash_mismatch: return "hash_mismatch";
        case ReceiptReject::stale_receipt: return "stale_receipt";
        case ReceiptReject::duplicate_receipt: return "duplicate_receipt";
        case ReceiptReject::malformed: return "malformed";
    }
    return "?";
}

struct ReceiptResult {
    bool accepted = false;
    std::optional<ReceiptReject> reason;
    std::string receipt_id;
    std::string txn_id;
};

// ISO-8601 Z timestamp helpers for the receipt `timestamp` field.
inline std::string iso8601_utc(std::int64_t epoch_s) {
    std::tm tm{};
    time_t t = static_cast<time_t>(epoch_s);
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::optional<std::int64_t> parse_iso8601_utc(const std::string& s) {
    std::tm tm{};
    if (!strptime(s.c_str(), "%Y-%m-%dT%H:%M:%SZ", &tm)) return std::nullopt;
    return timegm(&tm);
}

// Broker-side receipt pipeline: device registry, challenge nonces, chain
// verification, receipt checks in contract order, and receipt_id dedup.
class AttestationVerifier {
public:
    struct Config {
        std::vector<Json> trust_root_jwks;
        std::int64_t challenge_ttl_s = 600;
        std::int64_t receipt_window_s = 7 * 86400;
        std::int64_t dedup_retention_s = 8 * 86400;
    };

    AttestationVerifier(Ledger& ledger, Config cfg) : ledger_(ledger), cfg_(std::move(cfg)) {}

    // Single-use registration challenge, 32 random bytes, limited lifetime.
    std::string issue_challenge(std::int64_t now_s) {
        std::string challenge = hex_encode(random_bytes(32));
        std::lock_guard lock(mu_);
        challenges_[challenge] = now_s + cfg_.challenge_ttl_s;
        return challenge;
    }

    std::variant<DeviceRecord, ChainReject, std::string> register_device(
        const Json& chain, const std::string& challenge_hex, std::int64_t now_s) {
        {
            std::lock_guard lock(mu_);
            auto it = challenges_.find(challenge_hex);
            if (it == challenges_.end() || it->second < now_s) {
                return std::string("challenge_replayed_or_expired");
            }
            challenges_.erase(it); // single use
        }
        ChainVerdict v = verify_chain(chain, cfg_.trust_root_jwks, challenge_hex, now_s);
        if (auto* reject = std::get_if<ChainReject>(&v)) return *reject;
        auto& accept = std::get<ChainAccept>(v);
        DeviceRecord rec{"dev_" + hex_encode(random_bytes(8)), accept.device_pubkey,
                         accept.security_level, accept.verified_boot_state, now_s, false};
        std::lock_guard lock(mu_);
        devices_.emplace(rec.device_id, rec);
        return rec;
    }

    bool revoke_device(const std::string& device_id) {
        std::lock_guard lock(mu_);
        auto it = devices_.find(device_id);
        if (it == devices_.end()) return false;
        it->second.revoked = true; // idempotent
        return true;
    }

    std::optional<DeviceRecord> find_device(const std::string& device_id) const {
        std::lock_guard lock(mu_);
        auto it = devices_.find(device_id);
        if (it == devices_.end()) return std::nullopt;
        return it->second;
    }

    // Checks run in contract order; the first failure is the returned reason.
    ReceiptResult verify_receipt(const std::string& receipt_jws, std::int64_t now_s) {
        ReceiptResult res;
        auto parts = jws_decode(receipt_jws);
        if (!parts) {
            res.reason = ReceiptReject::malformed;
            return res;
        }
        const Json& p = parts->payload;
        res.receipt_id = p.value("receipt_id", "");
        res.txn_id = p.value("txn_id", "");

        std::string device_id = parts->header.value("kid", "");
        std::optional<DeviceRecord> device = find_device(device_id);
        if (!device) {
            res.reason = ReceiptReject::unknown_device;
            return res;
        }
        if (device->revoked) {
            res.reason = ReceiptReject::revoked_device;
            return res;
        }
        if (!jws_verify(*parts, device->public_key)) {
            res.reason = ReceiptReject::bad_signature;
            return res;
        }
        if (res.receipt_id.empty() || res.txn_id.empty() || !p.contains("content_hash") ||
            !p.contains("timestamp") || p.value("event_type", "") != "content_consumed") {
            res.reason = ReceiptReject::malformed;
            return res;
        }
        if (!ledger_.has_txn(res.txn_id)) {
            res.reason = ReceiptReject::unknown_txn;
            return res;
        }
        std::string reported = publisher_hash_for(res.txn_id);
        if (reported.empty()) {
            res.reason = ReceiptReject::no_publisher_hash; // retryable
            return res;
        }
        std::string receipt_hash = p["content_hash"].get<std::string>();
        if (receipt_hash != "sha256:" + reported) {
            res.reason = ReceiptReject::hash_mismatch;
            return res;
        }
        auto ts = parse_iso8601_utc(p["timestamp"].get<std::string>());
        if (!ts) {
            res.reason = ReceiptReject::malformed;
            return res;
        }
        // Boundary is inclusive: exactly 7 days old is still accepted.
        if (now_s - *ts > cfg_.receipt_window_s) {
            res.reason = ReceiptReject::stale_receipt;
            return res;
        }
        {
            std::lock_guard lock(mu_);
            evict_dedup(now_s);
            if (!seen_receipts_.emplace(res.receipt_id, now_s).second) {
                res.reason = ReceiptReject::duplicate_receipt;
                return res;
            }
        }
        Json entry{{"receipt_id", res.receipt_id},
                   {"device_id", device_id},
                   {"content_hash", receipt_hash},
                   {"receipt_jws_sha256", sha256_hex(receipt_jws)}};
        ledger_.append(res.txn_id, EntryType::receipt_accepted, canonical_encode(entry), now_s);
        res.accepted = true;
        return res;
    }

private:
    std::string publisher_hash_for(const std::string& txn_id) const {
        for (const LedgerEntry& e : ledger_.entries_for_txn(txn_id)) {
            if (e.entry_type == EntryType::content_hash_reported) {
                return Json::parse(e.payload).value("content_sha256", "");
            }
        }
        return "";
    }

    void evict_dedup(std::int64_t now_s) {
        if (now_s < next_evict_s_) return;
        next_evict_s_ = now_s + 3600;
        for (auto it = seen_receipts_.begin(); it != seen_receipts_.end();) {
            if (it->second + cfg_.dedup_retention_s < now_s) {
                it = seen_receipts_.erase(it);
            } else {
                ++it;
            }
        }
    }

    Ledger& ledger_;
    Config cfg_;
    mutable std::mutex mu_;
    std::unordered_map<std::string, std::int64_t> challenges_;
    std::unordered_map<std::string, DeviceRecord> devices_;
    std::unordered_map<std::string, std::int64_t> seen_receipts_;
    std::int64_t next_evict_s_ = 0;
};

// Test/sim-side chain construction: builds an aegon-cert-v1 chain from a root
// key down to a device key, embedding the challenge and device properties.
inline Json build_attestation_chain(const EcKey& device_pub, const EcKey& root_key,
                                    const std::string& challenge_hex, SecurityLevel level,
                                    BootState boot, std::int64_t now_s,
                                    std::int64_t validity_s = 10 * 365 * 86400) {
    EcKey intermediate = EcKey::generate();

    Json root_payload{{"format", "aegon-cert-v1"},
                      {"subject_public_key", root_key.public_jwk()},
                      {"subject_id", "aegon-sim-root"},
                      {"issuer_id", "aegon-sim-root"},
                      {"not_before", now_s - 86400},
                      {"not_after", now_s + validity_s}};
    Json inter_payload{{"format", "aegon-cert-v1"},
                       {"subject_public_key", intermediate.public_jwk()},
                       {"subject_id", "aegon-sim-intermediate"},
                       {"issuer_id", "aegon-sim-root"},
                       {"not_before", now_s - 86400},
                       {"not_after", now_s + validity_s}};
    Json leaf_payload{{"format", "aegon-cert-v1"},
                      {"subject_public_key", device_pub.public_jwk()},
                      {"subject_id", "aegon-sim-device"},
                      {"issuer_id", "aegon-sim-intermediate"},
                      {"not_before", now_s - 86400},
                      {"not_after", now_s + validity_s},
                      {"attestation_ext",
                       Json{{"security_level", to_string(level)},
                            {"verified_boot_state", to_string(boot)},
                            {"attestation_challenge", challenge_hex},
                            {"android_version", 14},
                            {"security_patch_level", "2026-02-01"}}}};

    return Json::array({jws_sign(leaf_payload, intermediate, "", "aegon-cert+jws"),
                        jws_sign(inter_payload, root_key, "", "aegon-cert+jws"),
                        jws_sign(root_payload, root_key, "", "aegon-cert+jws")});
}

} // namespace aegon
