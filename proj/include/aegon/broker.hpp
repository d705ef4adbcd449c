#pragma once

#include <atomic>
#include <cstring>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "aegon/attestation.hpp"
#include "aegon/clock.hpp"
#include "aegon/keyset.hpp"
#include "aegon/ledger.hpp"
#include "aegon/provenance.hpp"
#include "aegon/token.hpp"

namespace aegon {

struct ApiResult {
    int status = 200;
    Json body;
};

inline ApiResult api_error(int status, const std::string& code, const std::string& message) {
    return {status, Json{{"error_code", code}, {"message", message}}};
}

struct SpotCheckResult {
    std::string txn_id;
    std::string broker_hash;
    std::string publisher_hash;
    std::string platform_hash;                 // may be empty
    std::string verdict = "inconclusive";      // verified | mismatch | inconclusive
    std::int64_t checked_at = 0;

    Json to_json() const {
        return Json{{"txn_id", txn_id},
                    {"broker_hash", broker_hash},
                    {"publisher_hash", publisher_hash},
                    {"platform_hash", platform_hash},
                    {"verdict", verdict},
                    {"checked_at", checked_at}};
    }
};

struct PublisherHealth {
    std::string publisher_domain;
    int consecutive_mismatches = 0;
    bool escalated = false;
};

// Deterministic spot-check sampling: selected iff the first 8 bytes of
// SHA-256(txn_id || epoch_salt), read big-endian, fall below rate * 2^64.
inline bool spot_check_select(const std::string& txn_id, const std::string& epoch_salt,
                              double rate) {
    if (rate <= 0.0) return false;
    if (rate >= 1.0) return true;
    Digest d = sha256(txn_id + epoch_salt);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | d[i];
    return static_cast<double>(v) / 18446744073709551616.0 < rate;
}

// The broker of Figures 1 and 2: license issuance, ledger commitment,
// content-hash intake, provenance recording, receipt verification, and the
// spot-check scheduler. All API methods are JSON-in/JSON-out so the HTTP
// layer and in-process harness clients share one implementation.
class BrokerCore {
public:
    struct Config {
        std::string issuer = "broker.aegon.test";
        std::filesystem::path data_dir; // empty -> in-memory ledger
        double spot_check_rate = 0.05;
        int escalation_threshold = 3;
        std::int64_t skew_threshold_s = 300;
        std::vector<Json> trust_root_jwks;
        bool sync_each_append = true;
    };

    using ContentFetcher = std::function<std::optional<std::string>(const std::string& url)>;

    BrokerCore(Config cfg, ClockPtr clock, BrokerKeySet keys)
        : cfg_(std::move(cfg)),
          clock_(std::move(clock)),
          keys_(std::move(keys)),
          ledger_(make_ledger(cfg_)),
          provenance_(*ledger_, [this](const std::string& id) { return platform_key(id); },
                      cfg_.skew_threshold_s),
          attestation_(*ledger_, {cfg_.trust_root_jwks}) {
        epoch_salt_ = hex_encode(random_bytes(8));
        // Rebuild derived state from a recovered ledger.
        for (std::uint64_t i = 0; i < ledger_->size(); ++i) {
            auto e = ledger_->entry_at(i);
            if (e && e->entry_type == EntryType::content_hash_reported) {
                publisher_hashes_.emplace(e->txn_id,
                                          Json::parse(e->payload).value("content_sha256", ""));
            }
        }
    }

    Ledger& ledger() { return *ledger_; }
    const BrokerKeySet& keys() const { return keys_; }
    ClockPtr clock() const { return clock_; }

    void register_platform(const std::string& platform_id, const Json& public_jwk) {
        std::lock_guard lock(mu_);
        platforms_[platform_id] = public_jwk;
    }

    std::optional<EcKey> platform_key(const std::string& platform_id) const {
        std::lock_guard lock(mu_);
        auto it = platforms_.find(platform_id);
        if (it == platforms_.end()) return std::nullopt;
        try {
            return EcKey::from_public_jwk(it->second);
        } catch (const std::exception&) {
            return std::nullopt;
        }
    }

    void set_epoch_salt(std::string salt) { epoch_salt_ = std::move(salt); }
    const std::string& epoch_salt() const { return epoch_salt_; }

    void disable_spot_check(const std::string& publisher_domain) {
        std::lock_guard lock(mu_);
        spot_check_disabled_.insert(publisher_domain);
    }

    // ---- API surface ----

    ApiResult post_license(const Json& body) {
        LicenseRequest req;
        try {
            req.platform_id = body.at("platform_id").get<std::string>();
            req.publisher_domain = body.at("publisher_domain").get<std::string>();
            req.resource_url = body.at("resource_url").get<std::string>();
            auto scope = scope_from_string(body.at("scope").get<std::string>());
            auto lt = license_type_from_string(body.at("license_type").get<std::string>());
            if (!scope || !lt) return api_error(400, "invalid_request", "bad scope/license_type");
            req.scope = *scope;
            req.license_type = *lt;
            req.training_allowed = body.value("training_allowed", false);
            req.attribution_required = body.value("attribution_required", false);
            req.provenance_required = body.value("provenance_required", false);
        } catch (const std::exception& e) {
            return api_error(400, "invalid_request", e.what());
        }
        try {
            IssuedToken tok = issue_token(req, cfg_.issuer, keys_, *ledger_, clock_->now_s());
            return {200, Json{{"token", tok.token}, {"txn_id", tok.txn_id}}};
        } catch (const ValidationError& e) {
            return api_error(400, "invalid_request", e.what());
        } catch (const KeyError& e) {
            return api_error(500, "key_error", e.what());
        }
    }

    ApiResult post_content_hash(const Json& body) {
        std::string txn_id, hash, domain;
        std::int64_t observed_at = 0;
        try {
            txn_id = body.at("txn_id").get<std::string>();
            hash = body.at("content_sha256").get<std::string>();
            domain = body.at("publisher_domain").get<std::string>();
            observed_at = body.value("observed_at", clock_->now_s());
        } catch (const std::exception& e) {
            return api_error(400, "invalid_request", e.what());
        }
        if (!ledger_->has_txn(txn_id)) return api_error(404, "not_found", "unknown txn_id");
        {
            std::lock_guard lock(mu_);
            auto it = publisher_hashes_.find(txn_id);
            if (it != publisher_hashes_.end()) {
                if (it->second == hash) return {200, Json{{"status", "duplicate"}}};
                return api_error(409, "hash_conflict", "different hash already reported");
            }
            publisher_hashes_[txn_id] = hash;
        }
        Json payload{{"content_sha256", hash},
                     {"publisher_domain", domain},
                     {"observed_at", observed_at}};
        ledger_->append(txn_id, EntryType::content_hash_reported, canonical_encode(payload),
                        clock_->now_s());
        maybe_spot_check(txn_id);
        return {200, Json{{"status", "recorded"}}};
    }

    ApiResult post_provenance(const Json& body) {
        if (!body.contains("event_jws") || !body["event_jws"].is_string()) {
            return api_error(400, "invalid_request", "missing event_jws");
        }
        auto reject = provenance_.record_event(body["event_jws"].get<std::string>(),
                                               clock_->now_s());
        if (!reject) return {200, Json{{"status", "recorded"}}};
        switch (*reject) {
            case ProvenanceReject::unknown_txn:
                return api_error(404, "not_found", "unknown txn_id");
            case ProvenanceReject::bad_signature:
            case ProvenanceReject::unknown_platform:
                return api_error(403, to_string(*reject), "event signature rejected");
            case ProvenanceReject::validation_error:
                return api_error(400, "validation_error", "bad event");
        }
        return api_error(400, "validation_error", "bad event");
    }

    ApiResult get_chain_status(const std::string& txn_id) {
        ChainStatus s = provenance_.validate_chain(txn_id);
        Json counts = Json::object();
        for (const auto& [k, v] : s.events_present) counts[k] = v;
        return {200, Json{{"txn_id", s.txn_id},
                          {"events_present", counts},
                          {"order_valid", s.order_valid},
                          {"first_event_is_fetch", s.first_event_is_fetch},
                          {"timestamp_flags", s.timestamp_flags},
                          {"fetch_hash_matches_publisher", s.fetch_hash_matches_publisher}}};
    }

    ApiResult get_device_challenge() {
        return {200, Json{{"challenge", attestation_.issue_challenge(clock_->now_s())}}};
    }

    ApiResult post_device_register(const Json& body) {
        if (!body.contains("chain") || !body.contains("challenge")) {
            return api_error(400, "invalid_request", "missing chain or challenge");
        }
        auto v = attestation_.register_device(body["chain"],
                                              body["challenge"].get<std::string>(),
                                              clock_->now_s());
        if (auto* rec = std::get_if<DeviceRecord>(&v)) {
            return {200, Json{{"device_id", rec->device_id},
                              {"security_level", to_string(rec->security_level)},
                              {"verified_boot_state", to_string(rec->verified_boot_state)}}};
        }
        if (auto* reject = std::get_if<ChainReject>(&v)) {
            return api_error(403, to_string(*reject), "attestation chain rejected");
        }
        return api_error(409, "challenge_replayed", std::get<std::string>(v));
    }

    ApiResult post_device_revoke(const Json& body) {
        std::string id = body.value("device_id", "");
        if (!attestation_.revoke_device(id)) {
            return api_error(404, "not_found", "unknown device_id");
        }
        return {200, Json{{"status", "revoked"}}};
    }

    // Batch endpoint: up to 100 receipt JWS strings, per-receipt results in
    // input order.
    ApiResult post_receipts(const Json& body) {
        if (!body.is_array()) return api_error(400, "invalid_request", "expected array");
        if (body.size() > 100) return api_error(400, "batch_too_large", "max 100 receipts");
        Json results = Json::array();
        for (const auto& r : body) {
            if (!r.is_string()) {
                results.push_back(Json{{"status", "rejected"}, {"reason", "malformed"}});
                continue;
            }
            ReceiptResult res = attestation_.verify_receipt(r.get<std::string>(),
                                                            clock_->now_s());
            if (res.accepted) {
                results.push_back(Json{{"status", "accepted"}, {"receipt_id", res.receipt_id}});
            } else {
                results.push_back(Json{{"status", "rejected"},
                                       {"reason", to_string(*res.reason)},
                                       {"receipt_id", res.receipt_id}});
            }
        }
        return {200, Json{{"results", results}}};
    }

    ApiResult get_jwks() { return {200, keys_.jwks()}; }

    // Publishes (and retains) a fresh STH over the current tree.
    ApiResult get_sth() {
        try {
            BrokerKey k = keys_.active(KeyPurpose::sth_signing);
            SignedTreeHead sth = ledger_->make_sth(k.key, k.kid, clock_->now_ms());
            return {200, sth.to_json()};
        } catch (const KeyError& e) {
            return api_error(500, "key_error", e.what());
        }
    }

    ApiResult get_sth_history() {
        Json out = Json::array();
        for (const auto& sth : ledger_->sth_history()) out.push_back(sth.to_json());
        return {200, Json{{"sths", out}}};
    }

    ApiResult get_proof(const std::string& txn_id, std::optional<std::uint64_t> tree_size) {
        auto entry = ledger_->license_entry(txn_id);
        if (!entry) return api_error(404, "not_found", "unknown txn_id");
        std::uint64_t size = tree_size.value_or(ledger_->size());
        if (entry->leaf_index >= size || size > ledger_->size()) {
            return api_error(416, "out_of_range", "leaf not covered by tree_size");
        }
        InclusionProof p = ledger_->inclusion(entry->leaf_index, size);
        Json path = Json::array();
        for (const auto& d : p.audit_path) path.push_back(hex(d));
        return {200, Json{{"leaf_index", p.leaf_index},
                          {"tree_size", p.tree_size},
                          {"audit_path", path}}};
    }

    ApiResult get_entry(const std::string& txn_id) {
        auto entry = ledger_->license_entry(txn_id);
        if (!entry) return api_error(404, "not_found", "unknown txn_id");
        return {200, Json{{"entry", entry->to_json()},
                          {"leaf_bytes", entry->leaf_bytes()},
                          {"leaf_index", entry->leaf_index}}};
    }

    ApiResult get_consistency(std::uint64_t old_size, std::uint64_t new_size) {
        if (new_size > ledger_->size() || old_size > new_size) {
            return api_error(416, "out_of_range", "bad sizes");
        }
        ConsistencyProof p = ledger_->consistency(old_size, new_size);
        Json path = Json::array();
        for (const auto& d : p.path) path.push_back(hex(d));
        return {200, Json{{"old_size", p.old_size}, {"new_size", p.new_size}, {"path", path}}};
    }

    ApiResult post_platform_register(const Json& body) {
        if (!body.contains("platform_id") || !body.contains("public_jwk")) {
            return api_error(400, "invalid_request", "missing platform_id or public_jwk");
        }
        register_platform(body["platform_id"].get<std::string>(), body["public_jwk"]);
        return {200, Json{{"status", "registered"}}};
    }

    ApiResult get_spot_checks() {
        std::lock_guard lock(mu_);
        Json out = Json::array();
        for (const auto& r : spot_checks_) out.push_back(r.to_json());
        return {200, Json{{"spot_checks", out}}};
    }

    ApiResult get_publisher_health() {
        std::lock_guard lock(mu_);
        Json out = Json::array();
        for (const auto& [domain, h] : health_) {
            out.push_back(Json{{"publisher_domain", domain},
                               {"consecutive_mismatches", h.consecutive_mismatches},
                               {"escalated", h.escalated}});
        }
        return {200, Json{{"publishers", out}}};
    }

    void set_content_fetcher(ContentFetcher f) { fetcher_ = std::move(f); }

    // Independent re-fetch of the licensed content; compares broker,
    // publisher, and platform hashes. Two matching hashes (broker +
    // publisher) suffice when no provenance fetch event exists yet.
    SpotCheckResult run_spot_check(const std::string& txn_id) {
        SpotCheckResult result;
        result.txn_id = txn_id;
        result.checked_at = clock_->now_s();

        auto license = ledger_->license_entry(txn_id);
        if (!license) {
            record_spot_check(result, "");
            return result;
        }
        Json lic = Json::parse(license->payload);
        std::string url = lic.value("resource_url", "");
        std::string domain = lic.value("publisher_domain", "");

        {
            std::lock_guard lock(mu_);
            auto it = publisher_hashes_.find(txn_id);
            if (it != publisher_hashes_.end()) result.publisher_hash = it->second;
        }
        for (const LedgerEntry& e : ledger_->entries_for_txn(txn_id)) {
            if (e.entry_type != EntryType::provenance_event) continue;
            Json body = Json::parse(e.payload);
            if (body["event"].value("event_type", "") == "content_fetched") {
                result.platform_hash = body["event"].value("content_fingerprint", "");
                break;
            }
        }
        std::optional<std::string> content = fetcher_ ? fetcher_(url) : std::nullopt;
        if (content) result.broker_hash = sha256_hex(*content);

        if (result.broker_hash.empty() || result.publisher_hash.empty()) {
            result.verdict = "inconclusive";
        } else if (result.broker_hash == result.publisher_hash &&
                   (result.platform_hash.empty() ||
                    result.platform_hash == result.broker_hash)) {
            result.verdict = "verified";
        } else {
            result.verdict = "mismatch";
        }
        record_spot_check(result, domain);
        return result;
    }

    bool spot_check_selected(const std::string& txn_id, const std::string& domain) const {
        {
            std::lock_guard lock(mu_);
            if (spot_check_disabled_.count(domain)) return false;
        }
        return spot_check_select(txn_id, epoch_salt_, cfg_.spot_check_rate);
    }

    const Config& config() const { return cfg_; }

private:
    static std::unique_ptr<Ledger> make_ledger(const Config& cfg) {
        if (cfg.data_dir.empty()) return std::make_unique<Ledger>();
        std::filesystem::create_directories(cfg.data_dir);
        return std::make_unique<Ledger>(cfg.data_dir / "ledger.aegl", cfg.sync_each_append);
    }

    void maybe_spot_check(const std::string& txn_id) {
        auto license = ledger_->license_entry(txn_id);
        if (!license) return;
        std::string domain = Json::parse(license->payload).value("publisher_domain", "");
        if (!spot_check_selected(txn_id, domain)) return;
        if (fetcher_) run_spot_check(txn_id);
    }

    void record_spot_check(const SpotCheckResult& result, const std::string& domain) {
        if (ledger_->has_txn(result.txn_id)) {
            ledger_->append(result.txn_id, EntryType::spot_check_result,
                            canonical_encode(result.to_json()), clock_->now_s());
        }
        std::lock_guard lock(mu_);
        spot_checks_.push_back(result);
        if (domain.empty()) return;
        auto& h = health_[domain];
        h.publisher_domain = domain;
        if (result.verdict == "mismatch") {
            h.consecutive_mismatches++;
            if (h.consecutive_mismatches >= cfg_.escalation_threshold) h.escalated = true;
        } else if (result.verdict == "verified") {
            h.consecutive_mismatches = 0;
        }
    }

    Config cfg_;
    ClockPtr clock_;
    BrokerKeySet keys_;
    std::unique_ptr<Ledger> ledger_;
    ProvenanceLog provenance_;
    AttestationVerifier attestation_;
    ContentFetcher fetcher_;

    mutable std::mutex mu_;
    std::unordered_map<std::string, Json> platforms_;
    std::unordered_map<std::string, std::string> publisher_hashes_;
    std::set<std::string> spot_check_disabled_;
    std::vector<SpotCheckResult> spot_checks_;
    std::unordered_map<std::string, PublisherHealth> health_;
    std::string epoch_salt_;
};

} // namespace aegon
