#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aegon/jws.hpp"
#include "aegon/ledger.hpp"

namespace aegon {

enum class ProvenanceStage {
    content_fetched,
    content_chunked,
    chunk_embedded,
    chunk_retrieved,
    content_cited,
};

inline const char* to_string(ProvenanceStage s) {
    switch (s) {
        case ProvenanceStage::content_fetched: return "content_fetched";
        case ProvenanceStage::content_chunked: return "content_chunked";
        case ProvenanceStage::chunk_embedded: return "chunk_embedded";
        case ProvenanceStage::chunk_retrieved: return "chunk_retrieved";
        case ProvenanceStage::content_cited: return "content_cited";
    }
    return "?";
}

inline std::optional<ProvenanceStage> stage_from_string(const std::string& s) {
    if (s == "content_fetched") return ProvenanceStage::content_fetched;
    if (s == "content_chunked") return ProvenanceStage::content_chunked;
    if (s == "chunk_embedded") return ProvenanceStage::chunk_embedded;
    if (s == "chunk_retrieved") return ProvenanceStage::chunk_retrieved;
    if (s == "content_cited") return ProvenanceStage::content_cited;
    return std::nullopt;
}

inline std::string fingerprint(std::string_view artifact_bytes) {
    return sha256_hex(artifact_bytes);
}

// Fields the platform signs; the broker adds server_receipt_timestamp on
// arrival (never the client).
struct ProvenanceEventBody {
    std::string txn_id;
    ProvenanceStage event_type{};
    std::string content_fingerprint; // SHA-256 hex of the stage artifact
    Json stage_detail = Json::object();
    std::int64_t client_timestamp = 0;

    Json to_json() const {
        Json j{{"txn_id", txn_id},
               {"event_type", to_string(event_type)},
               {"content_fingerprint", content_fingerprint},
               {"client_timestamp", client_timestamp}};
        if (!stage_detail.empty()) j["stage_detail"] = stage_detail;
        return j;
    }
};

// Client-side helper: the signed event is a JWS whose payload is the
// canonical event body.
inline std::string sign_provenance_event(const ProvenanceEventBody& body, const EcKey& platform_key,
                                         const std::string& platform_id) {
    return jws_sign(body.to_json(), platform_key, platform_id, "aegon-prov+jws");
}

struct ChainStatus {
    std::string txn_id;
    std::map<std::string, int> events_present;
    bool order_valid = false;
    bool first_event_is_fetch = false;
    std::vector<Json> timestamp_flags; // {event, skew_seconds}
    std::string fetch_hash_matches_publisher = "unreported"; // match | mismatch | unreported
};

enum class ProvenanceReject { unknown_txn, bad_signature, validation_error, unknown_platform };

inline const char* to_string(ProvenanceReject r) {
    switch (r) {
        case ProvenanceReject::unknown_txn: return "unknown_txn";
        case ProvenanceReject::bad_signature: return "bad_signature";
        case ProvenanceReject::validation_error: return "validation_error";
        case ProvenanceReject::unknown_platform: return "unknown_platform";
    }
    return "?";
}

// Broker-side recorder and validator for the five-stage event chain.
class ProvenanceLog {
public:
    using PlatformKeyLookup = std::function<std::optional<EcKey>(const std::string& platform_id)>;

    ProvenanceLog(Ledger& ledger, PlatformKeyLookup lookup_key, std::int64_t skew_threshold_s = 300)
        : ledger_(ledger), lookup_key_(std::move(lookup_key)),
          skew_threshold_s_(skew_threshold_s) {}

    // Verifies the platform signature, stamps the server receipt time, and
    // appends the event to the ledger. Signature rejections are telemetry,
    // not ledger entries.
    std::optional<ProvenanceReject> record_event(const std::string& event_jws,
                                                 std::int64_t now_s) {
        auto parts = jws_decode(event_jws);
        if (!parts) return ProvenanceReject::validation_error;
        std::string platform_id = parts->header.value("kid", "");
        auto key = lookup_key_(platform_id);
        if (!key) {
            rejected_count_++;
            return ProvenanceReject::unknown_platform;
        }
        if (!jws_verify(*parts, *key)) {
            rejected_count_++;
            return ProvenanceReject::bad_signature;
        }
        const Json& p = parts->payload;
        if (!p.contains("txn_id") || !p.contains("event_type") ||
            !p.contains("content_fingerprint") || !p.contains("client_timestamp")) {
            return ProvenanceReject::validation_error;
        }
        auto stage = stage_from_string(p["event_type"].get<std::string>());
        if (!stage) return ProvenanceReject::validation_error;
        std::string txn_id = p["txn_id"].get<std::string>();
        if (!ledger_.has_txn(txn_id)) return ProvenanceReject::unknown_txn;
        auto license = ledger_.license_entry(txn_id);
        Json license_body = Json::parse(license->payload);
        if (license_body.value("platform_id", "") != platform_id) {
            rejected_count_++;
            return ProvenanceReject::bad_signature;
        }

        std::int64_t client_ts = p["client_timestamp"].get<std::int64_t>();
        std::int64_t skew = std::llabs(now_s - client_ts);
        Json stored{{"event", p},
                    {"platform_id", platform_id},
                    {"event_jws", event_jws},
                    {"server_receipt_timestamp", now_s}};
        if (skew > skew_threshold_s_) stored["skew_flag"] = skew;
        ledger_.append(txn_id, EntryType::provenance_event, canonical_encode(stored), now_s);
        return std::nullopt;
    }

    ChainStatus validate_chain(const std::string& txn_id) const {
        ChainStatus status;
        status.txn_id = txn_id;

        static constexpr std::array<ProvenanceStage, 5> pipeline{
            ProvenanceStage::content_fetched, ProvenanceStage::content_chunked,
            ProvenanceStage::chunk_embedded, ProvenanceStage::chunk_retrieved,
            ProvenanceStage::content_cited};

        std::map<std::string, std::uint64_t> first_seen; // stage -> leaf_index
        std::string fetch_fingerprint;
        std::string publisher_hash;
        bool any_event = false;
        std::uint64_t first_event_leaf = 0;
        std::string first_event_type;

        for (const LedgerEntry& entry : ledger_.entries_for_txn(txn_id)) {
            Json body = Json::parse(entry.payload);
            if (entry.entry_type == EntryType::content_hash_reported) {
                if (publisher_hash.empty()) {
                    publisher_hash = body.value("content_sha256", "");
                }
                continue;
            }
            if (entry.entry_type != EntryType::provenance_event) continue;
            const Json& ev = body["event"];
            std::string type = ev.value("event_type", "");
            status.events_present[type]++;
            if (!any_event) {
                any_event = true;
                first_event_leaf = entry.leaf_index;
                first_event_type = type;
            }
            if (first_seen.find(type) == first_seen.end()) first_seen[type] = entry.leaf_index;
            if (type == "content_fetched" && fetch_fingerprint.empty()) {
                fetch_fingerprint = ev.value("content_fingerprint", "");
            }
            if (body.contains("skew_flag")) {
                status.timestamp_flags.push_back(
                    Json{{"event", type}, {"skew_seconds", body["skew_flag"]}});
            }
        }

        status.first_event_is_fetch = any_event && first_event_type == "content_fetched";

        // Ordering on first occurrences: a later stage never precedes the
        // first occurrence of its predecessor.
        status.order_valid = true;
        std::int64_t prev_leaf = -1;
        for (ProvenanceStage stage : pipeline) {
            auto it = first_seen.find(to_string(stage));
            if (it == first_seen.end()) continue;
            if (static_cast<std::int64_t>(it->second) < prev_leaf) {
                status.order_valid = false;
                break;
            }
            prev_leaf = static_cast<std::int64_t>(it->second);
        }

        if (!fetch_fingerprint.empty() && !publisher_hash.empty()) {
            status.fetch_hash_matches_publisher =
                fetch_fingerprint == publisher_hash ? "match" : "mismatch";
        }
        return status;
    }

    std::uint64_t rejected_count() const { return rejected_count_; }

private:
    Ledger& ledger_;
    PlatformKeyLookup lookup_key_;
    std::int64_t skew_threshold_s_;
    std::atomic<std::uint64_t> rejected_count_{0};
};

} // namespace aegon
