#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "aegon/canonical.hpp"
#include "aegon/clock.hpp"
#include "aegon/ecdsa.hpp"
#include "aegon/errors.hpp"
#include "aegon/merkle.hpp"
#include "aegon/storage.hpp"

namespace aegon {

enum class EntryType {
    license_issued,
    content_hash_reported,
    provenance_event,
    receipt_accepted,
    spot_check_result,
};

inline const char* to_string(EntryType t) {
    switch (t) {
        case EntryType::license_issued: return "license_issued";
        case EntryType::content_hash_reported: return "content_hash_reported";
        case EntryType::provenance_event: return "provenance_event";
        case EntryType::receipt_accepted: return "receipt_accepted";
        case EntryType::spot_check_result: return "spot_check_result";
    }
    return "?";
}

inline std::optional<EntryType> entry_type_from_string(const std::string& s) {
    if (s == "license_issued") return EntryType::license_issued;
    if (s == "content_hash_reported") return EntryType::content_hash_reported;
    if (s == "provenance_event") return EntryType::provenance_event;
    if (s == "receipt_accepted") return EntryType::receipt_accepted;
    if (s == "spot_check_result") return EntryType::spot_check_result;
    return std::nullopt;
}

// One write-once row of the transaction ledger; the unit committed to the
// Merkle tree.
struct LedgerEntry {
    std::string txn_id;
    EntryType entry_type{};
    std::string payload; // canonical JSON bytes of the entry-type-specific body
    std::int64_t server_timestamp = 0;
    std::uint64_t leaf_index = 0;

    Json to_json() const {
        return Json{{"txn_id", txn_id},
                    {"entry_type", to_string(entry_type)},
                    {"payload", payload},
                    {"server_timestamp", server_timestamp},
                    {"leaf_index", leaf_index}};
    }

    static LedgerEntry from_json(const Json& j) {
        LedgerEntry e;
        e.txn_id = j.at("txn_id").get<std::string>();
        auto t = entry_type_from_string(j.at("entry_type").get<std::string>());
        if (!t) throw ValidationError("unknown entry_type");
        e.entry_type = *t;
        e.payload = j.at("payload").get<std::string>();
        e.server_timestamp = j.at("server_timestamp").get<std::int64_t>();
        e.leaf_index = j.at("leaf_index").get<std::uint64_t>();
        return e;
    }

    std::string leaf_bytes() const { return canonical_encode(to_json()); }
};

struct SignedTreeHead {
    std::uint64_t tree_size = 0;
    Digest root_hash{};
    std::int64_t timestamp = 0; // UTC milliseconds
    Bytes signature;            // ECDSA P-256, raw r||s
    std::string key_id;

    std::string signing_bytes() const {
        return canonical_encode(Json{{"root_hash", hex(root_hash)},
                                     {"timestamp", timestamp},
                                     {"tree_size", tree_size}});
    }

    Json to_json() const {
        return Json{{"tree_size", tree_size},
                    {"root_hash", hex(root_hash)},
                    {"timestamp", timestamp},
                    {"signature", base64url_encode(signature)},
                    {"key_id", key_id}};
    }

    static SignedTreeHead from_json(const Json& j) {
        SignedTreeHead sth;
        sth.tree_size = j.at("tree_size").get<std::uint64_t>();
        Bytes root = hex_decode(j.at("root_hash").get<std::string>());
        if (root.size() != 32) throw ValidationError("bad root_hash length");
        std::copy(root.begin(), root.end(), sth.root_hash.begin());
        sth.timestamp = j.at("timestamp").get<std::int64_t>();
        sth.signature = base64url_decode(j.at("signature").get<std::string>());
        sth.key_id = j.at("key_id").get<std::string>();
        return sth;
    }
};

inline bool verify_sth_signature(const SignedTreeHead& sth, const EcKey& sth_public_key) {
    return sth_public_key.verify(sth.signing_bytes(), sth.signature);
}

// Append-only transaction ledger with an RFC 6962 Merkle tree over the
// entries. Appends are serialized; reads observe a consistent snapshot.
class Ledger {
public:
    // In-memory only (tests).
    Ledger() = default;

    // File-backed; replays existing records on startup.
    explicit Ledger(const std::filesystem::path& path, bool sync_each_append = true) {
        bool truncated = false;
        for (const Bytes& rec : RecordFile::read_all(path, &truncated)) {
            LedgerEntry e = LedgerEntry::from_json(Json::parse(to_string(rec)));
            index_entry(e);
        }
        recovered_truncated_tail_ = truncated;
        file_ = RecordFile(path, sync_each_append);
        // Re-append nothing: the file already holds what we indexed. A
        // discarded torn tail is simply rewritten by subsequent appends.
    }

    bool recovered_truncated_tail() const { return recovered_truncated_tail_; }

    std::uint64_t append(const std::string& txn_id, EntryType type, std::string payload,
                         std::int64_t server_timestamp) {
        std::unique_lock lock(mu_);
        auto it = by_txn_.find(txn_id);
        if (type == EntryType::license_issued) {
            if (it != by_txn_.end() && !it->second.license_leaves.empty()) {
                throw ConflictError("license_issued already recorded for " + txn_id);
            }
        } else {
            if (it == by_txn_.end() || it->second.license_leaves.empty()) {
                throw NotFoundError("no license_issued entry for " + txn_id);
            }
        }
        LedgerEntry e{txn_id, type, std::move(payload), server_timestamp,
                      static_cast<std::uint64_t>(entries_.size())};
        if (file_.is_open()) file_.append(e.leaf_bytes());
        index_entry(e);
        return entries_.back().leaf_index;
    }

    std::uint64_t size() const {
        std::shared_lock lock(mu_);
        return entries_.size();
    }

    Digest root(std::uint64_t tree_size) const {
        std::shared_lock lock(mu_);
        return tree_.root(tree_size);
    }

    Digest root() const {
        std::shared_lock lock(mu_);
        return tree_.root();
    }

    std::optional<LedgerEntry> entry_at(std::uint64_t leaf_index) const {
        std::shared_lock lock(mu_);
        if (leaf_index >= entries_.size()) return std::nullopt;
        return entries_[leaf_index];
    }

    // The license_issued entry for a txn_id (the leaf audited by default).
    std::optional<LedgerEntry> license_entry(const std::string& txn_id) const {
        std::shared_lock lock(mu_);
        auto it = by_txn_.find(txn_id);
        if (it == by_txn_.end() || it->second.license_leaves.empty()) return std::nullopt;
        return entries_[it->second.license_leaves.front()];
    }

    std::vector<LedgerEntry> entries_for_txn(const std::string& txn_id) const {
        std::shared_lock lock(mu_);
        std::vector<LedgerEntry> out;
        auto it = by_txn_.find(txn_id);
        if (it == by_txn_.end()) return out;
        for (auto idx : it->second.all_leaves) out.push_back(entries_[idx]);
        return out;
    }

    bool has_txn(const std::string& txn_id) const {
        std::shared_lock lock(mu_);
        auto it = by_txn_.find(txn_id);
        return it != by_txn_.end() && !it->second.license_leaves.empty();
    }

    InclusionProof inclusion(std::uint64_t leaf_index, std::uint64_t tree_size) const {
        std::shared_lock lock(mu_);
        return tree_.inclusion(leaf_index, tree_size);
    }

    ConsistencyProof consistency(std::uint64_t old_size, std::uint64_t new_size) const {
        std::shared_lock lock(mu_);
        return tree_.consistency(old_size, new_size);
    }

    SignedTreeHead make_sth(const EcKey& signing_key, const std::string& key_id,
                            std::int64_t now_ms) {
        SignedTreeHead sth;
        {
            std::shared_lock lock(mu_);
            sth.tree_size = entries_.size();
            sth.root_hash = tree_.root();
        }
        sth.timestamp = now_ms;
        sth.key_id = key_id;
        sth.signature = signing_key.sign(sth.signing_bytes());
        {
            std::unique_lock lock(mu_);
            sth_history_.push_back(sth);
        }
        return sth;
    }

    std::vector<SignedTreeHead> sth_history() const {
        std::shared_lock lock(mu_);
        return sth_history_;
    }

    std::uint64_t appends_since_last_sth() const {
        std::shared_lock lock(mu_);
        std::uint64_t last = sth_history_.empty() ? 0 : sth_history_.back().tree_size;
        return entries_.size() - last;
    }

private:
    struct TxnIndex {
        std::vector<std::uint64_t> license_leaves;
        std::vector<std::uint64_t> all_leaves;
    };

    void index_entry(const LedgerEntry& e) {
        tree_.push_leaf(leaf_hash(e.leaf_bytes()));
        auto& idx = by_txn_[e.txn_id];
        if (e.entry_type == EntryType::license_issued) idx.license_leaves.push_back(e.leaf_index);
        idx.all_leaves.push_back(e.leaf_index);
        entries_.push_back(e);
    }

    mutable std::shared_mutex mu_;
    std::vector<LedgerEntry> entries_;
    MerkleTree tree_;
    std::unordered_map<std::string, TxnIndex> by_txn_;
    std::vector<SignedTreeHead> sth_history_;
    RecordFile file_;
    bool recovered_truncated_tail_ = false;
};

} // namespace aegon
