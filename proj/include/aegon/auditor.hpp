#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "aegon/keyset.hpp"
#include "aegon/ledger.hpp"
#include "aegon/merkle.hpp"
#include "aegon/storage.hpp"

namespace aegon {

// Exit codes shared by the auditor commands and the CLI.
enum AuditExit : int {
    kAuditOk = 0,
    kAuditVerificationFailure = 1,
    kAuditNotFound = 2,
    kAuditTransportError = 3,
};

// Independent auditor: every verdict is recomputed locally from raw bytes;
// broker-computed results are never trusted. Verdicts are a pure function of
// the fetched bytes and the local STH history.
class Auditor {
public:
    // (path) -> (status, body) or nullopt on transport failure. Injected so
    // fixtures and fault-injecting harnesses can stand in for a live broker.
    using Fetch =
        std::function<std::optional<std::pair<int, std::string>>(const std::string& path)>;

    struct Options {
        std::filesystem::path state_dir;
        bool json_output = false;
    };

    Auditor(Fetch fetch, Options opts, std::ostream& out)
        : fetch_(std::move(fetch)), opts_(std::move(opts)), out_(out) {
        std::filesystem::create_directories(opts_.state_dir);
        for (const Bytes& rec : RecordFile::read_all(history_path())) {
            history_.push_back(SignedTreeHead::from_json(Json::parse(to_string(rec))));
        }
        history_file_ = RecordFile(history_path());
    }

    const std::vector<SignedTreeHead>& history() const { return history_; }

    int cmd_sth() {
        auto sth = fetch_and_check_sth();
        if (!sth) return last_error_;
        emit("sth", "OK", {{"tree_size", sth->tree_size}, {"root_hash", hex(sth->root_hash)}},
             "STH tree_size=" + std::to_string(sth->tree_size) + " root=" + hex(sth->root_hash));
        return kAuditOk;
    }

    int cmd_verify_inclusion(const std::string& txn_id) {
        auto sth = fetch_and_check_sth();
        if (!sth) return last_error_;

        auto entry_res = get_json("/v1/entries/" + txn_id);
        if (!entry_res) return fail_transport();
        if (entry_res->first == 404) {
            emit("verify-inclusion", "NOT FOUND", {{"txn_id", txn_id}},
                 "NOT FOUND: " + txn_id);
            return kAuditNotFound;
        }
        if (entry_res->first != 200) return fail_transport();
        std::string leaf_bytes = entry_res->second.at("leaf_bytes").get<std::string>();
        std::uint64_t leaf_index = entry_res->second.at("leaf_index").get<std::uint64_t>();

        auto proof_res = get_json("/v1/proof?txn_id=" + txn_id +
                                  "&tree_size=" + std::to_string(sth->tree_size));
        if (!proof_res || proof_res->first != 200) return fail_transport();
        InclusionProof proof;
        proof.leaf_index = proof_res->second.at("leaf_index").get<std::uint64_t>();
        proof.tree_size = proof_res->second.at("tree_size").get<std::uint64_t>();
        for (const auto& h : proof_res->second.at("audit_path")) {
            proof.audit_path.push_back(to_digest(h.get<std::string>()));
        }

        // Leaf hash recomputed locally from the entry bytes.
        Digest leaf = leaf_hash(leaf_bytes);
        bool ok = proof.leaf_index == leaf_index &&
                  verify_inclusion(proof, leaf, sth->root_hash, sth->tree_size);
        if (!ok) {
            emit("verify-inclusion", "INVALID PROOF", {{"txn_id", txn_id}},
                 "INVALID PROOF for " + txn_id);
            return kAuditVerificationFailure;
        }
        emit("verify-inclusion", "INCLUDED",
             {{"txn_id", txn_id}, {"leaf_index", leaf_index}, {"tree_size", sth->tree_size}},
             "INCLUDED at index " + std::to_string(leaf_index) + ", tree_size " +
                 std::to_string(sth->tree_size));
        return kAuditOk;
    }

    // Verifies the current broker tree extends the latest stored STH.
    int cmd_consistency() {
        SignedTreeHead old_sth;
        bool have_old = !history_.empty();
        if (have_old) old_sth = history_.back();

        auto new_sth = fetch_and_check_sth();
        if (!new_sth) return last_error_;
        if (!have_old) {
            emit("consistency", "OK", {{"note", "no prior STH"}}, "CONSISTENT (first STH)");
            return kAuditOk;
        }
        if (new_sth->tree_size < old_sth.tree_size) {
            emit("consistency", "ROLLBACK",
                 {{"old_size", old_sth.tree_size}, {"new_size", new_sth->tree_size}},
                 "ALERT: tree shrank " + std::to_string(old_sth.tree_size) + " -> " +
                     std::to_string(new_sth->tree_size));
            return kAuditVerificationFailure;
        }
        auto proof_res = get_json("/v1/consistency?old=" + std::to_string(old_sth.tree_size) +
                                  "&new=" + std::to_string(new_sth->tree_size));
        if (!proof_res || proof_res->first != 200) return fail_transport();
        ConsistencyProof proof;
        proof.old_size = old_sth.tree_size;
        proof.new_size = new_sth->tree_size;
        for (const auto& h : proof_res->second.at("path")) {
            proof.path.push_back(to_digest(h.get<std::string>()));
        }
        if (!verify_consistency(proof, old_sth.root_hash, new_sth->root_hash)) {
            emit("consistency", "INCONSISTENT",
                 {{"old_size", old_sth.tree_size}, {"new_size", new_sth->tree_size}},
                 "ALERT: consistency proof failed " + std::to_string(old_sth.tree_size) +
                     " -> " + std::to_string(new_sth->tree_size));
            return kAuditVerificationFailure;
        }
        emit("consistency", "OK",
             {{"old_size", old_sth.tree_size}, {"new_size", new_sth->tree_size}},
             "CONSISTENT " + std::to_string(old_sth.tree_size) + " -> " +
                 std::to_string(new_sth->tree_size));
        return kAuditOk;
    }

    // Runs cmd_consistency for `cycles` rounds (forever when 0), sleeping via
    // the injected function. Nonzero overall when any cycle alerted.
    int cmd_watch(int cycles, const std::function<void()>& sleep_between) {
        int worst = kAuditOk;
        for (int i = 0; cycles == 0 || i < cycles; ++i) {
            int rc = cmd_consistency();
            if (rc != kAuditOk) worst = rc;
            if (cycles == 0 || i + 1 < cycles) sleep_between();
        }
        return worst;
    }

private:
    std::filesystem::path history_path() const { return opts_.state_dir / "sth_history.aegl"; }

    static Digest to_digest(const std::string& hex_str) {
        Bytes b = hex_decode(hex_str);
        if (b.size() != 32) throw ValidationError("bad digest length");
        Digest d{};
        std::copy(b.begin(), b.end(), d.begin());
        return d;
    }

    std::optional<std::pair<int, Json>> get_json(const std::string& path) {
        auto res = fetch_(path);
        if (!res) return std::nullopt;
        Json body = Json::parse(res->second, nullptr, false);
        if (body.is_discarded()) return std::nullopt;
        return std::make_pair(res->first, std::move(body));
    }

    int fail_transport() {
        emit("transport", "ERROR", {}, "transport error");
        last_error_ = kAuditTransportError;
        return last_error_;
    }

    // Fetch + signature check + equivocation check + append to local history.
    std::optional<SignedTreeHead> fetch_and_check_sth() {
        auto jwks_res = get_json("/.well-known/jwks.json");
        auto sth_res = get_json("/v1/sth");
        if (!jwks_res || jwks_res->first != 200 || !sth_res || sth_res->first != 200) {
            fail_transport();
            return std::nullopt;
        }
        SignedTreeHead sth;
        try {
            sth = SignedTreeHead::from_json(sth_res->second);
        } catch (const std::exception&) {
            emit("sth", "MALFORMED", {}, "bad STH document");
            last_error_ = kAuditVerificationFailure;
            return std::nullopt;
        }
        auto key = jwks_find_key(jwks_res->second, sth.key_id);
        if (!key || !verify_sth_signature(sth, *key)) {
            emit("sth", "BAD SIGNATURE", {{"tree_size", sth.tree_size}}, "bad STH signature");
            last_error_ = kAuditVerificationFailure;
            return std::nullopt;
        }
        for (const auto& stored : history_) {
            if (stored.tree_size == sth.tree_size && stored.root_hash != sth.root_hash) {
                emit("sth", "EQUIVOCATION", {{"tree_size", sth.tree_size}},
                     "ALERT: equivocation at tree_size " + std::to_string(sth.tree_size));
                last_error_ = kAuditVerificationFailure;
                return std::nullopt;
            }
        }
        history_.push_back(sth);
        history_file_.append(canonical_encode(sth.to_json()));
        return sth;
    }

    void emit(const std::string& cmd, const std::string& verdict, Json detail,
              const std::string& line) {
        if (opts_.json_output) {
            detail["command"] = cmd;
            detail["verdict"] = verdict;
            out_ << detail.dump() << "\n";
        } else {
            out_ << line << "\n";
        }
    }

    Fetch fetch_;
    Options opts_;
    std::ostream& out_;
    std::vector<SignedTreeHead> history_;
    RecordFile history_file_;
    int last_error_ = kAuditVerificationFailure;
};

} // namespace aegon
