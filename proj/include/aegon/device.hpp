#pragma once

#include <algorithm>
#include <deque>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "aegon/aead.hpp"
#include "aegon/attestation.hpp"
#include "aegon/clock.hpp"
#include "aegon/storage.hpp"

namespace aegon {

// Base delay (seconds) before retry attempt n (1-based): 1, 2, 4, ... capped
// at 60. Jitter is applied on top, multiplicative uniform [1.0, 1.5).
inline std::int64_t backoff_base_delay_s(int attempt) {
    if (attempt <= 0) return 0;
    if (attempt > 6) return 60;
    return std::int64_t{1} << (attempt - 1);
}

// FIFO receipt queue persisted to an encrypted-at-rest record file. Entries
// leave only on broker acknowledgment (accept or terminal reject); both the
// enqueue and the ack are journaled so a restart loses nothing.
class OfflineQueue {
public:
    OfflineQueue() = default;

    OfflineQueue(const std::filesystem::path& path, Bytes storage_key)
        : key_(std::move(storage_key)) {
        for (const Bytes& rec : RecordFile::read_all(path)) {
            auto plain = aead_decrypt(key_, rec);
            if (!plain) continue; // wrong key or corrupt tail
            Json op = Json::parse(to_string(*plain), nullptr, false);
            if (op.is_discarded()) continue;
            if (op.value("op", "") == "enqueue") {
                pending_.push_back(op.at("receipt_jws").get<std::string>());
            } else if (op.value("op", "") == "ack") {
                std::string id = op.at("receipt_id").get<std::string>();
                std::erase_if(pending_, [&](const std::string& jws) {
                    return receipt_id_of(jws) == id;
                });
            }
        }
        file_ = RecordFile(path);
    }

    void enqueue(const std::string& receipt_jws) {
        pending_.push_back(receipt_jws);
        journal(Json{{"op", "enqueue"}, {"receipt_jws", receipt_jws}});
    }

    void acknowledge(const std::string& receipt_id) {
        std::erase_if(pending_, [&](const std::string& jws) {
            return receipt_id_of(jws) == receipt_id;
        });
        journal(Json{{"op", "ack"}, {"receipt_id", receipt_id}});
    }

    std::vector<std::string> peek_batch(std::size_t max = 100) const {
        std::size_t n = std::min(max, pending_.size());
        return {pending_.begin(), pending_.begin() + static_cast<long>(n)};
    }

    std::size_t size() const { return pending_.size(); }
    bool empty() const { return pending_.empty(); }

    static std::string receipt_id_of(const std::string& receipt_jws) {
        auto parts = jws_decode(receipt_jws);
        return parts ? parts->payload.value("receipt_id", "") : "";
    }

private:
    void journal(const Json& op) {
        if (!file_.is_open()) return;
        file_.append(aead_encrypt(key_, to_bytes(canonical_encode(op))));
    }

    Bytes key_;
    std::deque<std::string> pending_;
    RecordFile file_;
};

struct BatchOutcome {
    std::string receipt_id;
    std::string status; // accepted | rejected | pending
    std::string reason;
};

struct FlushReport {
    std::vector<std::size_t> batch_sizes;
    std::vector<std::int64_t> base_delays_s;     // backoff schedule actually used
    std::vector<std::int64_t> jittered_delays_ms;
    std::vector<BatchOutcome> outcomes;
    int transport_failures = 0;
    bool drained = false;
};

// Simulated mobile agent. The private key and scope secret stay inside the
// object; only signatures and derived identifiers cross its boundary.
class SimDevice {
public:
    struct Options {
        SecurityLevel security_level = SecurityLevel::STRONGBOX;
        BootState boot_state = BootState::VERIFIED;
        std::uint64_t rng_seed = 1;
        std::filesystem::path queue_path; // empty -> in-memory queue
    };

    // Generates a fresh key pair and a synthetic attestation chain embedding
    // the challenge. Adversarial variants come from the options (UNVERIFIED
    // boot, SOFTWARE level) or from passing a non-trusted root key.
    static SimDevice provision(const std::string& challenge_hex, const EcKey& root_key,
                               ClockPtr clock) {
        return provision(challenge_hex, root_key, std::move(clock), Options());
    }

    static SimDevice provision(const std::string& challenge_hex, const EcKey& root_key,
                               ClockPtr clock, Options opts) {
        SimDevice d(std::move(clock), opts);
        d.chain_ = build_attestation_chain(d.key_.public_only(), root_key, challenge_hex,
                                           opts.security_level, opts.boot_state,
                                           d.clock_->now_s());
        return d;
    }

    const Json& attestation_chain() const { return chain_; }
    SecurityLevel security_level() const { return opts_.security_level; }

    void set_device_id(std::string id) { device_id_ = std::move(id); }
    const std::string& device_id() const { return device_id_; }

    // "ps_" + first 24 hex chars of HMAC-SHA-256(scope_secret, lowercased domain).
    std::string publisher_scope_id(const std::string& publisher_domain) const {
        std::string domain = publisher_domain;
        std::transform(domain.begin(), domain.end(), domain.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        Digest mac = hmac_sha256(scope_secret_, domain);
        return "ps_" + hex(mac).substr(0, 24);
    }

    struct ReceiptParams {
        std::string txn_id;
        std::string content_sha256_hex;
        std::string publisher_domain;
        std::string license_type = "single_use";
        bool training_allowed = false;
        std::string storage_policy = "ephemeral";
    };

    std::string make_receipt(const ReceiptParams& p) {
        Json payload{
            {"receipt_id", "rcpt_" + base32_lower_encode(random_bytes(16))},
            {"txn_id", p.txn_id},
            {"publisher_scope_id", publisher_scope_id(p.publisher_domain)},
            {"timestamp", iso8601_utc(clock_->now_s())},
            {"event_type", "content_consumed"},
            {"content_hash", "sha256:" + p.content_sha256_hex},
            {"license_constraints",
             Json{{"license_type", p.license_type},
                  {"training_allowed", p.training_allowed},
                  {"storage_policy", p.storage_policy}}},
            {"device_attestation",
             Json{{"key_id", device_id_},
                  {"strongbox_backed", opts_.security_level == SecurityLevel::STRONGBOX},
                  {"android_version", 14},
                  {"security_patch_level", "2026-02-01"}}}};
        return jws_sign(payload, key_, device_id_, "aegon-receipt+jws");
    }

    void queue_receipt(const std::string& receipt_jws) { queue_.enqueue(receipt_jws); }
    OfflineQueue& queue() { return queue_; }

    // Reopens the persisted queue as a restarted process would.
    void simulate_restart() {
        if (!opts_.queue_path.empty()) queue_ = OfflineQueue(opts_.queue_path, storage_key_);
    }

    using SubmitFn =
        std::function<std::optional<std::vector<Json>>(const std::vector<std::string>& batch)>;
    using ConnectivityFn = std::function<bool(std::int64_t now_ms)>;
    using SleepFn = std::function<void(std::int64_t ms)>;

    // Drains the queue in FIFO batches of <= 100. Transport failures retry on
    // the exponential backoff schedule; retries resubmit the same receipt_id,
    // so broker dedup keeps acceptance exactly-once. Retryable rejections
    // (no_publisher_hash) back off like transport failures.
    FlushReport flush(const SubmitFn& submit, const ConnectivityFn& connectivity,
                      const SleepFn& sleep, int max_attempts = 50) {
        FlushReport report;
        int attempt = 0;
        while (!queue_.empty()) {
            std::int64_t now = clock_->now_ms();
            if (!connectivity(now)) {
                if (++attempt > max_attempts) break;
                wait_backoff(attempt, report, sleep);
                continue;
            }
            std::vector<std::string> batch = queue_.peek_batch(100);
            std::optional<std::vector<Json>> results = submit(batch);
            if (!results) {
                report.transport_failures++;
                if (++attempt > max_attempts) break;
                wait_backoff(attempt, report, sleep);
                continue;
            }
            attempt = 0;
            report.batch_sizes.push_back(batch.size());
            bool progressed = false;
            for (std::size_t i = 0; i < batch.size() && i < results->size(); ++i) {
                const Json& r = (*results)[i];
                std::string id = OfflineQueue::receipt_id_of(batch[i]);
                std::string status = r.value("status", "");
                std::string reason = r.value("reason", "");
                if (status == "accepted" || reason == "duplicate_receipt") {
                    queue_.acknowledge(id);
                    report.outcomes.push_back({id, "accepted", ""});
                    progressed = true;
                } else if (reason == "no_publisher_hash") {
                    report.outcomes.push_back({id, "pending", reason});
                } else {
                    queue_.acknowledge(id); // terminal reject
                    report.outcomes.push_back({id, "rejected", reason});
                    progressed = true;
                }
            }
            if (!progressed) {
                if (++attempt > max_attempts) break;
                wait_backoff(attempt, report, sleep);
            }
        }
        report.drained = queue_.empty();
        return report;
    }

private:
    SimDevice(ClockPtr clock, Options opts)
        : clock_(std::move(clock)),
          opts_(opts),
          key_(EcKey::generate()),
          scope_secret_(random_bytes(32)),
          storage_key_(random_bytes(32)),
          rng_(opts.rng_seed) {
        if (!opts_.queue_path.empty()) queue_ = OfflineQueue(opts_.queue_path, storage_key_);
    }

    void wait_backoff(int attempt, FlushReport& report, const SleepFn& sleep) {
        std::int64_t base = backoff_base_delay_s(attempt);
        std::uniform_real_distribution<double> jitter(0.0, 0.5);
        std::int64_t delay_ms =
            static_cast<std::int64_t>(base * 1000 * (1.0 + jitter(rng_)));
        report.base_delays_s.push_back(base);
        report.jittered_delays_ms.push_back(delay_ms);
        sleep(delay_ms);
    }

    ClockPtr clock_;
    Options opts_;
    EcKey key_;
    Bytes scope_secret_;
    Bytes storage_key_;
    std::mt19937_64 rng_;
    Json chain_;
    std::string device_id_;
    OfflineQueue queue_;
};

} // namespace aegon
