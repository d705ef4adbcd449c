#pragma once

#include <atomic>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "aegon/bloom.hpp"
#include "aegon/clock.hpp"
#include "aegon/token.hpp"
#include "aegon/url.hpp"

namespace aegon {

// Replay protection for single_use tokens: a Bloom filter screens, an exact
// jti -> exp map confirms, so a filter false positive can never deny a
// legitimate token.
class JtiRegistry {
public:
    explicit JtiRegistry(std::size_t capacity = 100000, double target_fpr = 1e-4,
                         std::int64_t horizon_s = 300, std::int64_t skew_margin_s = 60)
        : bloom_(capacity, target_fpr), horizon_s_(horizon_s), skew_margin_s_(skew_margin_s) {}

    // Atomically records the jti unless it is already live. Returns true when
    // this caller won (first use), false on replay.
    bool check_and_insert(const std::string& jti, std::int64_t exp, std::int64_t now_s) {
        std::lock_guard lock(mu_);
        evict(now_s);
        if (bloom_.maybe_contains(jti)) {
            auto it = exact_.find(jti);
            if (it != exact_.end()) return false; // confirmed replay
        }
        bloom_.add(jti);
        exact_[jti] = exp;
        return true;
    }

    std::size_t live_count() const {
        std::lock_guard lock(mu_);
        return exact_.size();
    }

private:
    void evict(std::int64_t now_s) {
        if (now_s < next_evict_s_) return;
        next_evict_s_ = now_s + 30;
        for (auto it = exact_.begin(); it != exact_.end();) {
            if (it->second + skew_margin_s_ < now_s) {
                it = exact_.erase(it);
            } else {
                ++it;
            }
        }
        // Bloom bits are only reclaimable wholesale; reset when nothing live.
        if (exact_.empty()) bloom_.clear();
    }

    mutable std::mutex mu_;
    BloomFilter bloom_;
    std::unordered_map<std::string, std::int64_t> exact_;
    std::int64_t horizon_s_;
    std::int64_t skew_margin_s_;
    std::int64_t next_evict_s_ = 0;
};

struct GateDecision {
    bool allowed = false;
    std::string deny_reason; // empty when allowed
    std::optional<LicenseClaims> claims;
    std::string txn_id; // echoed as Aegon-Txn-Id on allow, empty on deny
};

// Publisher-side request gate. Token validation runs entirely against the
// cached JWKS; the broker is only contacted to refresh the cache or to report
// content hashes.
class EdgeValidator {
public:
    using JwksFetcher = std::function<std::optional<Json>()>;
    using HashReporter = std::function<std::optional<Json>(const Json& body)>;

    struct Config {
        std::string publisher_domain;
        std::int64_t jwks_ttl_s = 300;
        std::int64_t jwks_stale_cap_s = 24 * 3600;
        std::size_t jti_capacity = 100000;
        double jti_fpr = 1e-4;
    };

    EdgeValidator(Config cfg, ClockPtr clock, JwksFetcher fetch_jwks, HashReporter report_hash)
        : cfg_(std::move(cfg)),
          clock_(std::move(clock)),
          fetch_jwks_(std::move(fetch_jwks)),
          report_hash_(std::move(report_hash)),
          jti_registry_(cfg_.jti_capacity, cfg_.jti_fpr) {}

    GateDecision gate_request(const std::string& authorization_header,
                              const std::string& requested_url) {
        std::int64_t now = clock_->now_s();
        static const std::string kPrefix = "Bearer ";
        if (authorization_header.rfind(kPrefix, 0) != 0) return deny("missing_token");
        std::string token = authorization_header.substr(kPrefix.size());

        std::optional<Json> jwks = cached_jwks(now);
        if (!jwks) return deny("jwks_unavailable");

        TokenValidation v = validate_token(token, *jwks, cfg_.publisher_domain, now);
        if (auto* reject = std::get_if<TokenReject>(&v)) return deny(to_string(*reject));
        LicenseClaims claims = std::get<LicenseClaims>(v);

        if (!urls_equivalent(claims.aegon_resource_url, requested_url)) {
            return deny("resource_mismatch");
        }
        if (claims.aegon_license_type == LicenseType::single_use &&
            !jti_registry_.check_and_insert(claims.jti, claims.exp, now)) {
            return deny("replayed");
        }
        GateDecision d;
        d.allowed = true;
        d.txn_id = claims.jti;
        d.claims = std::move(claims);
        return d;
    }

    // Reports the hash of content as served; retried by the caller's schedule
    // on transport failure (broker side is idempotent on (txn_id, hash)).
    std::optional<Json> report_content_hash(const std::string& txn_id,
                                            std::string_view content) {
        Json body{{"txn_id", txn_id},
                  {"content_sha256", sha256_hex(content)},
                  {"publisher_domain", cfg_.publisher_domain},
                  {"observed_at", clock_->now_s()}};
        return report_hash_(body);
    }

    // Forces the next gate call to refresh regardless of age (tests).
    void invalidate_jwks() {
        std::lock_guard lock(mu_);
        fetched_at_s_ = -1;
    }

    std::uint64_t upstream_fetch_count() const { return fetch_count_.load(); }

private:
    GateDecision deny(std::string reason) {
        GateDecision d;
        d.deny_reason = std::move(reason);
        return d;
    }

    // Single-flight: the lock is held across the refresh, so concurrent gate
    // calls in one ttl window produce at most one upstream fetch.
    std::optional<Json> cached_jwks(std::int64_t now_s) {
        std::lock_guard lock(mu_);
        bool have = fetched_at_s_ >= 0;
        bool fresh = have && now_s - fetched_at_s_ < cfg_.jwks_ttl_s;
        if (fresh) return jwks_;
        fetch_count_++;
        std::optional<Json> doc;
        try {
            doc = fetch_jwks_();
        } catch (const std::exception&) {
            doc = std::nullopt;
        }
        if (doc) {
            jwks_ = *doc;
            fetched_at_s_ = now_s;
            return jwks_;
        }
        // Stale-if-error up to the hard cap.
        if (have && now_s - fetched_at_s_ <= cfg_.jwks_stale_cap_s) return jwks_;
        return std::nullopt;
    }

    Config cfg_;
    ClockPtr clock_;
    JwksFetcher fetch_jwks_;
    HashReporter report_hash_;
    JtiRegistry jti_registry_;

    std::mutex mu_;
    Json jwks_;
    std::int64_t fetched_at_s_ = -1;
    std::atomic<std::uint64_t> fetch_count_{0};
};

} // namespace aegon
