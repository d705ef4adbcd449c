#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>
#include <thread>
#include <vector>

#include "aegon/broker.hpp"
#include "aegon/broker_http.hpp"
#include "aegon/device.hpp"
#include "aegon/edge.hpp"

namespace aegon {

struct BenchCell {
    std::string operation;
    std::size_t samples = 0;
    double p50_ms = 0;
    double p95_ms = 0;
    double p99_ms = 0;
    double target_p95_ms = 0; // 0 -> informational only
    double achieved_rate_per_s = 0;
    bool pass = true;

    Json to_json() const {
        return Json{{"operation", operation}, {"samples", samples},
                    {"p50_ms", p50_ms},       {"p95_ms", p95_ms},
                    {"p99_ms", p99_ms},       {"target_p95_ms", target_p95_ms},
                    {"achieved_rate_per_s", achieved_rate_per_s},
                    {"pass", pass}};
    }
};

struct BenchReport {
    std::vector<BenchCell> cells;
    bool all_passed = true;

    void add(BenchCell cell) {
        if (!cell.pass) all_passed = false;
        cells.push_back(std::move(cell));
    }

    Json to_json() const {
        Json arr = Json::array();
        for (const auto& c : cells) arr.push_back(c.to_json());
        return Json{{"cells", arr}, {"all_passed", all_passed}};
    }
};

inline double percentile_ms(std::vector<double>& samples, double p) {
    if (samples.empty()) return 0;
    std::sort(samples.begin(), samples.end());
    std::size_t idx = static_cast<std::size_t>(
        std::ceil(p * static_cast<double>(samples.size()))) - 1;
    idx = std::min(idx, samples.size() - 1);
    return samples[idx];
}

inline BenchCell make_cell(std::string op, std::vector<double> samples_ms,
                           double target_p95_ms, double achieved_rate = 0) {
    BenchCell cell;
    cell.operation = std::move(op);
    cell.samples = samples_ms.size();
    cell.p50_ms = percentile_ms(samples_ms, 0.50);
    cell.p95_ms = percentile_ms(samples_ms, 0.95);
    cell.p99_ms = percentile_ms(samples_ms, 0.99);
    cell.target_p95_ms = target_p95_ms;
    cell.achieved_rate_per_s = achieved_rate;
    cell.pass = target_p95_ms <= 0 || cell.p95_ms < target_p95_ms;
    return cell;
}

namespace bench_detail {

using Clk = std::chrono::steady_clock;

inline double ms_since(Clk::time_point start) {
    return std::chrono::duration<double, std::milli>(Clk::now() - start).count();
}

} // namespace bench_detail

// Protocol-cost benchmark: broker in-process, issuance over loopback HTTP.
// `quick` trims sample counts and the issuance soak for fast iteration; the
// acceptance gate runs the full profile.
inline BenchReport run_bench(bool quick = false) {
    using bench_detail::Clk;
    using bench_detail::ms_since;

    BenchReport report;
    auto clock = std::make_shared<SystemClock>();
    EcKey trust_root = EcKey::generate();
    BrokerCore::Config cfg;
    cfg.trust_root_jwks = {trust_root.public_jwk()};
    cfg.spot_check_rate = 0.0;
    BrokerCore broker(cfg, clock, BrokerKeySet::generate());
    EcKey platform_key = EcKey::generate();
    broker.register_platform("platform_bench", platform_key.public_jwk());

    Json license_req{{"platform_id", "platform_bench"},
                     {"publisher_domain", "publisher.com"},
                     {"resource_url", "https://publisher.com/bench"},
                     {"scope", "full_article_html"},
                     {"license_type", "session"}};

    // --- token validation, warm JWKS (target P95 < 10 ms) ---
    {
        std::string token = broker.post_license(license_req).body["token"];
        Json jwks = broker.keys().jwks();
        std::int64_t now = clock->now_s();
        std::size_t n = quick ? 1000 : 5000;
        for (std::size_t i = 0; i < 100; i++) { // warmup
            validate_token(token, jwks, "publisher.com", now);
        }
        std::vector<double> samples;
        samples.reserve(n);
        for (std::size_t i = 0; i < n; i++) {
            auto t0 = Clk::now();
            auto v = validate_token(token, jwks, "publisher.com", now);
            samples.push_back(ms_since(t0));
            if (!std::holds_alternative<LicenseClaims>(v)) throw std::logic_error("bench");
        }
        report.add(make_cell("token_validation_warm_jwks", std::move(samples), 10.0));
    }

    // --- issuance over loopback HTTP at 100 req/s (target P95 < 50 ms) ---
    {
        BrokerHttpServer http(broker);
        http.start();
        httplib::Client client(http.base_url());
        client.set_keep_alive(true);
        client.set_tcp_nodelay(true);
        std::string body = license_req.dump();
        int seconds = quick ? 3 : 30;
        int total = 100 * seconds;
        std::vector<double> samples;
        samples.reserve(static_cast<std::size_t>(total));
        auto start = Clk::now();
        for (int i = 0; i < total; i++) {
            // Paced open-loop at 100 req/s.
            auto due = start + std::chrono::milliseconds(i * 10);
            std::this_thread::sleep_until(due);
            auto t0 = Clk::now();
            auto res = client.Post("/v1/licenses", body, "application/json");
            samples.push_back(ms_since(t0));
            if (!res || res->status != 200) throw std::runtime_error("issuance failed");
        }
        double elapsed_s = ms_since(start) / 1000.0;
        report.add(make_cell("token_issuance_http_100rps", std::move(samples), 50.0,
                             total / elapsed_s));
        http.stop();
    }

    // --- provenance event recording (target < 5 ms per event) ---
    {
        std::string txn = broker.post_license(license_req).body["txn_id"];
        std::size_t n = quick ? 1000 : 3000;
        std::vector<double> samples;
        samples.reserve(n);
        for (std::size_t i = 0; i < n; i++) {
            ProvenanceEventBody ev;
            ev.txn_id = txn;
            ev.event_type = ProvenanceStage::content_chunked;
            ev.content_fingerprint = sha256_hex("chunk " + std::to_string(i));
            ev.client_timestamp = clock->now_s();
            std::string jws = sign_provenance_event(ev, platform_key, "platform_bench");
            auto t0 = Clk::now();
            auto r = broker.post_provenance(Json{{"event_jws", jws}});
            samples.push_back(ms_since(t0));
            if (r.status != 200) throw std::runtime_error("provenance failed");
        }
        report.add(make_cell("provenance_record", std::move(samples), 5.0));
    }

    // --- receipt signing on the simulated device (informational) + size ---
    {
        std::string challenge = hex_encode(random_bytes(32));
        SimDevice dev = SimDevice::provision(challenge, trust_root, clock);
        dev.set_device_id("dev_bench");
        std::size_t n = quick ? 1000 : 2000;
        std::vector<double> samples;
        samples.reserve(n);
        std::size_t max_size = 0;
        for (std::size_t i = 0; i < n; i++) {
            SimDevice::ReceiptParams p;
            p.txn_id = "txn_bench";
            p.content_sha256_hex = sha256_hex("content");
            p.publisher_domain = "publisher.com";
            auto t0 = Clk::now();
            std::string jws = dev.make_receipt(p);
            samples.push_back(ms_since(t0));
            max_size = std::max(max_size, jws.size());
        }
        BenchCell cell = make_cell("device_receipt_sign", std::move(samples), 0);
        cell.pass = max_size < 4096; // the Table-5 size bound rides on this cell
        report.add(cell);

        BenchCell size_cell;
        size_cell.operation = "receipt_jws_max_bytes";
        size_cell.samples = n;
        size_cell.p50_ms = size_cell.p95_ms = size_cell.p99_ms =
            static_cast<double>(max_size);
        size_cell.target_p95_ms = 4096;
        size_cell.pass = max_size < 4096;
        report.add(size_cell);
    }

    // --- attestation chain verification (target P95 < 20 ms) ---
    {
        std::string challenge = hex_encode(random_bytes(32));
        EcKey device_key = EcKey::generate();
        Json chain = build_attestation_chain(device_key, trust_root, challenge,
                                             SecurityLevel::STRONGBOX, BootState::VERIFIED,
                                             clock->now_s());
        std::vector<Json> roots{trust_root.public_jwk()};
        std::size_t n = quick ? 1000 : 2000;
        std::vector<double> samples;
        samples.reserve(n);
        for (std::size_t i = 0; i < n; i++) {
            auto t0 = Clk::now();
            auto v = verify_chain(chain, roots, challenge, clock->now_s());
            samples.push_back(ms_since(t0));
            if (!std::holds_alternative<ChainAccept>(v)) throw std::logic_error("bench");
        }
        report.add(make_cell("attestation_chain_verify", std::move(samples), 20.0));
    }

    // --- ledger append throughput (informational) ---
    {
        Ledger ledger;
        std::size_t n = quick ? 2000 : 10000;
        std::vector<double> samples;
        samples.reserve(n);
        auto start = Clk::now();
        for (std::size_t i = 0; i < n; i++) {
            auto t0 = Clk::now();
            ledger.append("txn_bench_" + std::to_string(i), EntryType::license_issued,
                          canonical_encode(Json{{"i", i}}), clock->now_s());
            samples.push_back(ms_since(t0));
        }
        double elapsed_s = ms_since(start) / 1000.0;
        report.add(make_cell("ledger_append_memory", std::move(samples), 0,
                             static_cast<double>(n) / elapsed_s));
    }

    return report;
}

} // namespace aegon
