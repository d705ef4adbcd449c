// Broker daemon: serves the full protocol surface over HTTP and publishes
// STHs on a timer or append-count trigger, whichever fires first.
#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <thread>

#include "aegon/broker.hpp"
#include "aegon/broker_http.hpp"

namespace {

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop = true; }

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"aegon-broker: licensing broker with a transparency ledger"};

    std::string host = "127.0.0.1";
    int port = 8080;
    std::string data_dir = "./aegon-data";
    std::string key_store;
    std::string trust_root_path;
    double spot_check_rate = 0.05;
    std::int64_t sth_interval_s = 60;
    std::uint64_t sth_append_threshold = 1000;
    std::int64_t skew_threshold_s = 300;

    app.add_option("--host", host, "Listen address");
    app.add_option("--port", port, "Listen port");
    app.add_option("--data-dir", data_dir, "Ledger and state directory");
    app.add_option("--key-store", key_store,
                   "Key store JSON path (default: <data-dir>/keys.json; created if missing)");
    app.add_option("--trust-roots", trust_root_path,
                   "JWKS file of attestation trust roots (JSON array of JWKs)");
    app.add_option("--spot-check-rate", spot_check_rate, "Spot-check sampling rate [0,1]");
    app.add_option("--sth-interval", sth_interval_s, "Seconds between published STHs");
    app.add_option("--sth-appends", sth_append_threshold,
                   "Publish an STH after this many appends");
    app.add_option("--skew-threshold", skew_threshold_s,
                   "Provenance client-timestamp skew flag threshold, seconds");

    CLI11_PARSE(app, argc, argv);

    aegon::BrokerCore::Config cfg;
    cfg.data_dir = data_dir;
    cfg.spot_check_rate = spot_check_rate;
    cfg.skew_threshold_s = skew_threshold_s;
    if (!trust_root_path.empty()) {
        std::ifstream in(trust_root_path);
        if (!in) {
            std::cerr << "cannot read trust roots: " << trust_root_path << "\n";
            return 1;
        }
        aegon::Json roots = aegon::Json::parse(in);
        for (const auto& jwk : roots.is_array() ? roots : roots.value("keys", aegon::Json::array())) {
            cfg.trust_root_jwks.push_back(jwk);
        }
    }

    std::filesystem::path keys_path =
        key_store.empty() ? std::filesystem::path(data_dir) / "keys.json"
                          : std::filesystem::path(key_store);
    std::filesystem::create_directories(keys_path.parent_path());
    aegon::BrokerKeySet keys;
    if (std::filesystem::exists(keys_path)) {
        keys = aegon::BrokerKeySet::load(keys_path);
        std::cerr << "loaded keys from " << keys_path << "\n";
    } else {
        keys = aegon::BrokerKeySet::generate();
        keys.save(keys_path);
        std::cerr << "generated new keys at " << keys_path << "\n";
    }

    auto clock = std::make_shared<aegon::SystemClock>();
    aegon::BrokerCore broker(cfg, clock, std::move(keys));
    if (broker.ledger().recovered_truncated_tail()) {
        std::cerr << "warning: discarded a torn record at the ledger tail during recovery\n";
    }
    std::cerr << "ledger recovered: " << broker.ledger().size() << " entries\n";

    aegon::BrokerHttpServer server(broker);
    server.start_on(host, port);
    std::cerr << "listening on " << host << ":" << port << "\n";

    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);

    // STH publishing cadence: every sth_interval_s, or sooner once
    // sth_append_threshold entries accumulated since the last STH.
    auto last_sth = std::chrono::steady_clock::now();
    while (!g_stop) {
        std::this_thread::sleep_for(std::chrono::milliseconds(250));
        bool timer_due = std::chrono::steady_clock::now() - last_sth >=
                         std::chrono::seconds(sth_interval_s);
        bool appends_due = broker.ledger().appends_since_last_sth() >= sth_append_threshold;
        if (timer_due || appends_due) {
            auto r = broker.get_sth();
            if (r.status == 200) {
                std::cerr << "published STH tree_size=" << r.body["tree_size"] << "\n";
            }
            last_sth = std::chrono::steady_clock::now();
        }
    }
    std::cerr << "shutting down\n";
    server.stop();
    return 0;
}
