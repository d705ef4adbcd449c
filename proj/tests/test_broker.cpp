#include <doctest.h>

#include <filesystem>

#include "aegon/broker.hpp"
#include "aegon/broker_http.hpp"
#include "aegon/device.hpp"

using namespace aegon;

namespace {

struct BrokerFixture {
    std::shared_ptr<ManualClock> clock = std::make_shared<ManualClock>();
    EcKey trust_root = EcKey::generate();
    EcKey platform_key = EcKey::generate();
    BrokerCore broker;

    BrokerFixture(BrokerCore::Config cfg = {})
        : broker(patch(std::move(cfg)), clock, BrokerKeySet::generate()) {
        clock->set_ms(1'750'000'000'000);
        broker.register_platform("platform_a", platform_key.public_jwk());
    }

    BrokerCore::Config patch(BrokerCore::Config cfg) {
        if (cfg.trust_root_jwks.empty()) cfg.trust_root_jwks = {trust_root.public_jwk()};
        return cfg;
    }

    Json license_body(const std::string& url = "https://publisher.com/a",
                      const std::string& type = "single_use") {
        return Json{{"platform_id", "platform_a"},
                    {"publisher_domain", "publisher.com"},
                    {"resource_url", url},
                    {"scope", "full_article_html"},
                    {"license_type", type}};
    }

    std::string issue_and_report(const std::string& content) {
        auto lic = broker.post_license(license_body());
        REQUIRE(lic.status == 200);
        std::string txn = lic.body["txn_id"];
        auto rep = broker.post_content_hash(Json{{"txn_id", txn},
                                                 {"content_sha256", sha256_hex(content)},
                                                 {"publisher_domain", "publisher.com"}});
        REQUIRE(rep.status == 200);
        return txn;
    }
};

} // namespace

TEST_CASE("license issuance over the API commits to the ledger first") {
    BrokerFixture fx;
    auto r = fx.broker.post_license(fx.license_body());
    REQUIRE(r.status == 200);
    std::string txn = r.body["txn_id"];
    CHECK(fx.broker.ledger().has_txn(txn));
    auto v = validate_token(r.body["token"], fx.broker.keys().jwks(), "publisher.com",
                            fx.clock->now_s());
    CHECK(std::holds_alternative<LicenseClaims>(v));
}

TEST_CASE("license request validation errors") {
    BrokerFixture fx;
    CHECK(fx.broker.post_license(Json{{"platform_id", "p"}}).status == 400);
    Json bad = fx.license_body();
    bad["scope"] = "everything";
    CHECK(fx.broker.post_license(bad).status == 400);
}

TEST_CASE("content hash intake: unknown txn, idempotent duplicate, conflicting re-report") {
    BrokerFixture fx;
    auto miss = fx.broker.post_content_hash(Json{{"txn_id", "txn_none"},
                                                 {"content_sha256", sha256_hex("x")},
                                                 {"publisher_domain", "publisher.com"}});
    CHECK(miss.status == 404);

    std::string txn = fx.issue_and_report("bytes");
    auto dup = fx.broker.post_content_hash(Json{{"txn_id", txn},
                                                {"content_sha256", sha256_hex("bytes")},
                                                {"publisher_domain", "publisher.com"}});
    CHECK(dup.status == 200);
    CHECK(dup.body["status"] == "duplicate");

    auto conflict = fx.broker.post_content_hash(Json{{"txn_id", txn},
                                                     {"content_sha256", sha256_hex("other")},
                                                     {"publisher_domain", "publisher.com"}});
    CHECK(conflict.status == 409);
    CHECK(conflict.body["error_code"] == "hash_conflict");
}

TEST_CASE("provenance endpoint maps rejections to HTTP statuses") {
    BrokerFixture fx;
    auto lic = fx.broker.post_license(fx.license_body());
    std::string txn = lic.body["txn_id"];

    ProvenanceEventBody body;
    body.txn_id = txn;
    body.event_type = ProvenanceStage::content_fetched;
    body.content_fingerprint = sha256_hex("bytes");
    body.client_timestamp = fx.clock->now_s();

    auto ok = fx.broker.post_provenance(
        Json{{"event_jws", sign_provenance_event(body, fx.platform_key, "platform_a")}});
    CHECK(ok.status == 200);

    body.txn_id = "txn_none";
    auto missing = fx.broker.post_provenance(
        Json{{"event_jws", sign_provenance_event(body, fx.platform_key, "platform_a")}});
    CHECK(missing.status == 404);

    body.txn_id = txn;
    EcKey rogue = EcKey::generate();
    auto forged = fx.broker.post_provenance(
        Json{{"event_jws", sign_provenance_event(body, rogue, "platform_a")}});
    CHECK(forged.status == 403);

    auto status = fx.broker.get_chain_status(txn);
    CHECK(status.body["events_present"]["content_fetched"] == 1);
}

TEST_CASE("device lifecycle and batch receipts through the core API") {
    BrokerFixture fx;
    std::string challenge = fx.broker.get_device_challenge().body["challenge"];
    SimDevice dev = SimDevice::provision(challenge, fx.trust_root, fx.clock);
    auto reg = fx.broker.post_device_register(
        Json{{"chain", dev.attestation_chain()}, {"challenge", challenge}});
    REQUIRE(reg.status == 200);
    dev.set_device_id(reg.body["device_id"]);

    std::string content = "app content";
    std::string txn = fx.issue_and_report(content);
    SimDevice::ReceiptParams p;
    p.txn_id = txn;
    p.content_sha256_hex = sha256_hex(content);
    p.publisher_domain = "publisher.com";
    std::string receipt = dev.make_receipt(p);

    auto res = fx.broker.post_receipts(Json::array({receipt}));
    REQUIRE(res.status == 200);
    CHECK(res.body["results"][0]["status"] == "accepted");

    // Resubmission of the same batch: per-receipt duplicate, not an error.
    auto again = fx.broker.post_receipts(Json::array({receipt}));
    CHECK(again.body["results"][0]["reason"] == "duplicate_receipt");

    // Revocation closes the door.
    CHECK(fx.broker.post_device_revoke(Json{{"device_id", dev.device_id()}}).status == 200);
    std::string receipt2 = dev.make_receipt(p);
    auto after = fx.broker.post_receipts(Json::array({receipt2}));
    CHECK(after.body["results"][0]["reason"] == "revoked_device");

    Json too_many = Json::array();
    for (int i = 0; i < 101; i++) too_many.push_back(receipt);
    CHECK(fx.broker.post_receipts(too_many).status == 400);
}

TEST_CASE("transparency endpoints: sth, proof, entry, consistency") {
    BrokerFixture fx;
    std::string txn1 = fx.issue_and_report("a");
    auto sth1 = fx.broker.get_sth();
    REQUIRE(sth1.status == 200);
    SignedTreeHead h1 = SignedTreeHead::from_json(sth1.body);
    CHECK(h1.tree_size == 2);
    BrokerKey sth_key = fx.broker.keys().active(KeyPurpose::sth_signing);
    CHECK(verify_sth_signature(h1, sth_key.key));

    std::string txn2 = fx.issue_and_report("b");
    auto sth2 = fx.broker.get_sth();
    SignedTreeHead h2 = SignedTreeHead::from_json(sth2.body);
    CHECK(h2.tree_size == 4);

    auto entry = fx.broker.get_entry(txn1);
    REQUIRE(entry.status == 200);
    auto proof = fx.broker.get_proof(txn1, h2.tree_size);
    REQUIRE(proof.status == 200);
    InclusionProof p;
    p.leaf_index = proof.body["leaf_index"];
    p.tree_size = proof.body["tree_size"];
    for (const auto& h : proof.body["audit_path"]) {
        p.audit_path.push_back(digest_from_hex(h.get<std::string>()));
    }
    Digest leaf = leaf_hash(entry.body["leaf_bytes"].get<std::string>());
    CHECK(verify_inclusion(p, leaf, h2.root_hash, h2.tree_size));

    auto cons = fx.broker.get_consistency(h1.tree_size, h2.tree_size);
    REQUIRE(cons.status == 200);
    ConsistencyProof cp;
    cp.old_size = cons.body["old_size"];
    cp.new_size = cons.body["new_size"];
    for (const auto& h : cons.body["path"]) {
        cp.path.push_back(digest_from_hex(h.get<std::string>()));
    }
    CHECK(verify_consistency(cp, h1.root_hash,
                             h2.root_hash));

    CHECK(fx.broker.get_proof("txn_none", std::nullopt).status == 404);
    CHECK(fx.broker.get_entry("txn_none").status == 404);
    CHECK(fx.broker.get_consistency(5, 2).status == 416);

    auto hist = fx.broker.get_sth_history();
    CHECK(hist.body["sths"].size() >= 2);
}

TEST_CASE("spot-check sampling is deterministic and close to the configured rate") {
    int selected = 0;
    for (int i = 0; i < 20000; i++) {
        std::string txn = "txn_" + std::to_string(i);
        bool s = spot_check_select(txn, "salt", 0.05);
        CHECK(s == spot_check_select(txn, "salt", 0.05)); // deterministic
        if (s) selected++;
    }
    double rate = selected / 20000.0;
    CHECK(rate > 0.04);
    CHECK(rate < 0.06);
    CHECK_FALSE(spot_check_select("txn_x", "salt", 0.0));
    CHECK(spot_check_select("txn_x", "salt", 1.0));
}

TEST_CASE("spot-check verdicts and publisher escalation after repeated mismatches") {
    BrokerCore::Config cfg;
    cfg.spot_check_rate = 1.0; // force selection
    cfg.escalation_threshold = 3;
    BrokerFixture fx(cfg);

    std::string real = "genuine bytes";
    fx.broker.set_content_fetcher(
        [&](const std::string&) -> std::optional<std::string> { return real; });

    SUBCASE("verified when broker and publisher agree") {
        std::string txn = fx.issue_and_report(real);
        auto checks = fx.broker.get_spot_checks().body["spot_checks"];
        REQUIRE(checks.size() == 1);
        CHECK(checks[0]["verdict"] == "verified");
        CHECK(checks[0]["txn_id"] == txn);
    }
    SUBCASE("mismatch escalates after the threshold") {
        for (int i = 0; i < 3; i++) fx.issue_and_report("tampered " + std::to_string(i));
        auto health = fx.broker.get_publisher_health().body["publishers"];
        REQUIRE(health.size() == 1);
        CHECK(health[0]["consecutive_mismatches"] == 3);
        CHECK(health[0]["escalated"] == true);
    }
    SUBCASE("platform fetch hash participates in the comparison") {
        auto lic = fx.broker.post_license(fx.license_body());
        std::string txn = lic.body["txn_id"];
        ProvenanceEventBody body;
        body.txn_id = txn;
        body.event_type = ProvenanceStage::content_fetched;
        body.content_fingerprint = sha256_hex("platform saw different bytes");
        body.client_timestamp = fx.clock->now_s();
        fx.broker.post_provenance(
            Json{{"event_jws", sign_provenance_event(body, fx.platform_key, "platform_a")}});
        fx.broker.post_content_hash(Json{{"txn_id", txn},
                                         {"content_sha256", sha256_hex(real)},
                                         {"publisher_domain", "publisher.com"}});
        auto checks = fx.broker.get_spot_checks().body["spot_checks"];
        REQUIRE(checks.size() == 1);
        CHECK(checks[0]["verdict"] == "mismatch");
    }
}

TEST_CASE("file-backed broker recovers publisher hashes and ledger after restart") {
    auto dir = std::filesystem::temp_directory_path() / "aegon-broker-test";
    std::filesystem::remove_all(dir);
    auto clock = std::make_shared<ManualClock>();
    clock->set_ms(1'750'000'000'000);
    EcKey root = EcKey::generate();

    std::string txn;
    std::string root_hex;
    {
        BrokerCore::Config cfg;
        cfg.data_dir = dir;
        cfg.trust_root_jwks = {root.public_jwk()};
        BrokerCore broker(cfg, clock, BrokerKeySet::generate());
        auto lic = broker.post_license(Json{{"platform_id", "p"},
                                            {"publisher_domain", "publisher.com"},
                                            {"resource_url", "https://publisher.com/a"},
                                            {"scope", "excerpt"},
                                            {"license_type", "session"}});
        txn = lic.body["txn_id"];
        broker.post_content_hash(Json{{"txn_id", txn},
                                      {"content_sha256", sha256_hex("bytes")},
                                      {"publisher_domain", "publisher.com"}});
        root_hex = hex(broker.ledger().root(broker.ledger().size()));
    }
    {
        BrokerCore::Config cfg;
        cfg.data_dir = dir;
        cfg.trust_root_jwks = {root.public_jwk()};
        BrokerCore broker(cfg, clock, BrokerKeySet::generate());
        CHECK(broker.ledger().size() == 2);
        CHECK(hex(broker.ledger().root(2)) == root_hex);
        // Duplicate-hash idempotency proves the publisher_hashes_ rebuild.
        auto dup = broker.post_content_hash(Json{{"txn_id", txn},
                                                 {"content_sha256", sha256_hex("bytes")},
                                                 {"publisher_domain", "publisher.com"}});
        CHECK(dup.body["status"] == "duplicate");
        auto conflict = broker.post_content_hash(Json{{"txn_id", txn},
                                                      {"content_sha256", sha256_hex("zzz")},
                                                      {"publisher_domain", "publisher.com"}});
        CHECK(conflict.status == 409);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("http round-trip: full flow over loopback") {
    BrokerFixture fx;
    BrokerHttpServer server(fx.broker);
    int port = server.start();
    httplib::Client client("127.0.0.1", port);

    auto lic = client.Post("/v1/licenses", fx.license_body().dump(), "application/json");
    REQUIRE(lic);
    REQUIRE(lic->status == 200);
    Json lic_body = Json::parse(lic->body);
    std::string txn = lic_body["txn_id"];

    auto jwks = client.Get("/.well-known/jwks.json");
    REQUIRE(jwks);
    auto v = validate_token(lic_body["token"], Json::parse(jwks->body), "publisher.com",
                            fx.clock->now_s());
    CHECK(std::holds_alternative<LicenseClaims>(v));

    auto rep = client.Post("/v1/content-hash",
                           Json{{"txn_id", txn},
                                {"content_sha256", sha256_hex("served")},
                                {"publisher_domain", "publisher.com"}}
                               .dump(),
                           "application/json");
    REQUIRE(rep);
    CHECK(rep->status == 200);

    auto sth = client.Get("/v1/sth");
    REQUIRE(sth);
    SignedTreeHead h = SignedTreeHead::from_json(Json::parse(sth->body));
    CHECK(h.tree_size == 2);

    auto proof = client.Get("/v1/proof?txn_id=" + txn +
                            "&tree_size=" + std::to_string(h.tree_size));
    REQUIRE(proof);
    CHECK(proof->status == 200);

    auto bad = client.Post("/v1/licenses", "not json", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);

    auto missing = client.Get("/v1/entries/txn_none");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    server.stop();
}
