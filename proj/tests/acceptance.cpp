// Acceptance gate: one pass/fail line per criterion, nonzero exit on any
// failure. Thresholds are pinned in code next to each check.
#include <chrono>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>
#include <vector>

#include "aegon/bench.hpp"
#include "aegon/scenarios.hpp"
#include "reference_merkle.hpp"

using namespace aegon;

namespace {

struct Gate {
    int failures = 0;

    void report(int number, const std::string& title, bool passed,
                const std::string& detail) {
        std::cout << (passed ? "PASS" : "FAIL") << "  criterion " << number << ": " << title
                  << " — " << detail << "\n"
                  << std::flush;
        if (!passed) failures++;
    }
};

Digest to_digest(const refmerkle::Hash& h) {
    Digest d{};
    std::copy(h.begin(), h.end(), d.begin());
    return d;
}

// --- criterion 1: Merkle oracle equivalence -------------------------------

void criterion_1(Gate& gate) {
    auto started = std::chrono::steady_clock::now();
    std::mt19937_64 rng(0xA11CE);
    std::uniform_int_distribution<std::size_t> size_dist(1, 512);
    std::uniform_int_distribution<int> byte_dist(0, 255);

    std::size_t ledgers = 0;
    std::size_t prefix_roots = 0;
    std::size_t inclusion_checks = 0;
    std::size_t consistency_checks = 0;
    std::size_t mutations = 0;
    bool ok = true;
    std::string why;

    for (int trial = 0; trial < 200 && ok; trial++) {
        std::size_t n = size_dist(rng);
        refmerkle::Leaves leaves;
        MerkleTree tree;
        for (std::size_t i = 0; i < n; i++) {
            std::size_t len = 1 + (rng() % 64);
            std::string leaf(len, '\0');
            for (auto& c : leaf) c = static_cast<char>(byte_dist(rng));
            leaves.push_back(leaf);
            tree.push_leaf(leaf_hash(leaf));
        }
        ledgers++;

        // Every prefix root against the brute-force oracle.
        for (std::size_t m = 0; m <= n; m++) {
            refmerkle::Leaves prefix(leaves.begin(),
                                     leaves.begin() + static_cast<long>(m));
            if (tree.root(m) != to_digest(refmerkle::mth(prefix))) {
                ok = false;
                why = "prefix root mismatch at size " + std::to_string(m);
                break;
            }
            prefix_roots++;
        }
        if (!ok) break;

        // All inclusion proofs at the final size.
        Digest final_root = tree.root(n);
        for (std::size_t i = 0; i < n; i++) {
            InclusionProof p = tree.inclusion(i, n);
            if (!verify_inclusion(p, leaf_hash(leaves[i]), final_root, n)) {
                ok = false;
                why = "inclusion proof failed at leaf " + std::to_string(i);
                break;
            }
            inclusion_checks++;
        }
        if (!ok) break;

        // Consistency proofs for a sweep of old sizes.
        for (std::size_t old = 0; old <= n; old += 1 + (n / 16)) {
            ConsistencyProof p = tree.consistency(old, n);
            if (!verify_consistency(p, tree.root(old), final_root)) {
                ok = false;
                why = "consistency proof failed old=" + std::to_string(old);
                break;
            }
            consistency_checks++;
        }
        if (!ok) break;

        // Single-bit mutations: sampled leaves, paths, and roots must all
        // fail verification.
        for (int m = 0; m < 50 && ok; m++) {
            std::size_t i = rng() % n;
            InclusionProof p = tree.inclusion(i, n);
            switch (rng() % 3) {
                case 0: { // flip a bit in the leaf bytes
                    std::string tampered = leaves[i];
                    tampered[rng() % tampered.size()] ^=
                        static_cast<char>(1 << (rng() % 8));
                    if (verify_inclusion(p, leaf_hash(tampered), final_root, n)) {
                        ok = false;
                        why = "leaf mutation verified";
                    }
                    break;
                }
                case 1: { // flip a bit in the audit path (or root when empty)
                    if (p.audit_path.empty()) {
                        Digest bad = final_root;
                        bad[rng() % 32] ^= static_cast<std::uint8_t>(1 << (rng() % 8));
                        if (verify_inclusion(p, leaf_hash(leaves[i]), bad, n)) {
                            ok = false;
                            why = "root mutation verified";
                        }
                        break;
                    }
                    p.audit_path[rng() % p.audit_path.size()][rng() % 32] ^=
                        static_cast<std::uint8_t>(1 << (rng() % 8));
                    if (verify_inclusion(p, leaf_hash(leaves[i]), final_root, n)) {
                        ok = false;
                        why = "path mutation verified";
                    }
                    break;
                }
                default: { // flip a bit in the expected root
                    Digest bad = final_root;
                    bad[rng() % 32] ^= static_cast<std::uint8_t>(1 << (rng() % 8));
                    if (verify_inclusion(p, leaf_hash(leaves[i]), bad, n)) {
                        ok = false;
                        why = "root mutation verified";
                    }
                    break;
                }
            }
            mutations++;
        }
    }

    double elapsed_s = std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - started)
                           .count();
    if (ok && mutations < 10000) {
        ok = false;
        why = "mutation sample too small";
    }
    if (ok && elapsed_s >= 60.0) {
        ok = false;
        why = "runtime exceeded 60 s";
    }
    std::ostringstream detail;
    if (ok) {
        detail << ledgers << " ledgers, " << prefix_roots << " prefix roots, "
               << inclusion_checks << " inclusion + " << consistency_checks
               << " consistency proofs, " << mutations << " mutations all rejected, "
               << elapsed_s << " s";
    } else {
        detail << why;
    }
    gate.report(1, "Merkle oracle equivalence", ok, detail.str());
}

// --- criterion 2: RFC 6962 cross-check -------------------------------------

void criterion_2(Gate& gate) {
    bool ok = true;
    std::string why;

    // Published CT test vectors for the construction.
    if (hex(empty_tree_hash()) !=
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855") {
        ok = false;
        why = "empty tree hash";
    }
    if (ok && hex(leaf_hash(std::string_view{})) !=
                  "6e340b9cffb37a989ca544e6bb780a2c78901d3fb33738768511a30617afa01d") {
        ok = false;
        why = "empty leaf hash";
    }

    // Construction equivalence on structured inputs, twice, byte-identical.
    std::string run_digest[2];
    for (int run = 0; run < 2 && ok; run++) {
        std::string accum;
        for (std::size_t n : {1, 2, 3, 4, 5, 7, 8, 13, 64, 100, 256, 300}) {
            refmerkle::Leaves leaves;
            MerkleTree tree;
            for (std::size_t i = 0; i < n; i++) {
                std::string leaf = "entry-" + std::to_string(i);
                leaves.push_back(leaf);
                tree.push_leaf(leaf_hash(leaf));
            }
            if (tree.root(n) != to_digest(refmerkle::mth(leaves))) {
                ok = false;
                why = "root divergence at n=" + std::to_string(n);
                break;
            }
            // Audit paths element-for-element against the RFC recursion.
            for (std::size_t i = 0; i < n; i++) {
                auto ref_path = refmerkle::path(i, leaves);
                InclusionProof p = tree.inclusion(i, n);
                if (p.audit_path.size() != ref_path.size()) {
                    ok = false;
                    why = "path shape divergence";
                    break;
                }
                for (std::size_t j = 0; j < ref_path.size(); j++) {
                    if (p.audit_path[j] != to_digest(ref_path[j])) {
                        ok = false;
                        why = "path element divergence";
                        break;
                    }
                }
            }
            accum += hex(tree.root(n));
        }
        run_digest[run] = accum;
    }
    if (ok && run_digest[0] != run_digest[1]) {
        ok = false;
        why = "non-deterministic roots across runs";
    }
    gate.report(2, "RFC 6962 cross-check", ok,
                ok ? "CT vectors, oracle path equivalence, exact-byte determinism" : why);
}

// --- criterion 3: attack matrix ---------------------------------------------

void criterion_3(Gate& gate) {
    static const std::vector<std::string> adversarial{
        "replay_single_use",      "forged_token_signature",
        "expired_token",          "wrong_audience",
        "resource_mismatch",      "unlocked_bootloader",
        "software_attestation",   "duplicate_receipt",
        "stale_receipt_8d",       "content_hash_mismatch",
        "provenance_out_of_order", "backdated_provenance_timestamp",
        "ledger_rollback_detected_by_auditor"};
    static const std::vector<std::string> undetectable{"parallel_pipeline",
                                                       "omitted_provenance_events"};
    bool ok = true;
    std::string why;
    int ran = 0;
    for (const auto& list : {adversarial, undetectable}) {
        for (const auto& name : list) {
            ScenarioResult r = run_scenario(name, 42);
            ran++;
            if (!r.passed) {
                ok = false;
                why = name + ": " + (r.failures.empty() ? "failed" : r.failures.front());
                break;
            }
        }
        if (!ok) break;
    }
    gate.report(3, "attack matrix", ok,
                ok ? "13 detections + 2 documented-undetectable, " + std::to_string(ran) +
                         " scenarios exact"
                   : why);
}

// --- criterion 4: performance targets ---------------------------------------

void criterion_4(Gate& gate) {
    BenchReport report = run_bench(/*quick=*/false);
    bool ok = report.all_passed;
    std::ostringstream detail;
    for (const auto& c : report.cells) {
        if (c.target_p95_ms <= 0) continue;
        detail << c.operation << " p95=" << c.p95_ms << (c.pass ? " ok; " : " FAIL; ");
    }
    gate.report(4, "performance targets", ok, detail.str());
}

// --- criterion 5: spot-check statistics -------------------------------------

void criterion_5(Gate& gate) {
    int selected = 0;
    const int total = 100000;
    for (int i = 0; i < total; i++) {
        if (spot_check_select("txn_accept_" + std::to_string(i), "epoch-salt", 0.05)) {
            selected++;
        }
    }
    double fraction = static_cast<double>(selected) / total;
    bool fraction_ok = fraction >= 0.045 && fraction <= 0.055;

    ScenarioResult mismatch = scenarios::content_hash_mismatch(5);
    bool escalation_ok = mismatch.passed;

    std::ostringstream detail;
    detail << "selection fraction " << fraction << " (target 0.05 +/- 0.005), escalation "
           << (escalation_ok ? "after 3 mismatches" : "FAILED");
    gate.report(5, "spot-check statistics", fraction_ok && escalation_ok, detail.str());
}

// --- criterion 6: offline batching ------------------------------------------

void criterion_6(Gate& gate) {
    bool ok = true;
    std::string why;

    // Exact drain shape and backoff schedule under the controlled clock.
    {
        auto clock = std::make_shared<ManualClock>();
        clock->set_ms(1'750'000'000'000);
        EcKey root = EcKey::generate();
        SimDevice::Options opts;
        opts.rng_seed = 6;
        SimDevice dev = SimDevice::provision(hex_encode(random_bytes(32)), root, clock, opts);
        dev.set_device_id("dev_accept");
        for (int i = 0; i < 250; i++) {
            SimDevice::ReceiptParams p;
            p.txn_id = "txn_" + std::to_string(i);
            p.content_sha256_hex = sha256_hex("c");
            p.publisher_domain = "publisher.com";
            dev.queue_receipt(dev.make_receipt(p));
        }
        int failures_left = 8;
        FlushReport report = dev.flush(
            [&](const std::vector<std::string>& batch)
                -> std::optional<std::vector<Json>> {
                if (failures_left-- > 0) return std::nullopt;
                std::vector<Json> out;
                for (const auto& jws : batch) {
                    out.push_back(Json{{"receipt_id", OfflineQueue::receipt_id_of(jws)},
                                       {"status", "accepted"}});
                }
                return out;
            },
            [](std::int64_t) { return true; },
            [&](std::int64_t ms) { clock->advance_ms(ms); });
        if (report.batch_sizes != std::vector<std::size_t>{100, 100, 50}) {
            ok = false;
            why = "batch shape";
        }
        if (ok && report.base_delays_s !=
                      std::vector<std::int64_t>{1, 2, 4, 8, 16, 32, 60, 60}) {
            ok = false;
            why = "backoff schedule";
        }
        if (ok && !report.drained) {
            ok = false;
            why = "queue not drained";
        }
    }

    // Exactly-once ledger acceptance under 100 randomized connectivity and
    // response-loss schedules. Response loss after broker processing is the
    // adversarial case: the device must retry and the broker must dedup.
    int seeds_ok = 0;
    for (std::uint64_t seed = 1; ok && seed <= 100; seed++) {
        auto clock = std::make_shared<ManualClock>();
        clock->set_ms(1'750'000'000'000);
        EcKey trust_root = EcKey::generate();
        BrokerCore::Config cfg;
        cfg.trust_root_jwks = {trust_root.public_jwk()};
        cfg.spot_check_rate = 0.0;
        BrokerCore broker(cfg, clock, BrokerKeySet::generate());

        std::string challenge = broker.get_device_challenge().body["challenge"];
        SimDevice::Options opts;
        opts.rng_seed = seed;
        SimDevice dev = SimDevice::provision(challenge, trust_root, clock, opts);
        auto reg = broker.post_device_register(
            Json{{"chain", dev.attestation_chain()}, {"challenge", challenge}});
        dev.set_device_id(reg.body["device_id"]);

        std::vector<std::string> txns;
        for (int i = 0; i < 25; i++) {
            auto lic = broker.post_license(Json{{"platform_id", "p"},
                                                {"publisher_domain", "publisher.com"},
                                                {"resource_url",
                                                 "https://publisher.com/" + std::to_string(i)},
                                                {"scope", "excerpt"},
                                                {"license_type", "single_use"}});
            std::string txn = lic.body["txn_id"];
            broker.post_content_hash(Json{{"txn_id", txn},
                                          {"content_sha256", sha256_hex("c")},
                                          {"publisher_domain", "publisher.com"}});
            txns.push_back(txn);
            SimDevice::ReceiptParams p;
            p.txn_id = txn;
            p.content_sha256_hex = sha256_hex("c");
            p.publisher_domain = "publisher.com";
            dev.queue_receipt(dev.make_receipt(p));
        }

        std::mt19937_64 fault_rng(seed * 7919);
        FlushReport report = dev.flush(
            [&](const std::vector<std::string>& batch)
                -> std::optional<std::vector<Json>> {
                // 20%: request lost before the broker sees it.
                if (fault_rng() % 10 < 2) return std::nullopt;
                Json arr = Json::array();
                for (const auto& r : batch) arr.push_back(r);
                auto res = broker.post_receipts(arr);
                // 20%: response lost after broker processing (worst case).
                if (fault_rng() % 10 < 2) return std::nullopt;
                std::vector<Json> out;
                for (const auto& r : res.body["results"]) out.push_back(r);
                return out;
            },
            [&](std::int64_t) { return fault_rng() % 10 < 8; },
            [&](std::int64_t ms) { clock->advance_ms(ms); });

        if (!report.drained) {
            ok = false;
            why = "seed " + std::to_string(seed) + ": queue not drained";
            break;
        }
        for (const auto& txn : txns) {
            int accepted = 0;
            for (const auto& e : broker.ledger().entries_for_txn(txn)) {
                if (e.entry_type == EntryType::receipt_accepted) accepted++;
            }
            if (accepted != 1) {
                ok = false;
                why = "seed " + std::to_string(seed) + ": " + std::to_string(accepted) +
                      " acceptances for one receipt";
                break;
            }
        }
        seeds_ok++;
    }
    gate.report(6, "offline batching", ok,
                ok ? "batches 100/100/50, backoff 1,2,4,8,16,32,60,60 s, exactly-once over " +
                         std::to_string(seeds_ok) + " seeds"
                   : why);
}

// --- criterion 7: crash consistency -----------------------------------------

void criterion_7(Gate& gate) {
    auto work = std::filesystem::temp_directory_path() / "aegon-accept-crash";
    std::filesystem::remove_all(work);
    std::filesystem::create_directories(work);
    auto ledger_path = work / "ledger.aegl";

    // 10^4-append workload; STH roots recorded every 500 appends.
    refmerkle::Leaves oracle_leaves;
    std::vector<std::pair<std::uint64_t, Digest>> sths; // (size, root)
    {
        Ledger ledger(ledger_path, /*sync_each_append=*/false);
        for (int i = 0; i < 10000; i++) {
            std::string txn = "txn_crash_" + std::to_string(i);
            ledger.append(txn, EntryType::license_issued,
                          canonical_encode(Json{{"i", i}}), 1'750'000'000 + i);
            oracle_leaves.push_back(ledger.entry_at(i)->leaf_bytes());
            if ((i + 1) % 500 == 0) {
                sths.emplace_back(ledger.size(), ledger.root());
            }
        }
    }

    std::uintmax_t file_size = std::filesystem::file_size(ledger_path);
    std::mt19937_64 rng(7);
    bool ok = true;
    std::string why;
    int trials = 0;

    for (int trial = 0; trial < 50 && ok; trial++) {
        // Forced termination: the file ends at an arbitrary byte.
        auto crashed = work / ("crash_" + std::to_string(trial) + ".aegl");
        std::filesystem::copy_file(ledger_path, crashed);
        std::uintmax_t cut = 5 + rng() % (file_size - 5);
        std::filesystem::resize_file(crashed, cut);

        Ledger recovered(crashed);
        std::uint64_t n = recovered.size();

        refmerkle::Leaves prefix(oracle_leaves.begin(),
                                 oracle_leaves.begin() + static_cast<long>(n));
        if (recovered.root() != to_digest(refmerkle::mth(prefix))) {
            ok = false;
            why = "recovered root diverges from the brute-force oracle at size " +
                  std::to_string(n);
            break;
        }

        // Auditor-style consistency check against the last STH the recovery
        // still covers.
        const std::pair<std::uint64_t, Digest>* last_sth = nullptr;
        for (const auto& sth : sths) {
            if (sth.first <= n) last_sth = &sth;
        }
        if (last_sth) {
            ConsistencyProof proof = recovered.consistency(last_sth->first, n);
            if (!verify_consistency(proof, last_sth->second, recovered.root())) {
                ok = false;
                why = "consistency with the pre-crash STH failed at size " +
                      std::to_string(n);
                break;
            }
        }
        // Recovered ledger accepts new appends.
        recovered.append("txn_post_crash_" + std::to_string(trial),
                         EntryType::license_issued, canonical_encode(Json{{"post", true}}),
                         1'760'000'000);
        std::filesystem::remove(crashed);
        trials++;
    }
    std::filesystem::remove_all(work);
    gate.report(7, "crash consistency", ok,
                ok ? std::to_string(trials) +
                         " random truncations recovered: oracle root match + STH consistency"
                   : why);
}

// --- criterion 8: end-to-end happy paths ------------------------------------

void criterion_8(Gate& gate) {
    ScenarioResult web = scenarios::happy_path_web(8);
    ScenarioResult mobile = scenarios::happy_path_mobile(8);
    bool ok = web.passed && mobile.passed;
    std::string why;
    if (!web.passed) why = "web: " + (web.failures.empty() ? "failed" : web.failures.front());
    if (!mobile.passed) {
        why += (why.empty() ? "" : "; ") +
               ("mobile: " + (mobile.failures.empty() ? "failed" : mobile.failures.front()));
    }
    gate.report(8, "end-to-end happy paths", ok,
                ok ? "web flow (offline validation, txn header, hash, 5-stage chain, "
                     "auditor exit 0) + mobile flow (receipt accepted)"
                   : why);
}

} // namespace

int main() {
    Gate gate;
    criterion_1(gate);
    criterion_2(gate);
    criterion_3(gate);
    criterion_4(gate);
    criterion_5(gate);
    criterion_6(gate);
    criterion_7(gate);
    criterion_8(gate);
    if (gate.failures == 0) {
        std::cout << "ACCEPTANCE: all 8 criteria passed\n";
        return 0;
    }
    std::cout << "ACCEPTANCE: " << gate.failures << " criterion(s) failed\n";
    return 1;
}
