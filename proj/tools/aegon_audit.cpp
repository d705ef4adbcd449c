// Independent ledger auditor CLI. Exit codes: 0 verified, 1 verification
// failure (including equivocation/rollback alerts), 2 not found, 3 transport
// error.
#include <CLI11.hpp>

#include <chrono>
#include <iostream>
#include <thread>

#include "aegon/auditor.hpp"
#include "aegon/auditor_http.hpp"

int main(int argc, char** argv) {
    CLI::App app{"aegon-audit: verify broker transparency-ledger claims"};
    app.require_subcommand(1);

    std::string broker_url = "http://127.0.0.1:8080";
    std::string state_dir = "./aegon-audit-state";
    bool json_output = false;
    app.add_option("--broker", broker_url, "Broker base URL");
    app.add_option("--state-dir", state_dir, "Directory for persisted STH history");
    app.add_flag("--json", json_output, "Emit machine-readable JSON verdicts");

    auto* sth_cmd = app.add_subcommand("sth", "Fetch and verify the current signed tree head");

    std::string txn_id;
    auto* incl_cmd =
        app.add_subcommand("verify-inclusion", "Prove a transaction is in the ledger");
    incl_cmd->add_option("txn_id", txn_id, "Transaction id")->required();

    auto* cons_cmd = app.add_subcommand(
        "consistency", "Verify the tree extends the last locally stored STH");

    int cycles = 0;
    int interval_s = 60;
    auto* watch_cmd = app.add_subcommand("watch", "Poll consistency on an interval");
    watch_cmd->add_option("--cycles", cycles, "Number of cycles (0 = forever)");
    watch_cmd->add_option("--interval", interval_s, "Seconds between cycles");

    CLI11_PARSE(app, argc, argv);

    aegon::Auditor auditor(aegon::make_http_fetch(broker_url),
                           aegon::Auditor::Options{state_dir, json_output}, std::cout);

    if (sth_cmd->parsed()) return auditor.cmd_sth();
    if (incl_cmd->parsed()) return auditor.cmd_verify_inclusion(txn_id);
    if (cons_cmd->parsed()) return auditor.cmd_consistency();
    if (watch_cmd->parsed()) {
        return auditor.cmd_watch(cycles, [interval_s] {
            std::this_thread::sleep_for(std::chrono::seconds(interval_s));
        });
    }
    return aegon::kAuditTransportError;
}
