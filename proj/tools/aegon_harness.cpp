// Scenario and benchmark harness. `scenario <name>` runs one end-to-end
// protocol scenario (or all of them with `all`); `bench` measures protocol
// latencies against the configured targets.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "aegon/bench.hpp"
#include "aegon/scenarios.hpp"

namespace {

int run_one(const std::string& name, std::uint64_t seed, bool verbose) {
    aegon::ScenarioResult r = aegon::run_scenario(name, seed);
    std::cout << (r.passed ? "PASS" : "FAIL") << "  " << r.name << "\n";
    if (verbose || !r.passed) {
        for (const auto& line : r.transcript) std::cout << "    " << line << "\n";
    }
    return r.passed ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"aegon-harness: protocol scenarios and benchmarks"};
    app.require_subcommand(1);

    std::string name;
    std::uint64_t seed = 1;
    bool verbose = false;
    auto* scenario_cmd = app.add_subcommand("scenario", "Run a named scenario ('all' or 'list')");
    scenario_cmd->add_option("name", name, "Scenario name, 'all', or 'list'")->required();
    scenario_cmd->add_option("--seed", seed, "Deterministic seed");
    scenario_cmd->add_flag("--verbose", verbose, "Print full transcripts");

    std::string profile = "quick";
    std::string out_path;
    auto* bench_cmd = app.add_subcommand("bench", "Run the latency benchmark");
    bench_cmd->add_option("--profile", profile, "quick | full")
        ->check(CLI::IsMember({"quick", "full"}));
    bench_cmd->add_option("--out", out_path, "Write the JSON report here");

    CLI11_PARSE(app, argc, argv);

    if (scenario_cmd->parsed()) {
        if (name == "list") {
            for (const auto& [n, fn] : aegon::scenario_registry()) std::cout << n << "\n";
            return 0;
        }
        try {
            if (name == "all") {
                int failures = 0;
                for (const auto& [n, fn] : aegon::scenario_registry()) {
                    failures += run_one(n, seed, verbose);
                }
                std::cout << (failures == 0 ? "ALL SCENARIOS PASSED"
                                            : std::to_string(failures) + " SCENARIO(S) FAILED")
                          << "\n";
                return failures == 0 ? 0 : 1;
            }
            return run_one(name, seed, verbose);
        } catch (const aegon::ValidationError& e) {
            std::cerr << e.what() << "\n";
            return 2;
        }
    }

    aegon::BenchReport report = aegon::run_bench(profile == "quick");
    for (const auto& c : report.cells) {
        std::cout << (c.pass ? "PASS" : "FAIL") << "  " << c.operation
                  << "  p50=" << c.p50_ms << "ms p95=" << c.p95_ms << "ms p99=" << c.p99_ms
                  << "ms samples=" << c.samples;
        if (c.target_p95_ms > 0) std::cout << " target_p95=" << c.target_p95_ms << "ms";
        if (c.achieved_rate_per_s > 0) std::cout << " rate=" << c.achieved_rate_per_s << "/s";
        std::cout << "\n";
    }
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        out << report.to_json().dump(2) << "\n";
        std::cout << "report written to " << out_path << "\n";
    }
    return report.all_passed ? 0 : 1;
}
