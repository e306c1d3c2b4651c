#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "slicesim/slicesim.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw slicesim::ScenarioError("cannot open scenario file: " + path);
    }
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

// "--seeds 10" means seeds 1..10; "--seeds 3,7,11" is an explicit list.
std::vector<std::uint64_t> parse_seeds(const std::string& spec) {
    std::vector<std::uint64_t> seeds;
    if (spec.find(',') == std::string::npos) {
        const auto n = std::stoull(spec);
        if (n == 0) {
            throw slicesim::ScenarioError("--seeds: need at least one seed");
        }
        for (std::uint64_t s = 1; s <= n; ++s) {
            seeds.push_back(s);
        }
        return seeds;
    }
    std::istringstream is(spec);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        if (!tok.empty()) {
            seeds.push_back(std::stoull(tok));
        }
    }
    if (seeds.empty()) {
        throw slicesim::ScenarioError("--seeds: empty list");
    }
    return seeds;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"slicesim: deterministic TSCH mesh simulator with SDN control-plane slicing"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string seeds_spec = "1";
    std::string out_dir = "out";
    std::string in_dir;
    double slot_ms = 10.0;

    auto* simulate = app.add_subcommand("simulate", "run a scenario across seeds");
    simulate->add_option("--scenario", scenario_path, "scenario file")->required();
    simulate->add_option("--seeds", seeds_spec, "seed count (1..n) or comma list");
    simulate->add_option("--out", out_dir, "output directory");

    auto* stats = app.add_subcommand("stats", "recompute flow stats from record CSVs");
    stats->add_option("--in", in_dir, "experiment output directory")->required();
    stats->add_option("--slot-ms", slot_ms, "slot duration used for latency conversion");

    auto* sched = app.add_subcommand("schedule-dump", "print the slotframe grid for a scenario");
    sched->add_option("--scenario", scenario_path, "scenario file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) {
            const auto sc = slicesim::parse_scenario(read_file(scenario_path));
            const auto seeds = parse_seeds(seeds_spec);
            const auto rep = slicesim::run_experiment(sc, seeds, out_dir);
            std::cout << "mode " << to_string(sc.mode) << ", " << seeds.size()
                      << " seed(s), results in " << out_dir << "\n";
            for (const auto& [cls, metrics] : rep.summary) {
                for (const auto& [metric, cell] : metrics) {
                    if (cell.n == 0) {
                        continue;
                    }
                    std::printf("  %-9s %-16s %10.3f +- %.3f (n=%zu)\n", cls.c_str(),
                                metric.c_str(), cell.mean, cell.stddev, cell.n);
                }
            }
            return 0;
        }
        if (stats->parsed()) {
            const std::size_t n = slicesim::recompute_stats(in_dir, slot_ms);
            std::cout << "recomputed flow stats for " << n << " run(s) in " << in_dir << "\n";
            return 0;
        }
        if (sched->parsed()) {
            auto sc = slicesim::parse_scenario(read_file(scenario_path));
            slicesim::Network net(sc);
            std::cout << net.schedule_dump();
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
