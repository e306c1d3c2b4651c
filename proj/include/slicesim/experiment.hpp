#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "slicesim/metrics.hpp"
#include "slicesim/network.hpp"
#include "slicesim/scenario.hpp"

namespace slicesim {

inline const std::vector<FlowClass> kReportedClasses = {
    FlowClass::App,  FlowClass::Nsu,   FlowClass::Ftq,     FlowClass::SdnDown,
    FlowClass::Rpl,  FlowClass::Cjoin, FlowClass::TrackCtl};

// Everything a completed run leaves behind, in memory.
struct RunResult {
    Scenario scenario;
    std::vector<PacketRecord> records;
    Asn warmup_end_asn = 0;
    Asn end_asn = 0;
    double slot_ms = 10.0;
    FrameLedger ledger;
    std::size_t queued_at_end = 0;
    std::uint64_t audit_violations = 0;
    std::vector<std::string> audit_findings;
    bool all_nodes_settled = false;
    std::size_t tracks_active = 0;
    std::string schedule_dump;
    std::string track_dump;
    std::string controller_log;
    std::vector<NodeId> stale_nodes;

    FlowStats stats(FlowClass cls) const {
        return compute_flow_stats(records, cls, slot_ms);
    }

    // Pooled stats over several classes (e.g. upward SDN control = NSU+FTQ).
    FlowStats stats(const std::vector<FlowClass>& classes, const std::string& label) const {
        std::vector<PacketRecord> merged;
        for (const auto& r : records) {
            for (FlowClass c : classes) {
                if (r.cls == c) {
                    merged.push_back(r);
                    break;
                }
            }
        }
        for (auto& r : merged) {
            r.cls = classes.front();
        }
        FlowStats st = compute_flow_stats(merged, classes.front(), slot_ms);
        st.cls = label;
        return st;
    }
};

inline RunResult run_single(const Scenario& sc) {
    Network net(sc);
    net.run();
    RunResult out;
    out.scenario = sc;
    out.records = net.records();
    out.warmup_end_asn = net.warmup_end_asn().value_or(0);
    out.end_asn = net.sim().now();
    out.slot_ms = sc.slot_duration_ms;
    out.ledger = net.ledger();
    out.queued_at_end = net.queued_frames();
    out.audit_violations = net.audit_violations();
    out.audit_findings = net.full_audit();
    out.all_nodes_settled = net.warmup_end_asn().has_value();
    for (const auto& [id, t] : net.tracks().all()) {
        if (t.state == TrackState::Active) {
            ++out.tracks_active;
        }
    }
    out.schedule_dump = net.schedule_dump();
    out.track_dump = net.track_dump();
    out.controller_log = net.controller().dump_log();
    out.stale_nodes = net.controller().stale_nodes(net.sim().now_s());
    return out;
}

// ---------------------------------------------------------------------------
// Multi-seed experiments with file output
// ---------------------------------------------------------------------------

struct SummaryCell {
    double mean = 0;
    double stddev = 0;
    std::size_t n = 0;
};

struct ExperimentReport {
    Scenario base;
    std::vector<std::uint64_t> seeds;
    std::vector<RunResult> runs;
    // class name -> metric name -> cross-seed aggregate
    std::map<std::string, std::map<std::string, SummaryCell>> summary;
};

namespace detail {

inline SummaryCell aggregate(const std::vector<double>& xs) {
    SummaryCell c;
    c.n = xs.size();
    if (xs.empty()) {
        return c;
    }
    double sum = 0;
    for (double x : xs) {
        sum += x;
    }
    c.mean = sum / xs.size();
    double var = 0;
    for (double x : xs) {
        var += (x - c.mean) * (x - c.mean);
    }
    c.stddev = xs.size() > 1 ? std::sqrt(var / (xs.size() - 1)) : 0.0;
    return c;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw ScenarioError("cannot write " + path.string());
    }
    f << content;
}

} // namespace detail

inline void build_summary(ExperimentReport& rep) {
    for (FlowClass cls : kReportedClasses) {
        std::map<std::string, std::vector<double>> metric_values;
        for (const auto& run : rep.runs) {
            const FlowStats st = run.stats(cls);
            if (st.pdr) metric_values["pdr"].push_back(*st.pdr);
            if (st.latency_mean_ms) metric_values["latency_mean_ms"].push_back(*st.latency_mean_ms);
            if (st.latency_p50_ms) metric_values["latency_p50_ms"].push_back(*st.latency_p50_ms);
            if (st.latency_p95_ms) metric_values["latency_p95_ms"].push_back(*st.latency_p95_ms);
            if (st.jitter_ms) metric_values["jitter_ms"].push_back(*st.jitter_ms);
        }
        auto& out = rep.summary[to_string(cls)];
        for (const auto& [metric, values] : metric_values) {
            out[metric] = detail::aggregate(values);
        }
    }
}

inline std::string records_csv(const std::vector<PacketRecord>& records, bool warmup) {
    std::string out = kRecordCsvHeader;
    out += '\n';
    for (const auto& r : records) {
        if (r.warmup != warmup) {
            continue;
        }
        out += record_csv_line(r);
        out += '\n';
    }
    return out;
}

inline std::string flow_stats_csv(const RunResult& run) {
    std::string out = kFlowStatsCsvHeader;
    out += '\n';
    for (FlowClass cls : kReportedClasses) {
        out += flow_stats_csv_line(run.stats(cls));
        out += '\n';
    }
    return out;
}

inline std::string summary_csv(const ExperimentReport& rep) {
    std::string out = "class,metric,mean,stddev,n_seeds\n";
    for (const auto& [cls, metrics] : rep.summary) {
        for (const auto& [metric, cell] : metrics) {
            out += cls + "," + metric + "," + detail::fmt6(cell.mean) + "," +
                   detail::fmt6(cell.stddev) + "," + std::to_string(cell.n) + "\n";
        }
    }
    return out;
}

inline nlohmann::json report_json(const ExperimentReport& rep) {
    nlohmann::json j;
    j["mode"] = to_string(rep.base.mode);
    j["seeds"] = rep.seeds;
    j["duration_s"] = rep.base.duration_s;
    nlohmann::json per_seed = nlohmann::json::array();
    for (std::size_t i = 0; i < rep.runs.size(); ++i) {
        const RunResult& run = rep.runs[i];
        nlohmann::json r;
        r["seed"] = rep.seeds[i];
        r["warmup_end_asn"] = run.warmup_end_asn;
        r["end_asn"] = run.end_asn;
        r["audit_violations"] = run.audit_violations;
        r["tracks_active"] = run.tracks_active;
        r["stale_nodes"] = run.stale_nodes;
        for (FlowClass cls : kReportedClasses) {
            const FlowStats st = run.stats(cls);
            if (st.n_sent == 0) {
                continue;
            }
            nlohmann::json s;
            s["n_sent"] = st.n_sent;
            s["n_delivered"] = st.n_delivered;
            if (st.pdr) s["pdr"] = *st.pdr;
            if (st.latency_mean_ms) s["latency_mean_ms"] = *st.latency_mean_ms;
            if (st.latency_p50_ms) s["latency_p50_ms"] = *st.latency_p50_ms;
            if (st.latency_p95_ms) s["latency_p95_ms"] = *st.latency_p95_ms;
            if (st.jitter_ms) s["jitter_ms"] = *st.jitter_ms;
            r["classes"][to_string(cls)] = s;
        }
        per_seed.push_back(r);
    }
    j["runs"] = per_seed;
    for (const auto& [cls, metrics] : rep.summary) {
        for (const auto& [metric, cell] : metrics) {
            j["summary"][cls][metric] = {{"mean", cell.mean},
                                         {"stddev", cell.stddev},
                                         {"n", cell.n}};
        }
    }
    return j;
}

// Runs the scenario once per seed, writes per-run record and stats CSVs plus
// the schedule/track/controller dumps, then a cross-seed summary (mean and
// stddev per class per metric) and a JSON report.
inline ExperimentReport run_experiment(const Scenario& base,
                                       const std::vector<std::uint64_t>& seeds,
                                       const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    ExperimentReport rep;
    rep.base = base;
    rep.seeds = seeds;
    fs::create_directories(out_dir);
    detail::write_file(out_dir / "scenario.txt", scenario_to_text(base));

    for (std::uint64_t seed : seeds) {
        Scenario sc = base;
        sc.seed = seed;
        RunResult run;
        try {
            run = run_single(sc);
        } catch (const std::exception& e) {
            throw SimError("seed " + std::to_string(seed) + ": " + e.what());
        }
        const fs::path dir = out_dir / ("run_seed" + std::to_string(seed));
        fs::create_directories(dir);
        detail::write_file(dir / "records.csv", records_csv(run.records, false));
        detail::write_file(dir / "warmup_records.csv", records_csv(run.records, true));
        detail::write_file(dir / "flowstats.csv", flow_stats_csv(run));
        detail::write_file(dir / "schedule.txt", run.schedule_dump);
        detail::write_file(dir / "tracks.txt", run.track_dump);
        detail::write_file(dir / "controller_log.txt", run.controller_log);
        rep.runs.push_back(std::move(run));
    }
    build_summary(rep);
    detail::write_file(out_dir / "summary.csv", summary_csv(rep));
    detail::write_file(out_dir / "report.json", report_json(rep).dump(2) + "\n");
    return rep;
}

// Recomputes flowstats.csv for every run_seed* directory under `dir` from
// its record CSVs (the `stats` subcommand).
inline std::size_t recompute_stats(const std::filesystem::path& dir, double slot_ms) {
    namespace fs = std::filesystem;
    std::size_t n = 0;
    std::vector<fs::path> run_dirs;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_directory() && entry.path().filename().string().rfind("run_seed", 0) == 0) {
            run_dirs.push_back(entry.path());
        }
    }
    std::sort(run_dirs.begin(), run_dirs.end());
    for (const auto& rd : run_dirs) {
        std::vector<PacketRecord> records;
        for (bool warmup : {false, true}) {
            const fs::path p = rd / (warmup ? "warmup_records.csv" : "records.csv");
            std::ifstream f(p);
            if (!f) {
                throw ScenarioError("cannot read " + p.string());
            }
            std::string line;
            std::getline(f, line); // header
            if (line != kRecordCsvHeader) {
                throw ScenarioError(p.string() + ": unexpected header");
            }
            while (std::getline(f, line)) {
                if (!line.empty()) {
                    records.push_back(parse_record_csv_line(line, warmup));
                }
            }
        }
        RunResult tmp;
        tmp.records = std::move(records);
        tmp.slot_ms = slot_ms;
        detail::write_file(rd / "flowstats.csv", flow_stats_csv(tmp));
        ++n;
    }
    return n;
}

} // namespace slicesim
