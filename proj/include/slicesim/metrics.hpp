#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "slicesim/types.hpp"

namespace slicesim {

// Per-packet provenance: one record per end-to-end packet with exactly one
// terminal outcome (delivered or dropped with a reason).
struct PacketRecord {
    PacketId id = 0;
    FlowClass cls = FlowClass::App;
    NodeId src = 0;
    NodeId dst = 0;
    Asn enqueue_asn = 0;
    std::optional<Asn> deliver_asn;
    DropReason drop = DropReason::None;
    std::uint8_t hop_count = 0;
    bool warmup = false;         // enqueued before every node settled
    bool via_track_only = true;  // every hop rode a track cell

    bool delivered() const { return deliver_asn.has_value(); }
    bool terminal() const { return delivered() || drop != DropReason::None; }
};

struct FlowStats {
    std::string cls;
    std::size_t n_sent = 0;
    std::size_t n_delivered = 0;
    std::optional<double> pdr;
    std::optional<double> latency_mean_ms;
    std::optional<double> latency_p50_ms;
    std::optional<double> latency_p95_ms;
    std::optional<double> jitter_ms;
};

namespace detail {

inline double nearest_rank(const std::vector<double>& sorted, double pct) {
    const std::size_t n = sorted.size();
    std::size_t rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * n));
    if (rank < 1) rank = 1;
    if (rank > n) rank = n;
    return sorted[rank - 1];
}

inline std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

inline std::string opt_fmt(const std::optional<double>& v) {
    return v ? fmt6(*v) : std::string{};
}

} // namespace detail

// Latency, PDR and jitter for one class over the measured (non-warm-up)
// records of a run. Latency is (deliver - enqueue) * slot_ms; jitter is the
// mean absolute difference between consecutive delays in delivery order;
// percentiles use the nearest-rank rule. Empty classes give null stats.
inline FlowStats compute_flow_stats(std::span<const PacketRecord> records, FlowClass cls,
                                    double slot_ms) {
    FlowStats st;
    st.cls = to_string(cls);

    struct Delivered {
        Asn deliver;
        PacketId id;
        double latency_ms;
    };
    std::vector<Delivered> delivered;
    for (const auto& r : records) {
        if (r.cls != cls || r.warmup) {
            continue;
        }
        ++st.n_sent;
        if (r.delivered()) {
            ++st.n_delivered;
            delivered.push_back(
                {*r.deliver_asn, r.id,
                 static_cast<double>(*r.deliver_asn - r.enqueue_asn) * slot_ms});
        }
    }
    if (st.n_sent > 0) {
        st.pdr = static_cast<double>(st.n_delivered) / static_cast<double>(st.n_sent);
    }
    if (delivered.empty()) {
        return st;
    }
    std::sort(delivered.begin(), delivered.end(), [](const Delivered& a, const Delivered& b) {
        if (a.deliver != b.deliver) return a.deliver < b.deliver;
        return a.id < b.id;
    });

    std::vector<double> lat;
    lat.reserve(delivered.size());
    double sum = 0;
    for (const auto& d : delivered) {
        lat.push_back(d.latency_ms);
        sum += d.latency_ms;
    }
    st.latency_mean_ms = sum / static_cast<double>(lat.size());

    if (lat.size() >= 2) {
        double jsum = 0;
        for (std::size_t i = 1; i < lat.size(); ++i) {
            jsum += std::abs(lat[i] - lat[i - 1]);
        }
        st.jitter_ms = jsum / static_cast<double>(lat.size() - 1);
    } else {
        st.jitter_ms = 0.0;
    }

    std::sort(lat.begin(), lat.end());
    st.latency_p50_ms = detail::nearest_rank(lat, 50);
    st.latency_p95_ms = detail::nearest_rank(lat, 95);
    return st;
}

inline std::map<DropReason, std::size_t> drops_by_reason(std::span<const PacketRecord> records,
                                                         FlowClass cls, bool include_warmup = false) {
    std::map<DropReason, std::size_t> out;
    for (const auto& r : records) {
        if (r.cls != cls || (r.warmup && !include_warmup)) {
            continue;
        }
        if (!r.delivered() && r.drop != DropReason::None) {
            ++out[r.drop];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV formats (column orders fixed; see README)
// ---------------------------------------------------------------------------

inline const char* kRecordCsvHeader =
    "packet_id,class,src,dst,enqueue_asn,deliver_asn,outcome,drop_reason,hop_count,via_track";

inline std::string record_csv_line(const PacketRecord& r) {
    std::ostringstream os;
    os << r.id << ',' << to_string(r.cls) << ',' << r.src << ',' << r.dst << ','
       << r.enqueue_asn << ',';
    if (r.deliver_asn) {
        os << *r.deliver_asn;
    }
    os << ',' << (r.delivered() ? "delivered" : "dropped") << ',' << to_string(r.drop) << ','
       << static_cast<unsigned>(r.hop_count) << ',' << (r.via_track_only ? 1 : 0);
    return os.str();
}

inline const char* kFlowStatsCsvHeader =
    "class,n_sent,n_delivered,pdr,latency_mean_ms,latency_p50_ms,latency_p95_ms,jitter_ms";

inline std::string flow_stats_csv_line(const FlowStats& st) {
    std::ostringstream os;
    os << st.cls << ',' << st.n_sent << ',' << st.n_delivered << ',' << detail::opt_fmt(st.pdr)
       << ',' << detail::opt_fmt(st.latency_mean_ms) << ',' << detail::opt_fmt(st.latency_p50_ms)
       << ',' << detail::opt_fmt(st.latency_p95_ms) << ',' << detail::opt_fmt(st.jitter_ms);
    return os.str();
}

inline std::optional<FlowClass> flow_class_from_string(std::string_view s) {
    for (FlowClass c : {FlowClass::App, FlowClass::Nsu, FlowClass::Ftq, FlowClass::SdnDown,
                        FlowClass::Rpl, FlowClass::Cjoin, FlowClass::TrackCtl}) {
        if (s == to_string(c)) {
            return c;
        }
    }
    return std::nullopt;
}

inline std::optional<DropReason> drop_reason_from_string(std::string_view s) {
    for (DropReason r :
         {DropReason::None, DropReason::QueueOverflow, DropReason::RetryLimit,
          DropReason::TrackStale, DropReason::QueryBufferOverflow, DropReason::QueryTimeout,
          DropReason::FlowDrop, DropReason::Unjoined, DropReason::EndOfRun}) {
        if (s == to_string(r)) {
            return r;
        }
    }
    return std::nullopt;
}

// Parses one records.csv body line (inverse of record_csv_line).
inline PacketRecord parse_record_csv_line(const std::string& line, bool warmup_file = false) {
    std::vector<std::string> f;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            f.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    f.push_back(cur);
    if (f.size() != 10) {
        throw ScenarioError("records csv: expected 10 fields, got " + std::to_string(f.size()));
    }
    PacketRecord r;
    r.id = std::stoull(f[0]);
    auto cls = flow_class_from_string(f[1]);
    if (!cls) {
        throw ScenarioError("records csv: unknown class " + f[1]);
    }
    r.cls = *cls;
    r.src = static_cast<NodeId>(std::stoul(f[2]));
    r.dst = static_cast<NodeId>(std::stoul(f[3]));
    r.enqueue_asn = std::stoull(f[4]);
    if (!f[5].empty()) {
        r.deliver_asn = std::stoull(f[5]);
    }
    auto reason = drop_reason_from_string(f[7]);
    if (!reason) {
        throw ScenarioError("records csv: unknown drop reason " + f[7]);
    }
    r.drop = *reason;
    r.hop_count = static_cast<std::uint8_t>(std::stoul(f[8]));
    r.via_track_only = f[9] == "1";
    r.warmup = warmup_file;
    return r;
}

} // namespace slicesim
