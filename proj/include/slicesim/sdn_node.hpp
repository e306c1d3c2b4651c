#pragma once

#include <deque>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "slicesim/codec.hpp"
#include "slicesim/flowtable.hpp"
#include "slicesim/types.hpp"

namespace slicesim {

enum class JoinState : std::uint8_t {
    Unstarted,
    Discovering,
    Joining,
    Joined,
    TrackReady,
    JoinFailed,
};

inline const char* to_string(JoinState s) {
    switch (s) {
    case JoinState::Unstarted: return "Unstarted";
    case JoinState::Discovering: return "Discovering";
    case JoinState::Joining: return "Joining";
    case JoinState::Joined: return "Joined";
    case JoinState::TrackReady: return "TrackReady";
    case JoinState::JoinFailed: return "JoinFailed";
    }
    return "?";
}

enum class Disposition : std::uint8_t {
    ForwardedL3,     // blacklist or SRH: legacy Layer-3 handling
    ForwardedSdn,    // matched a flow entry
    Dropped,
    QueriedBuffered, // flowtable miss, packet parked behind an FTQ
    DeliveredLocal,
};

struct NodeConfig {
    double nsu_period_s = 10.0;
    double flow_lifetime_s = 60.0;
    std::size_t ppq_bytes = 24;
    std::size_t flowtable_capacity = 10;
    std::size_t query_buffer = 4;
    double query_timeout_s = 15.0;
    int query_retry_budget = 1;
    int cjoin_max_retries = 5;
};

struct PipelineResult {
    Disposition disposition = Disposition::Dropped;
    std::optional<NodeId> next_hop;        // ForwardedSdn with a Forward action
    std::vector<NodeId> srh_to_push;       // ForwardedSdn with an SrhPush action
    std::optional<FtqMsg> query;           // FTQ to emit (first miss for the key)
    DropReason drop_reason = DropReason::None;
    std::vector<Packet> buffer_evicted;    // pushed out of a full pending buffer
};

// Per-node SDN layer: the packet-handling pipeline over a protocol-oblivious
// flowtable with blacklist, controller join state machine, NSU generation,
// and the query path with Control Message Quenching (one in-flight query per
// flow key) and Partial Packet Queries (header prefix only).
class SdnNode {
public:
    SdnNode(NodeId id, NodeConfig cfg)
        : id_(id), cfg_(cfg), table_(cfg.flowtable_capacity) {}

    NodeId id() const { return id_; }
    FlowTable& flowtable() { return table_; }
    const FlowTable& flowtable() const { return table_; }
    const NodeConfig& config() const { return cfg_; }
    JoinState join_state() const { return state_; }
    std::optional<TrackId> track_binding() const { return track_; }

    bool terminal(bool track_mode) const {
        if (state_ == JoinState::JoinFailed) {
            return true;
        }
        return track_mode ? state_ == JoinState::TrackReady : state_ == JoinState::Joined;
    }

    // --- packet pipeline --------------------------------------------------

    PipelineResult handle_packet(const Packet& pkt, double now_s) {
        PipelineResult res;
        if (pkt.dst == id_) {
            res.disposition = Disposition::DeliveredLocal;
            return res;
        }
        // Source-routed packets bypass the table; the header is readable by
        // both the RPL and SDN layers.
        if (!pkt.srh.empty()) {
            res.disposition = Disposition::ForwardedL3;
            return res;
        }
        const auto header = pkt.header_image();
        if (table_.blacklisted(header)) {
            res.disposition = Disposition::ForwardedL3;
            return res;
        }
        FlowTable::Entry* entry = table_.lookup(header, now_s);
        if (entry != nullptr && entry->action.kind != ActionKind::Query) {
            switch (entry->action.kind) {
            case ActionKind::Forward:
                res.disposition = Disposition::ForwardedSdn;
                res.next_hop = entry->action.next_hop;
                return res;
            case ActionKind::Drop:
                res.disposition = Disposition::Dropped;
                res.drop_reason = DropReason::FlowDrop;
                return res;
            case ActionKind::SrhPush:
                res.disposition = Disposition::ForwardedSdn;
                res.srh_to_push = entry->action.route;
                return res;
            default:
                break;
            }
        }
        // Miss (or an explicit Query action): defer to the controller.
        queue_query_(pkt, header, now_s, res);
        return res;
    }

    // --- join state machine -------------------------------------------------

    CjoinMsg start_join(double /*now_s*/) {
        state_ = JoinState::Joining;
        join_attempts_ = 1;
        return CjoinMsg{id_, static_cast<std::uint8_t>(join_attempts_)};
    }

    // Nullopt when the node is past Joining or out of retries (the latter
    // flips it to JoinFailed).
    std::optional<CjoinMsg> retry_join(double /*now_s*/) {
        if (state_ != JoinState::Joining) {
            return std::nullopt;
        }
        if (join_attempts_ >= cfg_.cjoin_max_retries) {
            state_ = JoinState::JoinFailed;
            return std::nullopt;
        }
        ++join_attempts_;
        return CjoinMsg{id_, static_cast<std::uint8_t>(join_attempts_)};
    }

    void on_cack(const CackMsg& msg) {
        if (msg.node != id_) {
            return;
        }
        cack_seen_ = true;
        maybe_joined_();
    }

    void on_conf(const ConfMsg& msg, double /*now_s*/) {
        cfg_.nsu_period_s = msg.nsu_period_s;
        cfg_.flow_lifetime_s = msg.flow_lifetime_s;
        conf_seen_ = true;
        maybe_joined_();
    }

    void mark_track_ready(TrackId track) {
        track_ = track;
        if (state_ == JoinState::Joined) {
            state_ = JoinState::TrackReady;
        }
    }

    void clear_track() { track_.reset(); }

    int join_attempts() const { return join_attempts_; }

    // --- node state update ----------------------------------------------------

    struct NsuContext {
        std::uint16_t energy = 0;
        std::uint8_t queue_occupancy = 0;
        std::vector<NeighborReport> neighbors;
    };

    // Emits the periodic NSU; unjoined nodes never emit. Entry hit counts
    // since the previous NSU ride along for the controller's AFR decisions.
    std::optional<NsuMsg> tick_nsu(double now_s, const NsuContext& ctx) {
        if (state_ != JoinState::Joined && state_ != JoinState::TrackReady) {
            return std::nullopt;
        }
        NsuMsg msg;
        msg.node = id_;
        msg.energy = ctx.energy;
        msg.queue_occupancy = ctx.queue_occupancy;
        msg.neighbors = ctx.neighbors;
        for (auto& e : table_.entries()) {
            const std::uint32_t delta = e.hit_count - e.reported_hits;
            if (delta > 0 && e.alive(now_s)) {
                msg.entry_stats.push_back(
                    {e.entry_id, static_cast<std::uint8_t>(delta > 255 ? 255 : delta)});
            }
        }
        for (const auto& st : msg.entry_stats) {
            if (auto* e = table_.find_by_id(st.entry_id)) {
                e->reported_hits = e->hit_count;
            }
        }
        ++nsu_emitted_;
        return msg;
    }

    double nsu_period_s() const { return cfg_.nsu_period_s; }

    // --- controller replies -----------------------------------------------

    struct ApplyResult {
        std::size_t inserted = 0;
        std::size_t refreshed = 0;
        std::size_t refresh_ignored = 0; // ids naming dead/absent entries
        // Buffered packets re-run through the pipeline after the update.
        std::vector<std::pair<Packet, PipelineResult>> flushed;
    };

    ApplyResult apply_fts(const FtsMsg& msg, double now_s) {
        ApplyResult out;
        for (const auto& spec : msg.entries) {
            table_.insert(spec, now_s);
            ++out.inserted;
        }
        for (std::uint16_t id : msg.refresh_ids) {
            if (table_.refresh(id, now_s)) {
                ++out.refreshed;
            } else {
                ++out.refresh_ignored;
            }
        }
        flush_pending_(now_s, out);
        return out;
    }

    // --- query timeouts -------------------------------------------------------

    struct TimeoutResult {
        std::optional<FtqMsg> retry;
        std::vector<Packet> dropped; // buffered packets given up on
    };

    TimeoutResult on_query_timeout(const FlowKey& key, std::uint16_t query_seq, double now_s) {
        TimeoutResult out;
        auto it = pending_.find(key);
        if (it == pending_.end() || it->second.query_seq != query_seq) {
            return out; // reply already handled it
        }
        PendingQuery& pq = it->second;
        if (pq.retries_left > 0) {
            --pq.retries_left;
            pq.query_seq = ++query_seq_;
            pq.sent_s = now_s;
            FtqMsg ftq;
            ftq.node = id_;
            ftq.query_seq = pq.query_seq;
            ftq.header_prefix = pq.prefix;
            ++ftq_emitted_;
            out.retry = std::move(ftq);
            return out;
        }
        out.dropped.assign(pq.buffered.begin(), pq.buffered.end());
        pending_.erase(it);
        return out;
    }

    // --- introspection -----------------------------------------------------

    std::size_t pending_query_count() const { return pending_.size(); }
    bool has_pending_query(const FlowKey& key) const { return pending_.count(key) > 0; }
    std::uint64_t ftq_emitted() const { return ftq_emitted_; }
    std::uint64_t nsu_emitted() const { return nsu_emitted_; }

    struct PendingInfo {
        std::uint16_t query_seq;
        std::size_t buffered;
    };
    std::optional<PendingInfo> pending_info(const FlowKey& key) const {
        auto it = pending_.find(key);
        if (it == pending_.end()) {
            return std::nullopt;
        }
        return PendingInfo{it->second.query_seq, it->second.buffered.size()};
    }

private:
    struct PendingQuery {
        std::uint16_t query_seq = 0;
        double sent_s = 0;
        std::vector<std::uint8_t> prefix;
        std::deque<Packet> buffered;
        int retries_left = 1;
    };

    void maybe_joined_() {
        if (state_ == JoinState::Joining && cack_seen_ && conf_seen_) {
            state_ = JoinState::Joined;
        }
    }

    void queue_query_(const Packet& pkt, const std::vector<std::uint8_t>& header, double now_s,
                      PipelineResult& res) {
        res.disposition = Disposition::QueriedBuffered;
        const auto key = FlowKey::from_header(header);
        if (!key) {
            res.disposition = Disposition::Dropped;
            res.drop_reason = DropReason::FlowDrop;
            return;
        }
        auto it = pending_.find(*key);
        if (it == pending_.end()) {
            PendingQuery pq;
            pq.query_seq = ++query_seq_;
            pq.sent_s = now_s;
            pq.retries_left = cfg_.query_retry_budget;
            pq.prefix.assign(header.begin(),
                             header.begin() + std::min(header.size(), cfg_.ppq_bytes));
            pq.buffered.push_back(pkt);
            FtqMsg ftq;
            ftq.node = id_;
            ftq.query_seq = pq.query_seq;
            ftq.header_prefix = pq.prefix;
            pending_.emplace(*key, std::move(pq));
            ++ftq_emitted_;
            res.query = std::move(ftq);
            return;
        }
        // Quenched: a query is already in flight for this key.
        PendingQuery& pq = it->second;
        pq.buffered.push_back(pkt);
        if (pq.buffered.size() > cfg_.query_buffer) {
            res.buffer_evicted.push_back(std::move(pq.buffered.front()));
            pq.buffered.pop_front();
        }
    }

    void flush_pending_(double now_s, ApplyResult& out) {
        for (auto it = pending_.begin(); it != pending_.end();) {
            if (it->second.buffered.empty()) {
                it = pending_.erase(it);
                continue;
            }
            const auto header = it->second.buffered.front().header_image();
            if (table_.find_live(header, now_s) == nullptr) {
                ++it;
                continue;
            }
            std::deque<Packet> buffered = std::move(it->second.buffered);
            it = pending_.erase(it);
            for (auto& pkt : buffered) {
                PipelineResult r = handle_packet(pkt, now_s);
                out.flushed.emplace_back(std::move(pkt), std::move(r));
            }
        }
    }

    NodeId id_;
    NodeConfig cfg_;
    FlowTable table_;
    JoinState state_ = JoinState::Unstarted;
    bool cack_seen_ = false;
    bool conf_seen_ = false;
    int join_attempts_ = 0;
    std::optional<TrackId> track_;
    std::map<FlowKey, PendingQuery> pending_;
    std::uint16_t query_seq_ = 0;
    std::uint64_t ftq_emitted_ = 0;
    std::uint64_t nsu_emitted_ = 0;
};

} // namespace slicesim
