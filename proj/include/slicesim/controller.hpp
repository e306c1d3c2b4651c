#pragma once

#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "slicesim/codec.hpp"
#include "slicesim/routing.hpp"
#include "slicesim/types.hpp"

namespace slicesim {

struct ControllerPolicy {
    std::uint16_t nsu_period_s = 10;
    std::uint16_t flow_lifetime_s = 60;
    bool afr_enabled = false;
    std::uint32_t afr_hit_threshold = 5;
};

struct OutMsg {
    NodeId dest = kNoNode;
    SdnMessage msg;
};

// The SDN controller at the DAG root. Admits joining nodes, pushes
// configuration, folds NSUs into its network view, and answers flowtable
// queries with entries computed from the DAG. Answers are pure functions of
// (view, DAG, policy): replaying the same inbound trace reproduces the same
// outbound messages.
class Controller {
public:
    struct PushedEntry {
        std::uint16_t entry_id = 0;
        NodeId node = kNoNode;
        FlowKey key;
        double pushed_s = 0; // last install or AFR refresh
        double lifetime_s = 0;
        std::uint32_t hits_reported = 0;
    };

    struct NodeView {
        bool joined = false;
        double joined_s = 0;
        std::optional<double> last_nsu_s;
        std::uint16_t energy = 0;
        std::uint8_t queue_occupancy = 0;
        std::vector<NeighborReport> neighbors;
    };

    Controller(ControllerPolicy policy, const Dag* dag) : policy_(policy), dag_(dag) {}

    const ControllerPolicy& policy() const { return policy_; }

    std::vector<OutMsg> handle_cjoin(const CjoinMsg& msg, double now_s) {
        auto& v = view_[msg.node];
        if (!v.joined) {
            v.joined = true;
            v.joined_s = now_s;
        }
        // Duplicate CJOINs (retries) are re-ACKed with no new state.
        std::vector<OutMsg> out;
        out.push_back({msg.node, CackMsg{msg.node, msg.join_seq}});
        out.push_back({msg.node, ConfMsg{policy_.nsu_period_s, policy_.flow_lifetime_s}});
        log_(now_s, brief_(SdnMessage{msg}), out);
        return out;
    }

    std::vector<OutMsg> handle_ftq(const FtqMsg& msg, double now_s) {
        std::vector<OutMsg> out;
        auto vit = view_.find(msg.node);
        if (vit == view_.end() || !vit->second.joined) {
            ++ftq_from_unjoined_;
            log_(now_s, brief_(SdnMessage{msg}) + " [unjoined, ignored]", out);
            return out;
        }
        const auto key = FlowKey::from_header(msg.header_prefix);
        if (!key) {
            ++malformed_queries_;
            log_(now_s, brief_(SdnMessage{msg}) + " [malformed, ignored]", out);
            return out;
        }

        FlowEntrySpec spec;
        spec.entry_id = next_entry_id_++;
        spec.lifetime_s = policy_.flow_lifetime_s;
        spec.match.push_back(MatchField::on_class(key->cls));
        spec.match.push_back(MatchField::on_dst(key->dst));
        if (key->dst >= dag_->node_count()) {
            spec.action = Action::drop(); // negative caching for unknown targets
        } else if (key->dst == dag_->root() && msg.node != dag_->root()) {
            spec.action = Action::forward(dag_->parent(msg.node));
        } else if (msg.node == dag_->root()) {
            spec.action = Action::srh_push(dag_->source_route(key->dst));
        } else {
            // Lateral traffic climbs toward the root, which re-routes it.
            spec.action = Action::forward(dag_->parent(msg.node));
        }

        pushed_.push_back({spec.entry_id, msg.node, *key, now_s,
                           static_cast<double>(spec.lifetime_s), 0});
        FtsMsg fts;
        fts.node = msg.node;
        fts.entries.push_back(std::move(spec));
        out.push_back({msg.node, std::move(fts)});
        log_(now_s, brief_(SdnMessage{msg}), out);
        return out;
    }

    std::vector<OutMsg> handle_nsu(const NsuMsg& msg, double now_s) {
        std::vector<OutMsg> out;
        auto vit = view_.find(msg.node);
        if (vit == view_.end() || !vit->second.joined) {
            ++nsu_from_unjoined_;
            log_(now_s, brief_(SdnMessage{msg}) + " [unjoined, ignored]", out);
            return out;
        }
        NodeView& v = vit->second;
        v.last_nsu_s = now_s;
        v.energy = msg.energy;
        v.queue_occupancy = msg.queue_occupancy;
        v.neighbors = msg.neighbors;

        std::vector<std::uint16_t> refresh;
        for (const auto& st : msg.entry_stats) {
            for (auto& pe : pushed_) {
                if (pe.entry_id != st.entry_id || pe.node != msg.node) {
                    continue;
                }
                pe.hits_reported += st.hits;
                const double remaining = pe.pushed_s + pe.lifetime_s - now_s;
                if (policy_.afr_enabled && st.hits >= policy_.afr_hit_threshold &&
                    remaining < policy_.nsu_period_s && remaining > 0) {
                    refresh.push_back(pe.entry_id);
                    pe.pushed_s = now_s; // mirrors the node-side lifetimer reset
                }
            }
        }
        if (!refresh.empty()) {
            FtsMsg fts;
            fts.node = msg.node;
            fts.refresh_ids = std::move(refresh);
            out.push_back({msg.node, std::move(fts)});
        }
        log_(now_s, brief_(SdnMessage{msg}), out);
        return out;
    }

    // --- network view -------------------------------------------------------

    const NodeView* view_of(NodeId node) const {
        auto it = view_.find(node);
        return it == view_.end() ? nullptr : &it->second;
    }

    bool is_joined(NodeId node) const {
        auto it = view_.find(node);
        return it != view_.end() && it->second.joined;
    }

    // Staleness: view age since the last NSU (since join when none arrived
    // yet). The view reflects only received messages, so this is exactly the
    // controller's uncertainty about the node.
    std::optional<double> staleness_s(NodeId node, double now_s) const {
        auto it = view_.find(node);
        if (it == view_.end() || !it->second.joined) {
            return std::nullopt;
        }
        return now_s - it->second.last_nsu_s.value_or(it->second.joined_s);
    }

    std::vector<NodeId> stale_nodes(double now_s, double factor = 3.0) const {
        std::vector<NodeId> out;
        for (const auto& [node, v] : view_) {
            auto s = staleness_s(node, now_s);
            if (s && *s > factor * policy_.nsu_period_s) {
                out.push_back(node);
            }
        }
        return out;
    }

    const std::vector<PushedEntry>& pushed_entries() const { return pushed_; }

    // Bookkeeping consistency: entries the controller believes live were
    // pushed (or refreshed) within their lifetime.
    bool view_consistent(double now_s) const {
        for (const auto& pe : pushed_) {
            if (now_s - pe.pushed_s < 0) {
                return false;
            }
        }
        return true;
    }

    std::uint64_t nsu_from_unjoined() const { return nsu_from_unjoined_; }
    std::uint64_t ftq_from_unjoined() const { return ftq_from_unjoined_; }

    // --- decision log -------------------------------------------------------

    struct LogEntry {
        double t_s;
        std::string in;
        std::vector<std::string> out;
    };
    const std::vector<LogEntry>& decision_log() const { return log_entries_; }

    std::string dump_log() const {
        std::ostringstream os;
        for (const auto& e : log_entries_) {
            os << e.t_s << " in=" << e.in;
            for (const auto& o : e.out) {
                os << " out=" << o;
            }
            os << "\n";
        }
        return os.str();
    }

private:
    static std::string brief_(const SdnMessage& msg) {
        std::ostringstream os;
        std::visit(
            [&](const auto& m) {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, CjoinMsg>) {
                    os << "CJOIN(node=" << m.node << ",seq=" << int(m.join_seq) << ")";
                } else if constexpr (std::is_same_v<T, CackMsg>) {
                    os << "CACK(node=" << m.node << ",seq=" << int(m.join_seq) << ")";
                } else if constexpr (std::is_same_v<T, ConfMsg>) {
                    os << "CONF(nsu=" << m.nsu_period_s << "s,life=" << m.flow_lifetime_s << "s)";
                } else if constexpr (std::is_same_v<T, NsuMsg>) {
                    os << "NSU(node=" << m.node << ",energy=" << m.energy
                       << ",queue=" << int(m.queue_occupancy) << ",nbrs=" << m.neighbors.size()
                       << ",stats=" << m.entry_stats.size() << ")";
                } else if constexpr (std::is_same_v<T, FtqMsg>) {
                    os << "FTQ(node=" << m.node << ",seq=" << m.query_seq
                       << ",prefix=" << m.header_prefix.size() << "B)";
                } else if constexpr (std::is_same_v<T, FtsMsg>) {
                    os << "FTS(node=" << m.node << ",entries=" << m.entries.size()
                       << ",refresh=" << m.refresh_ids.size() << ")";
                }
            },
            msg);
        return os.str();
    }

    void log_(double now_s, std::string in, const std::vector<OutMsg>& out) {
        LogEntry e;
        e.t_s = now_s;
        e.in = std::move(in);
        for (const auto& o : out) {
            e.out.push_back(brief_(o.msg) + "->" + std::to_string(o.dest));
        }
        log_entries_.push_back(std::move(e));
    }

    ControllerPolicy policy_;
    const Dag* dag_;
    std::map<NodeId, NodeView> view_;
    std::vector<PushedEntry> pushed_;
    std::uint16_t next_entry_id_ = 1;
    std::uint64_t nsu_from_unjoined_ = 0;
    std::uint64_t ftq_from_unjoined_ = 0;
    std::uint64_t malformed_queries_ = 0;
    std::vector<LogEntry> log_entries_;
};

} // namespace slicesim
