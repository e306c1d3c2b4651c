#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "slicesim/tsch.hpp"
#include "slicesim/types.hpp"

namespace slicesim {

// Forward gap from one slot offset to another within a repeating slotframe:
// the number of slots a frame waits after arriving at from_slot until
// to_slot comes around. Always in [1, length]; equal offsets wrap to a full
// slotframe.
inline std::uint16_t forward_gap(std::uint16_t length, std::uint16_t from_slot,
                                 std::uint16_t to_slot) {
    return static_cast<std::uint16_t>((to_slot + length - from_slot - 1) % length + 1);
}

// Candidate cells for a new bundle on link from->to: (slot, channel) pairs
// free in both nodes' schedules, ranked by minimal forward gap after the
// ingress slot, ties broken by lower slot then lower channel. Returns
// nullopt when fewer than `count` mutually free slots exist.
inline std::optional<std::vector<CellAddr>> select_candidate_cells(
    const Schedule& sched, NodeId from, NodeId to, std::uint16_t ingress_slot,
    std::size_t count) {
    struct Ranked {
        std::uint16_t gap;
        CellAddr addr;
    };
    std::vector<Ranked> ranked;
    for (std::uint16_t slot = 0; slot < sched.length(); ++slot) {
        if (sched.slot_is_shared(slot)) {
            continue;
        }
        if (sched.node_busy(from, slot) || sched.node_busy(to, slot)) {
            continue;
        }
        auto ch = sched.lowest_free_channel(slot);
        if (!ch) {
            continue;
        }
        ranked.push_back({forward_gap(sched.length(), ingress_slot, slot), {slot, *ch}});
    }
    if (ranked.size() < count) {
        return std::nullopt;
    }
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
        if (a.gap != b.gap) return a.gap < b.gap;
        return a.addr < b.addr;
    });
    std::vector<CellAddr> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back(ranked[i].addr);
    }
    return out;
}

// One hop's reserved cells: {source MAC, destination MAC, track id} plus the
// cell set whose size is the track's per-slotframe bandwidth.
struct CellBundle {
    NodeId src = kNoNode;
    NodeId dst = kNoNode;
    TrackId track = 0;
    std::vector<CellAddr> cells;

    bool operator==(const CellBundle&) const = default;
};

enum class TrackState : std::uint8_t { Allocating, Active, Failed, Released };

inline const char* to_string(TrackState s) {
    switch (s) {
    case TrackState::Allocating: return "Allocating";
    case TrackState::Active: return "Active";
    case TrackState::Failed: return "Failed";
    case TrackState::Released: return "Released";
    }
    return "?";
}

// A Layer-2 forwarding slice: an ordered chain of bundles from a source
// node down to the destination. The egress bundle of hop i is the ingress
// bundle of hop i+1 (one reservation per link).
struct Track {
    TrackId id = 0;
    NodeId source = kNoNode;
    NodeId destination = kNoNode;
    std::vector<NodeId> path;        // source .. destination inclusive
    std::vector<CellBundle> bundles; // one per link, source side first
    TrackState state = TrackState::Allocating;

    // The bundle this node transmits on (its egress), if any.
    const CellBundle* egress_of(NodeId node) const {
        for (std::size_t i = 0; i + 1 < path.size(); ++i) {
            if (path[i] == node && i < bundles.size()) {
                return &bundles[i];
            }
        }
        return nullptr;
    }

    std::optional<NodeId> next_hop_after(NodeId node) const {
        for (std::size_t i = 0; i + 1 < path.size(); ++i) {
            if (path[i] == node) {
                return path[i + 1];
            }
        }
        return std::nullopt;
    }
};

// All tracks known to the run, keyed by id. Switching state for the
// forwarding plane and the source of the per-run track table dump.
class TrackRegistry {
public:
    Track& install(Track t) {
        auto [it, inserted] = tracks_.emplace(t.id, std::move(t));
        if (!inserted) {
            throw SimError("track registry: duplicate track id");
        }
        return it->second;
    }

    Track* find(TrackId id) {
        auto it = tracks_.find(id);
        return it == tracks_.end() ? nullptr : &it->second;
    }

    const Track* find(TrackId id) const {
        auto it = tracks_.find(id);
        return it == tracks_.end() ? nullptr : &it->second;
    }

    const std::map<TrackId, Track>& all() const { return tracks_; }

    // Unlabels every cell still carrying this track's label and returns the
    // cells to the free pool. Cells re-reserved by another track in the
    // meantime are left alone. False signals a double release or an unknown
    // id (a no-op).
    bool release(TrackId id, Schedule& sched) {
        Track* t = find(id);
        if (t == nullptr || t->state == TrackState::Released) {
            return false;
        }
        for (const auto& b : t->bundles) {
            for (const auto& addr : b.cells) {
                const Cell* c = sched.find(addr);
                if (c != nullptr && c->track == id) {
                    sched.remove(addr);
                }
            }
        }
        t->state = TrackState::Released;
        return true;
    }

    // No cell may belong to two tracks.
    std::vector<std::string> audit() const {
        std::vector<std::string> bad;
        std::map<CellAddr, TrackId> seen;
        for (const auto& [id, t] : tracks_) {
            if (t.state != TrackState::Active) {
                continue;
            }
            for (const auto& b : t.bundles) {
                for (const auto& addr : b.cells) {
                    auto [it, inserted] = seen.emplace(addr, id);
                    if (!inserted) {
                        bad.push_back("cell (" + std::to_string(addr.slot) + "," +
                                      std::to_string(addr.channel) + ") in tracks " +
                                      std::to_string(it->second) + " and " + std::to_string(id));
                    }
                }
            }
        }
        return bad;
    }

    std::string dump() const {
        std::ostringstream os;
        for (const auto& [id, t] : tracks_) {
            os << "track " << id << " " << to_string(t.state) << " " << t.source << "->"
               << t.destination << " path";
            for (NodeId n : t.path) {
                os << " " << n;
            }
            os << " bundles";
            for (const auto& b : t.bundles) {
                os << " [" << b.src << ">" << b.dst;
                for (const auto& c : b.cells) {
                    os << " (" << c.slot << "," << c.channel << ")";
                }
                os << "]";
            }
            os << "\n";
        }
        return os.str();
    }

private:
    std::map<TrackId, Track> tracks_;
};

// ---------------------------------------------------------------------------
// Track reservation signaling. These ride the best-effort schedule as
// ordinary frames; the request accumulates the cells chosen at each hop and
// the confirmation retraces the path committing them.
// ---------------------------------------------------------------------------

constexpr std::uint16_t kNoIngressSlot = 0xFFFF;

struct TrackHopChoice {
    NodeId src = kNoNode;
    NodeId dst = kNoNode;
    std::vector<CellAddr> cells;
    bool operator==(const TrackHopChoice&) const = default;
};

struct TrackReqMsg {
    TrackId track = 0;
    NodeId requester = kNoNode;
    NodeId destination = kNoNode;
    std::uint8_t bandwidth = 1;
    std::uint16_t prev_slot = kNoIngressSlot; // ingress slot at the sender
    std::vector<NodeId> path;                 // requester .. destination
    std::vector<TrackHopChoice> chosen;       // accumulated along the way
    bool operator==(const TrackReqMsg&) const = default;
};

struct TrackConfirmMsg {
    TrackId track = 0;
    NodeId requester = kNoNode;
    NodeId destination = kNoNode;
    std::vector<NodeId> path;
    std::vector<TrackHopChoice> bundles;
    bool operator==(const TrackConfirmMsg&) const = default;
};

struct TrackFailMsg {
    TrackId track = 0;
    NodeId requester = kNoNode;
    NodeId failed_at = kNoNode;
    std::vector<NodeId> path; // for retracing toward the requester
    bool operator==(const TrackFailMsg&) const = default;
};

using TrackMsg = std::variant<TrackReqMsg, TrackConfirmMsg, TrackFailMsg>;

namespace detail {

inline void encode_choices(std::vector<std::uint8_t>& out,
                           const std::vector<TrackHopChoice>& choices) {
    out.push_back(static_cast<std::uint8_t>(choices.size()));
    for (const auto& c : choices) {
        put_u16(out, c.src);
        put_u16(out, c.dst);
        out.push_back(static_cast<std::uint8_t>(c.cells.size()));
        for (const auto& addr : c.cells) {
            out.push_back(static_cast<std::uint8_t>(addr.slot));
            out.push_back(static_cast<std::uint8_t>(addr.channel));
        }
    }
}

inline std::vector<TrackHopChoice> decode_choices(Reader& r) {
    std::vector<TrackHopChoice> out;
    const std::uint8_t n = r.u8();
    for (std::uint8_t i = 0; i < n; ++i) {
        TrackHopChoice c;
        c.src = r.u16();
        c.dst = r.u16();
        const std::uint8_t ncells = r.u8();
        for (std::uint8_t j = 0; j < ncells; ++j) {
            CellAddr addr;
            addr.slot = r.u8();
            addr.channel = r.u8();
            c.cells.push_back(addr);
        }
        out.push_back(std::move(c));
    }
    return out;
}

inline void encode_path(std::vector<std::uint8_t>& out, const std::vector<NodeId>& path) {
    out.push_back(static_cast<std::uint8_t>(path.size()));
    for (NodeId n : path) {
        put_u16(out, n);
    }
}

inline std::vector<NodeId> decode_path(Reader& r) {
    std::vector<NodeId> path;
    const std::uint8_t n = r.u8();
    for (std::uint8_t i = 0; i < n; ++i) {
        path.push_back(r.u16());
    }
    return path;
}

} // namespace detail

inline std::vector<std::uint8_t> encode_track_msg(const TrackMsg& msg) {
    std::vector<std::uint8_t> out;
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, TrackReqMsg>) {
                out.push_back(1);
                detail::put_u16(out, m.track);
                detail::put_u16(out, m.requester);
                detail::put_u16(out, m.destination);
                out.push_back(m.bandwidth);
                detail::put_u16(out, m.prev_slot);
                detail::encode_path(out, m.path);
                detail::encode_choices(out, m.chosen);
            } else if constexpr (std::is_same_v<T, TrackConfirmMsg>) {
                out.push_back(2);
                detail::put_u16(out, m.track);
                detail::put_u16(out, m.requester);
                detail::put_u16(out, m.destination);
                detail::encode_path(out, m.path);
                detail::encode_choices(out, m.bundles);
            } else if constexpr (std::is_same_v<T, TrackFailMsg>) {
                out.push_back(3);
                detail::put_u16(out, m.track);
                detail::put_u16(out, m.requester);
                detail::put_u16(out, m.failed_at);
                detail::encode_path(out, m.path);
            }
        },
        msg);
    if (out.size() > kPayloadBudgetBytes) {
        throw CodecError("track message exceeds payload budget (path too long)");
    }
    return out;
}

inline TrackMsg decode_track_msg(std::span<const std::uint8_t> buf) {
    detail::Reader r(buf);
    switch (r.u8()) {
    case 1: {
        TrackReqMsg m;
        m.track = r.u16();
        m.requester = r.u16();
        m.destination = r.u16();
        m.bandwidth = r.u8();
        m.prev_slot = r.u16();
        m.path = detail::decode_path(r);
        m.chosen = detail::decode_choices(r);
        r.expect_end();
        return m;
    }
    case 2: {
        TrackConfirmMsg m;
        m.track = r.u16();
        m.requester = r.u16();
        m.destination = r.u16();
        m.path = detail::decode_path(r);
        m.bundles = detail::decode_choices(r);
        r.expect_end();
        return m;
    }
    case 3: {
        TrackFailMsg m;
        m.track = r.u16();
        m.requester = r.u16();
        m.failed_at = r.u16();
        m.path = detail::decode_path(r);
        r.expect_end();
        return m;
    }
    default:
        throw CodecError("decode: unknown track message kind");
    }
}

} // namespace slicesim
