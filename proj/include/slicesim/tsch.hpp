#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "slicesim/codec.hpp"
#include "slicesim/types.hpp"

namespace slicesim {

enum class CellKind : std::uint8_t { Dedicated = 0, Shared = 1 };
enum class CellState : std::uint8_t { Committed = 0, Tentative = 1 };

struct CellAddr {
    std::uint16_t slot = 0;
    std::uint16_t channel = 0;
    auto operator<=>(const CellAddr&) const = default;
};

struct Cell {
    std::uint16_t slot_offset = 0;
    std::uint16_t channel_offset = 0;
    CellKind kind = CellKind::Dedicated;
    NodeId src = kNoNode; // owner link; shared cells carry none
    NodeId dst = kNoNode;
    std::optional<TrackId> track;
    CellState state = CellState::Committed;

    CellAddr addr() const { return {slot_offset, channel_offset}; }
    bool involves(NodeId n) const { return src == n || dst == n; }
};

// The global TSCH schedule: a repeating slotframe of (slot, channel) cells.
// Mutations validate the structural invariants up front: unique (slot,
// channel) pairs, half-duplex nodes, and shared slots that carry nothing
// else (every node may contend there).
class Schedule {
public:
    Schedule(std::uint16_t length, std::uint16_t channel_count)
        : length_(length), channel_count_(channel_count), by_slot_(length) {
        if (length_ < 1 || channel_count_ < 1) {
            throw ScenarioError("schedule: slotframe length and channel count must be >= 1");
        }
        hop_sequence_.resize(channel_count_);
        for (std::uint16_t i = 0; i < channel_count_; ++i) {
            hop_sequence_[i] = i; // identity hop sequence by default
        }
    }

    std::uint16_t length() const { return length_; }
    std::uint16_t channel_count() const { return channel_count_; }

    void set_hop_sequence(std::vector<std::uint16_t> seq) {
        if (seq.size() != channel_count_) {
            throw ScenarioError("schedule: hop sequence length must equal channel count");
        }
        hop_sequence_ = std::move(seq);
    }

    // Channel hopping: the physical channel for a cell at a given asn.
    std::uint16_t physical_channel(Asn asn, std::uint16_t channel_offset) const {
        return hop_sequence_[(asn + channel_offset) % channel_count_];
    }

    const std::vector<Cell>& cells_at(std::uint16_t slot) const { return by_slot_.at(slot); }

    std::size_t cell_count() const {
        std::size_t n = 0;
        for (const auto& v : by_slot_) {
            n += v.size();
        }
        return n;
    }

    std::size_t shared_slot_count() const {
        std::size_t n = 0;
        for (const auto& v : by_slot_) {
            for (const auto& c : v) {
                if (c.kind == CellKind::Shared) {
                    ++n;
                }
            }
        }
        return n;
    }

    bool slot_is_shared(std::uint16_t slot) const {
        const auto& v = by_slot_.at(slot);
        return !v.empty() && v.front().kind == CellKind::Shared;
    }

    // A node is busy at a slot when it takes part in any cell there (shared
    // slots involve everyone).
    bool node_busy(NodeId n, std::uint16_t slot) const {
        for (const auto& c : by_slot_.at(slot)) {
            if (c.kind == CellKind::Shared || c.involves(n)) {
                return true;
            }
        }
        return false;
    }

    std::optional<std::uint16_t> lowest_free_channel(std::uint16_t slot) const {
        const auto& v = by_slot_.at(slot);
        std::uint16_t ch = 0;
        for (const auto& c : v) { // sorted by channel
            if (c.channel_offset == ch) {
                ++ch;
            } else if (c.channel_offset > ch) {
                break;
            }
        }
        if (ch >= channel_count_) {
            return std::nullopt;
        }
        return ch;
    }

    const Cell* find(CellAddr addr) const {
        if (addr.slot >= length_) {
            return nullptr;
        }
        for (const auto& c : by_slot_[addr.slot]) {
            if (c.channel_offset == addr.channel) {
                return &c;
            }
        }
        return nullptr;
    }

    void add_dedicated(CellAddr addr, NodeId src, NodeId dst,
                       std::optional<TrackId> track = std::nullopt,
                       CellState state = CellState::Committed) {
        validate_addr_(addr);
        if (src == dst || src == kNoNode || dst == kNoNode) {
            throw SimError("schedule: dedicated cell needs a proper owner link");
        }
        if (find(addr) != nullptr) {
            throw SimError("schedule: cell already allocated at (" + std::to_string(addr.slot) +
                           "," + std::to_string(addr.channel) + ")");
        }
        if (slot_is_shared(addr.slot)) {
            throw SimError("schedule: slot " + std::to_string(addr.slot) + " is a shared slot");
        }
        if (node_busy(src, addr.slot) || node_busy(dst, addr.slot)) {
            throw SimError("schedule: half-duplex conflict at slot " + std::to_string(addr.slot));
        }
        Cell c;
        c.slot_offset = addr.slot;
        c.channel_offset = addr.channel;
        c.kind = CellKind::Dedicated;
        c.src = src;
        c.dst = dst;
        c.track = track;
        c.state = state;
        insert_(c);
    }

    void add_shared(CellAddr addr) {
        validate_addr_(addr);
        if (!by_slot_[addr.slot].empty()) {
            throw SimError("schedule: shared slot must be exclusive");
        }
        Cell c;
        c.slot_offset = addr.slot;
        c.channel_offset = addr.channel;
        c.kind = CellKind::Shared;
        insert_(c);
    }

    bool remove(CellAddr addr) {
        if (addr.slot >= length_) {
            return false;
        }
        auto& v = by_slot_[addr.slot];
        for (auto it = v.begin(); it != v.end(); ++it) {
            if (it->channel_offset == addr.channel) {
                v.erase(it);
                return true;
            }
        }
        return false;
    }

    bool commit(CellAddr addr) {
        if (addr.slot >= length_) {
            return false;
        }
        for (auto& c : by_slot_[addr.slot]) {
            if (c.channel_offset == addr.channel && c.state == CellState::Tentative) {
                c.state = CellState::Committed;
                return true;
            }
        }
        return false;
    }

    std::vector<Cell> cells_of_track(TrackId track) const {
        std::vector<Cell> out;
        for (const auto& v : by_slot_) {
            for (const auto& c : v) {
                if (c.track == track) {
                    out.push_back(c);
                }
            }
        }
        return out;
    }

    // Full structural audit; returns human-readable violations (empty when
    // the schedule is consistent).
    std::vector<std::string> audit() const {
        std::vector<std::string> bad;
        for (std::uint16_t slot = 0; slot < length_; ++slot) {
            const auto& v = by_slot_[slot];
            std::vector<NodeId> seen;
            bool has_shared = false;
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (i > 0 && v[i].channel_offset == v[i - 1].channel_offset) {
                    bad.push_back("duplicate cell at slot " + std::to_string(slot));
                }
                if (v[i].kind == CellKind::Shared) {
                    has_shared = true;
                } else {
                    for (NodeId n : {v[i].src, v[i].dst}) {
                        if (std::find(seen.begin(), seen.end(), n) != seen.end()) {
                            bad.push_back("node " + std::to_string(n) +
                                          " double-booked at slot " + std::to_string(slot));
                        }
                        seen.push_back(n);
                    }
                }
            }
            if (has_shared && v.size() > 1) {
                bad.push_back("shared slot " + std::to_string(slot) + " is not exclusive");
            }
        }
        return bad;
    }

    // Canonical byte serialization of the whole schedule, for rollback
    // comparisons and determinism checks.
    std::vector<std::uint8_t> snapshot() const {
        std::vector<std::uint8_t> out;
        for (const auto& v : by_slot_) {
            for (const auto& c : v) {
                out.push_back(static_cast<std::uint8_t>(c.slot_offset));
                out.push_back(static_cast<std::uint8_t>(c.channel_offset));
                out.push_back(static_cast<std::uint8_t>(c.kind));
                out.push_back(static_cast<std::uint8_t>(c.state));
                Packet::put_u16(out, c.src);
                Packet::put_u16(out, c.dst);
                Packet::put_u16(out, c.track.value_or(0xFFFF));
            }
        }
        return out;
    }

    // Text grid for docs/debugging: rows are channel offsets, columns slot
    // offsets, dedicated cells annotated with owner link and track label.
    std::string dump_grid() const {
        std::ostringstream os;
        os << "slotframe " << length_ << " slots x " << channel_count_ << " channels, "
           << shared_slot_count() << " shared\n";
        std::uint16_t max_ch = 0;
        for (const auto& v : by_slot_) {
            for (const auto& c : v) {
                max_ch = std::max(max_ch, c.channel_offset);
            }
        }
        os << "ch\\slot";
        for (std::uint16_t s = 0; s < length_; ++s) {
            os << "|" << pad_(std::to_string(s));
        }
        os << "\n";
        for (std::uint16_t ch = 0; ch <= max_ch; ++ch) {
            os << "     " << pad_(std::to_string(ch), 2);
            for (std::uint16_t s = 0; s < length_; ++s) {
                std::string txt;
                for (const auto& c : by_slot_[s]) {
                    if (c.channel_offset != ch) {
                        continue;
                    }
                    if (c.kind == CellKind::Shared) {
                        txt = "SHARED";
                    } else {
                        txt = std::to_string(c.src) + ">" + std::to_string(c.dst);
                        if (c.track) {
                            txt += "#" + std::to_string(*c.track);
                        }
                        if (c.state == CellState::Tentative) {
                            txt += "?";
                        }
                    }
                }
                os << "|" << pad_(txt);
            }
            os << "\n";
        }
        return os.str();
    }

private:
    void validate_addr_(CellAddr addr) const {
        if (addr.slot >= length_ || addr.channel >= channel_count_) {
            throw SimError("schedule: cell (" + std::to_string(addr.slot) + "," +
                           std::to_string(addr.channel) + ") out of bounds");
        }
    }

    void insert_(const Cell& c) {
        auto& v = by_slot_[c.slot_offset];
        auto it = std::lower_bound(v.begin(), v.end(), c.channel_offset,
                                   [](const Cell& a, std::uint16_t ch) {
                                       return a.channel_offset < ch;
                                   });
        v.insert(it, c);
    }

    static std::string pad_(std::string s, std::size_t w = 8) {
        if (s.size() < w) {
            s.insert(0, w - s.size(), ' ');
        }
        return s;
    }

    std::uint16_t length_;
    std::uint16_t channel_count_;
    std::vector<std::vector<Cell>> by_slot_; // per slot, sorted by channel
    std::vector<std::uint16_t> hop_sequence_;
};

// Default schedule for an H-hop chain: an uplink ladder (hop k to k-1 at
// slot H-k+1, so a frame can ride the whole chain within one slotframe), a
// downlink ladder fitted around it on further channels, and the shared
// slots packed at the tail of the slotframe. Remaining cells are left free
// for track reservations.
inline Schedule build_chain_schedule(int hops, std::uint16_t length, std::uint16_t channels,
                                     std::uint16_t shared_slots) {
    Schedule sched(length, channels);
    if (shared_slots >= length) {
        throw ScenarioError("schedule: shared slots must leave room for dedicated cells");
    }
    const std::uint16_t first_shared = static_cast<std::uint16_t>(length - shared_slots);
    for (std::uint16_t i = 0; i < shared_slots; ++i) {
        sched.add_shared({static_cast<std::uint16_t>(first_shared + i), 0});
    }
    auto place = [&](NodeId src, NodeId dst, std::uint16_t preferred) -> std::uint16_t {
        for (std::uint16_t off = 0; off < first_shared; ++off) {
            const auto slot = static_cast<std::uint16_t>((preferred + off) % first_shared);
            if (slot == 0) {
                continue; // slot 0 kept free for tracks
            }
            if (sched.node_busy(src, slot) || sched.node_busy(dst, slot)) {
                continue;
            }
            if (auto ch = sched.lowest_free_channel(slot)) {
                sched.add_dedicated({slot, *ch}, src, dst);
                return slot;
            }
        }
        throw ScenarioError("schedule: no room for link " + std::to_string(src) + ">" +
                            std::to_string(dst) + "; increase slotframe length");
    };
    // Each ladder chains hop k's cell after hop k-1's so a frame can make
    // every hop within a single slotframe pass.
    std::uint16_t prev = 0;
    for (int k = hops; k >= 1; --k) {
        prev = place(static_cast<NodeId>(k), static_cast<NodeId>(k - 1),
                     static_cast<std::uint16_t>((prev + 1) % first_shared));
    }
    prev = 0;
    for (int k = 1; k <= hops; ++k) {
        prev = place(static_cast<NodeId>(k - 1), static_cast<NodeId>(k),
                     static_cast<std::uint16_t>((prev + 1) % first_shared));
    }
    return sched;
}

// A frame: one packet being carried across one MAC hop.
struct Frame {
    Packet pkt;
    NodeId from = kNoNode;
    NodeId to = kNoNode;
    std::uint8_t retries = 0;
    bool on_track = false;
    TrackId track = 0;
    std::uint64_t enqueue_seq = 0;
};

// Per-node transmit queues: one best-effort FIFO per neighbor plus one FIFO
// per track. Track frames are only drained by cells labeled with that
// track; best-effort frames never use track cells.
class TxQueues {
public:
    explicit TxQueues(std::size_t capacity = 8) : capacity_(capacity) {}

    std::size_t capacity() const { return capacity_; }

    bool enqueue_best_effort(NodeId neighbor, Frame f) {
        auto& q = best_effort_[neighbor];
        if (q.size() >= capacity_) {
            return false;
        }
        q.push_back(std::move(f));
        return true;
    }

    bool enqueue_track(TrackId track, Frame f) {
        auto& q = track_[track];
        if (q.size() >= capacity_) {
            return false;
        }
        q.push_back(std::move(f));
        return true;
    }

    Frame* best_effort_head(NodeId neighbor) {
        auto it = best_effort_.find(neighbor);
        if (it == best_effort_.end() || it->second.empty()) {
            return nullptr;
        }
        return &it->second.front();
    }

    Frame* track_head(TrackId track) {
        auto it = track_.find(track);
        if (it == track_.end() || it->second.empty()) {
            return nullptr;
        }
        return &it->second.front();
    }

    void pop_best_effort(NodeId neighbor) { best_effort_.at(neighbor).pop_front(); }
    void pop_track(TrackId track) { track_.at(track).pop_front(); }

    bool has_best_effort_pending() const {
        for (const auto& [nb, q] : best_effort_) {
            if (!q.empty()) {
                return true;
            }
        }
        return false;
    }

    // Head frame with the smallest enqueue sequence across all best-effort
    // queues; used by shared-cell contention.
    Frame* oldest_best_effort_head(NodeId* neighbor_out = nullptr) {
        Frame* best = nullptr;
        for (auto& [nb, q] : best_effort_) {
            if (q.empty()) {
                continue;
            }
            if (best == nullptr || q.front().enqueue_seq < best->enqueue_seq) {
                best = &q.front();
                if (neighbor_out) {
                    *neighbor_out = nb;
                }
            }
        }
        return best;
    }

    std::size_t total_occupancy() const {
        std::size_t n = 0;
        for (const auto& [nb, q] : best_effort_) {
            n += q.size();
        }
        for (const auto& [t, q] : track_) {
            n += q.size();
        }
        return n;
    }

    std::vector<Frame> drain_track(TrackId track) {
        std::vector<Frame> out;
        auto it = track_.find(track);
        if (it != track_.end()) {
            out.assign(it->second.begin(), it->second.end());
            track_.erase(it);
        }
        return out;
    }

private:
    std::size_t capacity_;
    std::map<NodeId, std::deque<Frame>> best_effort_;
    std::map<TrackId, std::deque<Frame>> track_;
};

} // namespace slicesim
