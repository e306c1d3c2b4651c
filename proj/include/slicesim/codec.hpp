#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "slicesim/types.hpp"

namespace slicesim {

// ---------------------------------------------------------------------------
// Packet header image
//
// Every network-layer packet carries a fixed byte header that the
// protocol-oblivious flowtable matches against:
//
//   offset 0      flow class (u8)
//   offset 1..2   source node (u16 be)
//   offset 3..4   destination node (u16 be)
//   offset 5..6   end-to-end sequence (u16 be)
//   offset 7      SRH hop count (u8)
//   offset 8..    SRH hops, u16 be each
//
// A frame on air is kFrameOverheadBytes (MAC framing + this base header)
// plus SRH hops plus the payload, and must fit in kMaxFrameBytes.
// ---------------------------------------------------------------------------

constexpr std::size_t kHeaderBaseBytes = 8;

struct Packet {
    PacketId id = 0;
    FlowClass cls = FlowClass::App;
    NodeId src = 0;
    NodeId dst = 0;
    std::uint16_t seq = 0;
    std::vector<NodeId> srh;    // remaining source-route hops, in travel order
    std::vector<std::uint8_t> payload;

    std::size_t header_bytes() const { return kHeaderBaseBytes + 2 * srh.size(); }
    std::size_t wire_bytes() const { return kFrameOverheadBytes + 2 * srh.size() + payload.size(); }

    std::vector<std::uint8_t> header_image() const {
        std::vector<std::uint8_t> h;
        h.reserve(header_bytes());
        h.push_back(static_cast<std::uint8_t>(cls));
        put_u16(h, src);
        put_u16(h, dst);
        put_u16(h, seq);
        h.push_back(static_cast<std::uint8_t>(srh.size()));
        for (NodeId hop : srh) {
            put_u16(h, hop);
        }
        return h;
    }

    static void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
        out.push_back(static_cast<std::uint8_t>(v >> 8));
        out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    }
};

// ---------------------------------------------------------------------------
// Flowtable match/action wire structures (shared with the flowtable module)
// ---------------------------------------------------------------------------

struct MatchField {
    std::uint8_t offset = 0;
    std::vector<std::uint8_t> value;
    std::vector<std::uint8_t> mask; // same length as value

    bool matches(std::span<const std::uint8_t> header) const {
        if (offset + value.size() > header.size()) {
            return false;
        }
        for (std::size_t i = 0; i < value.size(); ++i) {
            if ((header[offset + i] & mask[i]) != (value[i] & mask[i])) {
                return false;
            }
        }
        return true;
    }

    static MatchField exact(std::uint8_t offset, std::vector<std::uint8_t> value) {
        MatchField f;
        f.offset = offset;
        f.mask.assign(value.size(), 0xFF);
        f.value = std::move(value);
        return f;
    }

    static MatchField on_class(FlowClass cls) {
        return exact(0, {static_cast<std::uint8_t>(cls)});
    }

    static MatchField on_dst(NodeId dst) {
        return exact(3, {static_cast<std::uint8_t>(dst >> 8), static_cast<std::uint8_t>(dst & 0xFF)});
    }

    bool operator==(const MatchField&) const = default;
};

enum class ActionKind : std::uint8_t { Forward = 0, Drop = 1, SrhPush = 2, Query = 3 };

struct Action {
    ActionKind kind = ActionKind::Drop;
    NodeId next_hop = kNoNode;  // Forward
    std::vector<NodeId> route;  // SrhPush

    static Action forward(NodeId next) { return Action{ActionKind::Forward, next, {}}; }
    static Action drop() { return Action{ActionKind::Drop, kNoNode, {}}; }
    static Action srh_push(std::vector<NodeId> r) { return Action{ActionKind::SrhPush, kNoNode, std::move(r)}; }

    bool operator==(const Action&) const = default;
};

struct FlowEntrySpec {
    std::uint16_t entry_id = 0;
    std::uint16_t lifetime_s = 0;
    std::vector<MatchField> match; // conjunction
    Action action;

    bool operator==(const FlowEntrySpec&) const = default;
};

// ---------------------------------------------------------------------------
// SDN controller protocol messages
// ---------------------------------------------------------------------------

struct NeighborReport {
    NodeId id = 0;
    std::uint8_t link_estimate = 0; // delivery ratio scaled to 0..255
    bool operator==(const NeighborReport&) const = default;
};

struct EntryStat {
    std::uint16_t entry_id = 0;
    std::uint8_t hits = 0; // hits since the previous NSU, saturating
    bool operator==(const EntryStat&) const = default;
};

struct CjoinMsg {
    NodeId node = 0;
    std::uint8_t join_seq = 0;
    bool operator==(const CjoinMsg&) const = default;
};

struct CackMsg {
    NodeId node = 0;
    std::uint8_t join_seq = 0;
    bool operator==(const CackMsg&) const = default;
};

struct ConfMsg {
    std::uint16_t nsu_period_s = 0;
    std::uint16_t flow_lifetime_s = 0;
    bool operator==(const ConfMsg&) const = default;
};

struct NsuMsg {
    NodeId node = 0;
    std::uint16_t energy = 0;
    std::uint8_t queue_occupancy = 0;
    std::vector<NeighborReport> neighbors; // at most 15 on the wire
    std::vector<EntryStat> entry_stats;    // at most 15 on the wire
    bool operator==(const NsuMsg&) const = default;
};

struct FtqMsg {
    NodeId node = 0;
    std::uint16_t query_seq = 0;
    std::vector<std::uint8_t> header_prefix; // first ppq_bytes of the missed header
    bool operator==(const FtqMsg&) const = default;
};

struct FtsMsg {
    NodeId node = 0; // addressee
    std::vector<FlowEntrySpec> entries;
    std::vector<std::uint16_t> refresh_ids; // AFR lifetimer resets
    bool operator==(const FtsMsg&) const = default;
};

using SdnMessage = std::variant<CjoinMsg, CackMsg, ConfMsg, NsuMsg, FtqMsg, FtsMsg>;

enum class MsgKind : std::uint8_t { Cjoin = 1, Cack = 2, Conf = 3, Nsu = 4, Ftq = 5, Fts = 6 };

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    Packet::put_u16(out, v);
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> buf) : buf_(buf) {}

    std::uint8_t u8() {
        need_(1);
        return buf_[pos_++];
    }
    std::uint16_t u16() {
        need_(2);
        std::uint16_t v = static_cast<std::uint16_t>(buf_[pos_] << 8 | buf_[pos_ + 1]);
        pos_ += 2;
        return v;
    }
    std::vector<std::uint8_t> bytes(std::size_t n) {
        need_(n);
        std::vector<std::uint8_t> v(buf_.begin() + pos_, buf_.begin() + pos_ + n);
        pos_ += n;
        return v;
    }
    std::size_t remaining() const { return buf_.size() - pos_; }
    void expect_end() const {
        if (pos_ != buf_.size()) {
            throw CodecError("decode: trailing bytes");
        }
    }

private:
    void need_(std::size_t n) const {
        if (pos_ + n > buf_.size()) {
            throw CodecError("decode: message truncated");
        }
    }
    std::span<const std::uint8_t> buf_;
    std::size_t pos_ = 0;
};

inline void encode_entry(std::vector<std::uint8_t>& out, const FlowEntrySpec& e) {
    put_u16(out, e.entry_id);
    put_u16(out, e.lifetime_s);
    out.push_back(static_cast<std::uint8_t>(e.match.size()));
    for (const auto& m : e.match) {
        out.push_back(m.offset);
        out.push_back(static_cast<std::uint8_t>(m.value.size()));
        out.insert(out.end(), m.value.begin(), m.value.end());
        out.insert(out.end(), m.mask.begin(), m.mask.end());
    }
    out.push_back(static_cast<std::uint8_t>(e.action.kind));
    switch (e.action.kind) {
    case ActionKind::Forward:
        put_u16(out, e.action.next_hop);
        break;
    case ActionKind::SrhPush:
        out.push_back(static_cast<std::uint8_t>(e.action.route.size()));
        for (NodeId hop : e.action.route) {
            put_u16(out, hop);
        }
        break;
    case ActionKind::Drop:
    case ActionKind::Query:
        break;
    }
}

inline FlowEntrySpec decode_entry(Reader& r) {
    FlowEntrySpec e;
    e.entry_id = r.u16();
    e.lifetime_s = r.u16();
    const std::uint8_t n_match = r.u8();
    for (std::uint8_t i = 0; i < n_match; ++i) {
        MatchField m;
        m.offset = r.u8();
        const std::uint8_t len = r.u8();
        m.value = r.bytes(len);
        m.mask = r.bytes(len);
        e.match.push_back(std::move(m));
    }
    e.action.kind = static_cast<ActionKind>(r.u8());
    switch (e.action.kind) {
    case ActionKind::Forward:
        e.action.next_hop = r.u16();
        break;
    case ActionKind::SrhPush: {
        const std::uint8_t n = r.u8();
        for (std::uint8_t i = 0; i < n; ++i) {
            e.action.route.push_back(r.u16());
        }
        break;
    }
    case ActionKind::Drop:
    case ActionKind::Query:
        break;
    default:
        throw CodecError("decode: unknown action kind");
    }
    return e;
}

} // namespace detail

// Serializes a controller protocol message. Field order and widths are
// fixed (documented in docs/protocol.md) so sizes are bit-exact across
// implementations. NSU neighbor and entry-stat lists are truncated to the
// 15 each that fit the packed count byte; anything still over the payload
// budget is a bug and throws.
inline std::vector<std::uint8_t> encode_message(const SdnMessage& msg) {
    std::vector<std::uint8_t> out;
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, CjoinMsg>) {
                out.push_back(static_cast<std::uint8_t>(MsgKind::Cjoin));
                detail::put_u16(out, m.node);
                out.push_back(m.join_seq);
            } else if constexpr (std::is_same_v<T, CackMsg>) {
                out.push_back(static_cast<std::uint8_t>(MsgKind::Cack));
                detail::put_u16(out, m.node);
                out.push_back(m.join_seq);
            } else if constexpr (std::is_same_v<T, ConfMsg>) {
                out.push_back(static_cast<std::uint8_t>(MsgKind::Conf));
                detail::put_u16(out, m.nsu_period_s);
                detail::put_u16(out, m.flow_lifetime_s);
            } else if constexpr (std::is_same_v<T, NsuMsg>) {
                out.push_back(static_cast<std::uint8_t>(MsgKind::Nsu));
                detail::put_u16(out, m.node);
                detail::put_u16(out, m.energy);
                out.push_back(m.queue_occupancy);
                const std::size_t nn = std::min<std::size_t>(m.neighbors.size(), 15);
                const std::size_t ns = std::min<std::size_t>(m.entry_stats.size(), 15);
                out.push_back(static_cast<std::uint8_t>(nn << 4 | ns));
                for (std::size_t i = 0; i < nn; ++i) {
                    detail::put_u16(out, m.neighbors[i].id);
                    out.push_back(m.neighbors[i].link_estimate);
                }
                for (std::size_t i = 0; i < ns; ++i) {
                    detail::put_u16(out, m.entry_stats[i].entry_id);
                    out.push_back(m.entry_stats[i].hits);
                }
            } else if constexpr (std::is_same_v<T, FtqMsg>) {
                out.push_back(static_cast<std::uint8_t>(MsgKind::Ftq));
                detail::put_u16(out, m.node);
                detail::put_u16(out, m.query_seq);
                out.insert(out.end(), m.header_prefix.begin(), m.header_prefix.end());
            } else if constexpr (std::is_same_v<T, FtsMsg>) {
                out.push_back(static_cast<std::uint8_t>(MsgKind::Fts));
                detail::put_u16(out, m.node);
                out.push_back(static_cast<std::uint8_t>(m.entries.size()));
                for (const auto& e : m.entries) {
                    detail::encode_entry(out, e);
                }
                out.push_back(static_cast<std::uint8_t>(m.refresh_ids.size()));
                for (std::uint16_t id : m.refresh_ids) {
                    detail::put_u16(out, id);
                }
            }
        },
        msg);
    if (out.size() > kPayloadBudgetBytes) {
        throw CodecError("encode: message of " + std::to_string(out.size()) +
                         " bytes exceeds the " + std::to_string(kPayloadBudgetBytes) +
                         "-byte payload budget");
    }
    return out;
}

inline std::size_t encoded_size(const SdnMessage& msg) {
    return encode_message(msg).size();
}

inline SdnMessage decode_message(std::span<const std::uint8_t> buf) {
    detail::Reader r(buf);
    const auto kind = static_cast<MsgKind>(r.u8());
    switch (kind) {
    case MsgKind::Cjoin: {
        CjoinMsg m;
        m.node = r.u16();
        m.join_seq = r.u8();
        r.expect_end();
        return m;
    }
    case MsgKind::Cack: {
        CackMsg m;
        m.node = r.u16();
        m.join_seq = r.u8();
        r.expect_end();
        return m;
    }
    case MsgKind::Conf: {
        ConfMsg m;
        m.nsu_period_s = r.u16();
        m.flow_lifetime_s = r.u16();
        r.expect_end();
        return m;
    }
    case MsgKind::Nsu: {
        NsuMsg m;
        m.node = r.u16();
        m.energy = r.u16();
        m.queue_occupancy = r.u8();
        const std::uint8_t counts = r.u8();
        const std::uint8_t nn = counts >> 4;
        const std::uint8_t ns = counts & 0x0F;
        for (std::uint8_t i = 0; i < nn; ++i) {
            NeighborReport nb;
            nb.id = r.u16();
            nb.link_estimate = r.u8();
            m.neighbors.push_back(nb);
        }
        for (std::uint8_t i = 0; i < ns; ++i) {
            EntryStat st;
            st.entry_id = r.u16();
            st.hits = r.u8();
            m.entry_stats.push_back(st);
        }
        r.expect_end();
        return m;
    }
    case MsgKind::Ftq: {
        FtqMsg m;
        m.node = r.u16();
        m.query_seq = r.u16();
        m.header_prefix = r.bytes(r.remaining());
        return m;
    }
    case MsgKind::Fts: {
        FtsMsg m;
        m.node = r.u16();
        const std::uint8_t n_entries = r.u8();
        for (std::uint8_t i = 0; i < n_entries; ++i) {
            m.entries.push_back(detail::decode_entry(r));
        }
        const std::uint8_t n_refresh = r.u8();
        for (std::uint8_t i = 0; i < n_refresh; ++i) {
            m.refresh_ids.push_back(r.u16());
        }
        r.expect_end();
        return m;
    }
    }
    throw CodecError("decode: unknown message kind");
}

// Flow identity as the node-side pipeline sees it: the class byte plus the
// destination field of the header image.
struct FlowKey {
    FlowClass cls = FlowClass::App;
    NodeId dst = 0;

    auto operator<=>(const FlowKey&) const = default;

    static std::optional<FlowKey> from_header(std::span<const std::uint8_t> header) {
        if (header.size() < 5) {
            return std::nullopt;
        }
        FlowKey k;
        k.cls = static_cast<FlowClass>(header[0]);
        k.dst = static_cast<NodeId>(header[3] << 8 | header[4]);
        return k;
    }
};

} // namespace slicesim
