#pragma once

// Randomized controller-message generator shared by the codec property test
// and the acceptance suite.

#include <vector>

#include "slicesim/codec.hpp"
#include "slicesim/rng.hpp"

namespace slicesim::testgen {

inline std::vector<std::uint8_t> random_bytes(RngStream& rng, std::size_t n) {
    std::vector<std::uint8_t> out(n);
    for (auto& b : out) {
        b = static_cast<std::uint8_t>(rng.uniform_int(256));
    }
    return out;
}

inline MatchField random_match(RngStream& rng) {
    MatchField f;
    f.offset = static_cast<std::uint8_t>(rng.uniform_int(16));
    const std::size_t len = 1 + rng.uniform_int(4);
    f.value = random_bytes(rng, len);
    f.mask = random_bytes(rng, len);
    return f;
}

inline Action random_action(RngStream& rng) {
    switch (rng.uniform_int(4)) {
    case 0:
        return Action::forward(static_cast<NodeId>(rng.uniform_int(1000)));
    case 1:
        return Action::drop();
    case 2: {
        std::vector<NodeId> route;
        const std::size_t n = 1 + rng.uniform_int(8);
        for (std::size_t i = 0; i < n; ++i) {
            route.push_back(static_cast<NodeId>(rng.uniform_int(1000)));
        }
        return Action::srh_push(std::move(route));
    }
    default:
        return Action{ActionKind::Query, kNoNode, {}};
    }
}

inline FlowEntrySpec random_entry(RngStream& rng) {
    FlowEntrySpec e;
    e.entry_id = static_cast<std::uint16_t>(rng.uniform_int(0x10000));
    e.lifetime_s = static_cast<std::uint16_t>(rng.uniform_int(0x10000));
    const std::size_t n = 1 + rng.uniform_int(3);
    for (std::size_t i = 0; i < n; ++i) {
        e.match.push_back(random_match(rng));
    }
    e.action = random_action(rng);
    return e;
}

inline SdnMessage random_message(RngStream& rng) {
    switch (rng.uniform_int(6)) {
    case 0:
        return CjoinMsg{static_cast<NodeId>(rng.uniform_int(1000)),
                        static_cast<std::uint8_t>(rng.uniform_int(256))};
    case 1:
        return CackMsg{static_cast<NodeId>(rng.uniform_int(1000)),
                       static_cast<std::uint8_t>(rng.uniform_int(256))};
    case 2:
        return ConfMsg{static_cast<std::uint16_t>(rng.uniform_int(0x10000)),
                       static_cast<std::uint16_t>(rng.uniform_int(0x10000))};
    case 3: {
        NsuMsg m;
        m.node = static_cast<NodeId>(rng.uniform_int(1000));
        m.energy = static_cast<std::uint16_t>(rng.uniform_int(0x10000));
        m.queue_occupancy = static_cast<std::uint8_t>(rng.uniform_int(256));
        const std::size_t nn = rng.uniform_int(16); // wire cap is 15
        for (std::size_t i = 0; i < nn && i < 15; ++i) {
            m.neighbors.push_back({static_cast<NodeId>(rng.uniform_int(1000)),
                                   static_cast<std::uint8_t>(rng.uniform_int(256))});
        }
        const std::size_t ns = rng.uniform_int(8);
        for (std::size_t i = 0; i < ns; ++i) {
            m.entry_stats.push_back({static_cast<std::uint16_t>(rng.uniform_int(0x10000)),
                                     static_cast<std::uint8_t>(rng.uniform_int(256))});
        }
        return m;
    }
    case 4: {
        FtqMsg m;
        m.node = static_cast<NodeId>(rng.uniform_int(1000));
        m.query_seq = static_cast<std::uint16_t>(rng.uniform_int(0x10000));
        m.header_prefix = random_bytes(rng, rng.uniform_int(33));
        return m;
    }
    default: {
        FtsMsg m;
        m.node = static_cast<NodeId>(rng.uniform_int(1000));
        const std::size_t ne = rng.uniform_int(3);
        for (std::size_t i = 0; i < ne; ++i) {
            m.entries.push_back(random_entry(rng));
        }
        const std::size_t nr = rng.uniform_int(5);
        for (std::size_t i = 0; i < nr; ++i) {
            m.refresh_ids.push_back(static_cast<std::uint16_t>(rng.uniform_int(0x10000)));
        }
        return m;
    }
    }
}

} // namespace slicesim::testgen
