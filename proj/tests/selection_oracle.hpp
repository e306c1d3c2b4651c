#pragma once

// Exhaustive minimal-gap cell-selection oracle, shared by the unit test and
// the acceptance suite. Enumerates every mutually free (slot, channel) pair
// instead of ranking greedily.

#include <optional>
#include <utility>

#include "slicesim/track.hpp"

namespace slicesim::testgen {

inline std::optional<std::pair<std::uint16_t, CellAddr>> exhaustive_best(
    const Schedule& s, NodeId from, NodeId to, std::uint16_t ingress) {
    std::optional<std::pair<std::uint16_t, CellAddr>> best;
    for (std::uint16_t slot = 0; slot < s.length(); ++slot) {
        if (s.slot_is_shared(slot) || s.node_busy(from, slot) || s.node_busy(to, slot)) {
            continue;
        }
        for (std::uint16_t ch = 0; ch < s.channel_count(); ++ch) {
            if (s.find({slot, ch}) != nullptr) {
                continue;
            }
            const auto gap = forward_gap(s.length(), ingress, slot);
            const std::pair<std::uint16_t, CellAddr> cand{gap, {slot, ch}};
            if (!best || cand.first < best->first ||
                (cand.first == best->first && cand.second < best->second)) {
                best = cand;
            }
            break; // lower channels rank first within a slot
        }
    }
    return best;
}

} // namespace slicesim::testgen
