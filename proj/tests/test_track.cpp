#include <doctest.h>

#include <optional>
#include <vector>

#include "slicesim/rng.hpp"
#include "slicesim/track.hpp"

using namespace slicesim;

namespace {

// Exhaustive minimal-gap oracle over every mutually free (slot, channel).
std::optional<std::pair<std::uint16_t, CellAddr>> oracle_best(const Schedule& s, NodeId from,
                                                              NodeId to,
                                                              std::uint16_t ingress) {
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
            break; // lower channels rank first at the same slot
        }
    }
    return best;
}

} // namespace

TEST_CASE("forward gap arithmetic") {
    CHECK(forward_gap(10, 3, 5) == 2);
    CHECK(forward_gap(10, 3, 9) == 6);
    CHECK(forward_gap(10, 3, 1) == 8);
    CHECK(forward_gap(10, 3, 3) == 10); // wraps to a full slotframe
    CHECK(forward_gap(13, 12, 0) == 1);
}

TEST_CASE("candidate selection picks the minimal-gap mutually free slot") {
    // Slotframe of 10; free slots for the link are exactly {5, 9, 1}.
    Schedule s(10, 2);
    const NodeId from = 7, to = 8;
    for (std::uint16_t slot = 0; slot < 10; ++slot) {
        if (slot == 5 || slot == 9 || slot == 1) {
            continue;
        }
        s.add_dedicated({slot, 0}, from, to == 8 ? 9 : 8); // occupy `from`
    }
    const auto picked = select_candidate_cells(s, from, to, 3, 1);
    REQUIRE(picked.has_value());
    CHECK(picked->size() == 1);
    CHECK(picked->front().slot == 5); // gap 2 beats 6 and 8

    // Exhaustive enumeration agrees.
    const auto best = oracle_best(s, from, to, 3);
    REQUIRE(best.has_value());
    CHECK(best->second == picked->front());
}

TEST_CASE("a lone free slot equal to the ingress is still selectable (gap = slotframe)") {
    Schedule s(10, 1);
    const NodeId from = 7, to = 8;
    for (std::uint16_t slot = 0; slot < 10; ++slot) {
        if (slot != 3) {
            s.add_dedicated({slot, 0}, from, 9);
        }
    }
    const auto picked = select_candidate_cells(s, from, to, 3, 1);
    REQUIRE(picked.has_value());
    CHECK(picked->front().slot == 3);
    CHECK(forward_gap(10, 3, picked->front().slot) == 10);
}

TEST_CASE("when exactly `count` slots are free, all are returned") {
    Schedule s(10, 1);
    const NodeId from = 7, to = 8;
    for (std::uint16_t slot = 0; slot < 10; ++slot) {
        if (slot != 2 && slot != 6) {
            s.add_dedicated({slot, 0}, from, 9);
        }
    }
    const auto picked = select_candidate_cells(s, from, to, 0, 2);
    REQUIRE(picked.has_value());
    CHECK(picked->size() == 2);
    CHECK(select_candidate_cells(s, from, to, 0, 3) == std::nullopt); // insufficient
}

TEST_CASE("greedy selection matches the exhaustive oracle on 200 random schedules") {
    RngStream rng(4242, "selection-oracle");
    int nonempty = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto length = static_cast<std::uint16_t>(8 + rng.uniform_int(9)); // 8..16
        const auto channels = static_cast<std::uint16_t>(1 + rng.uniform_int(2));
        Schedule s(length, channels);
        const NodeId a = 100, b = 101;
        // Random occupancy; leave at most 8 free slots for the pair.
        const std::size_t busy = length - rng.uniform_int(9);
        for (std::size_t i = 0; i < busy; ++i) {
            const auto slot = static_cast<std::uint16_t>(rng.uniform_int(length));
            const NodeId blocker = rng.bernoulli(0.5) ? a : b;
            if (s.node_busy(blocker, slot)) {
                continue;
            }
            if (auto ch = s.lowest_free_channel(slot)) {
                s.add_dedicated({slot, *ch}, blocker, 200 + static_cast<NodeId>(i));
            }
        }
        const auto ingress = static_cast<std::uint16_t>(rng.uniform_int(length));
        const auto picked = select_candidate_cells(s, a, b, ingress, 1);
        const auto best = oracle_best(s, a, b, ingress);
        if (!best) {
            CHECK(picked == std::nullopt);
            continue;
        }
        ++nonempty;
        REQUIRE(picked.has_value());
        CHECK(forward_gap(s.length(), ingress, picked->front().slot) == best->first);
        CHECK(picked->front() == best->second);
    }
    CHECK(nonempty > 100); // the generator must actually exercise selection
}

TEST_CASE("track registry releases cells exactly once") {
    Schedule s(13, 16);
    s.add_dedicated({1, 0}, 2, 1, TrackId{33});
    s.add_dedicated({2, 0}, 1, 0, TrackId{33});

    TrackRegistry reg;
    Track t;
    t.id = 33;
    t.source = 2;
    t.destination = 0;
    t.path = {2, 1, 0};
    t.bundles = {{2, 1, 33, {{1, 0}}}, {1, 0, 33, {{2, 0}}}};
    t.state = TrackState::Active;
    reg.install(t);

    CHECK(reg.audit().empty());
    CHECK(reg.release(33, s));
    CHECK(s.cell_count() == 0);
    CHECK_FALSE(reg.release(33, s)); // double release is a signalled no-op
    CHECK_FALSE(reg.release(99, s));
}

TEST_CASE("registry audit catches a cell claimed by two tracks") {
    TrackRegistry reg;
    Track a;
    a.id = 1;
    a.path = {2, 1, 0};
    a.bundles = {{2, 1, 1, {{1, 0}}}};
    a.state = TrackState::Active;
    reg.install(a);
    Track b;
    b.id = 2;
    b.path = {3, 1, 0};
    b.bundles = {{3, 1, 2, {{1, 0}}}};
    b.state = TrackState::Active;
    reg.install(b);
    CHECK_FALSE(reg.audit().empty());
}

TEST_CASE("track bundle chain helpers") {
    Track t;
    t.id = 5;
    t.source = 3;
    t.destination = 0;
    t.path = {3, 2, 1, 0};
    t.bundles = {{3, 2, 5, {{1, 0}}}, {2, 1, 5, {{3, 0}}}, {1, 0, 5, {{5, 0}}}};

    CHECK(t.next_hop_after(3) == 2);
    CHECK(t.next_hop_after(1) == 0);
    CHECK(t.next_hop_after(0) == std::nullopt);
    REQUIRE(t.egress_of(2) != nullptr);
    CHECK(t.egress_of(2)->cells.front().slot == 3);
    CHECK(t.egress_of(0) == nullptr);
}

TEST_CASE("track signaling messages round-trip") {
    TrackReqMsg req;
    req.track = 81;
    req.requester = 5;
    req.destination = 0;
    req.bandwidth = 1;
    req.prev_slot = kNoIngressSlot;
    req.path = {5, 4, 3, 2, 1, 0};
    req.chosen = {{5, 4, {{1, 2}}}, {4, 3, {{3, 2}}}};
    CHECK(decode_track_msg(encode_track_msg(TrackMsg{req})) == TrackMsg{req});

    TrackConfirmMsg confirm;
    confirm.track = 81;
    confirm.requester = 5;
    confirm.destination = 0;
    confirm.path = req.path;
    confirm.bundles = req.chosen;
    CHECK(decode_track_msg(encode_track_msg(TrackMsg{confirm})) == TrackMsg{confirm});

    TrackFailMsg fail;
    fail.track = 81;
    fail.requester = 5;
    fail.failed_at = 2;
    fail.path = req.path;
    CHECK(decode_track_msg(encode_track_msg(TrackMsg{fail})) == TrackMsg{fail});
}
