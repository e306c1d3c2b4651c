#include <doctest.h>

#include <map>
#include <string>
#include <vector>

#include "slicesim/experiment.hpp"
#include "slicesim/network.hpp"

using namespace slicesim;

namespace {

// A scenario whose app traffic and joins stay out of the way, for driving
// the MAC and track machinery by hand.
Scenario quiet(Mode mode, int hops) {
    Scenario sc;
    sc.mode = mode;
    sc.hops = hops;
    sc.link_quality = 1.0;
    sc.app_interval_min_s = 900000;
    sc.app_interval_max_s = 1000000;
    sc.join_stagger_s = 1000000;
    sc.seed = 1;
    return sc;
}

std::map<DropReason, int> drop_histogram(const Network& net, FlowClass cls) {
    std::map<DropReason, int> out;
    for (const auto& r : net.records()) {
        if (r.cls == cls && !r.delivered() && r.drop != DropReason::None) {
            ++out[r.drop];
        }
    }
    return out;
}

} // namespace

TEST_CASE("with all queues empty a whole slotframe produces only idle outcomes") {
    Network net(quiet(Mode::NoSdnRpl, 2));
    net.set_capture_outcomes(true);
    for (Asn asn = 0; asn < 13; ++asn) {
        net.execute_slot(asn);
        for (const auto& ev : net.last_outcomes()) {
            CHECK(ev.outcome == TxOutcome::Idle);
        }
    }
}

TEST_CASE("a lone frame on a perfect link is delivered on its dedicated cell") {
    Network net(quiet(Mode::NoSdnRpl, 1));
    net.start();
    net.sim().schedule_event(1, "inject", [&] { net.inject_app_packet(1); });
    net.run_for_slots(14);
    REQUIRE(net.records().size() == 1);
    const auto& rec = net.records().front();
    REQUIRE(rec.delivered());
    CHECK(*rec.deliver_asn == 1); // the 1->0 ladder cell sits at slot 1
    CHECK(rec.hop_count == 1);
}

TEST_CASE("simultaneous in-range shared-cell transmitters all collide") {
    Scenario sc = quiet(Mode::NoSdnRpl, 2);
    sc.p_shared = 1.0;
    Network net(sc);
    net.set_capture_outcomes(true);
    const Asn first_shared = static_cast<Asn>(sc.slotframe_length - sc.shared_slots);
    for (Asn asn = 0; asn < first_shared; ++asn) {
        net.execute_slot(asn); // drain nothing; queues are empty
    }
    net.send_packet(1, net.make_packet(FlowClass::App, 1, 0, {}));
    net.send_packet(2, net.make_packet(FlowClass::App, 2, 0, {}));
    net.execute_slot(first_shared);
    int collisions = 0, deliveries = 0;
    for (const auto& ev : net.last_outcomes()) {
        collisions += ev.outcome == TxOutcome::Collision ? 1 : 0;
        deliveries += ev.outcome == TxOutcome::Delivered ? 1 : 0;
    }
    CHECK(collisions == 2);
    CHECK(deliveries == 0);
}

TEST_CASE("the uplink ladder carries a frame across 5 hops within one slotframe") {
    Network net(quiet(Mode::NoSdnRpl, 5));
    net.start();
    net.sim().schedule_event(1, "inject", [&] { net.inject_app_packet(5); });
    net.run_for_slots(20);
    REQUIRE(net.records().size() == 1);
    const auto& rec = net.records().front();
    REQUIRE(rec.delivered());
    CHECK(rec.hop_count == 5);
    CHECK(*rec.deliver_asn - rec.enqueue_asn <= 13);
    CHECK(*rec.deliver_asn == 5); // slots 1..5, one hop per slot
}

TEST_CASE("a 16-frame burst into a capacity-8 queue drops 8 as QueueOverflow") {
    Network net(quiet(Mode::NoSdnRpl, 1));
    for (int i = 0; i < 16; ++i) {
        net.send_packet(1, net.make_packet(FlowClass::App, 1, 0, {}));
    }
    const auto drops = drop_histogram(net, FlowClass::App);
    CHECK(drops.at(DropReason::QueueOverflow) == 8);
    CHECK(net.queued_frames() == 8);
}

TEST_CASE("frame ledger accounts for every enqueued frame") {
    Scenario sc;
    sc.mode = Mode::SdnShared;
    sc.hops = 3;
    sc.duration_s = 40;
    sc.seed = 5;
    Network net(sc);
    net.run();
    const auto& led = net.ledger();
    CHECK(led.enqueued == led.terminated() + net.queued_frames());
    CHECK(led.delivered > 0);
}

TEST_CASE("per-class record conservation: sent = delivered + drops") {
    Scenario sc;
    sc.mode = Mode::SdnShared;
    sc.hops = 5;
    sc.duration_s = 60;
    sc.seed = 7;
    Network net(sc);
    net.run();
    for (FlowClass cls : {FlowClass::App, FlowClass::Nsu, FlowClass::Ftq, FlowClass::SdnDown,
                          FlowClass::Cjoin, FlowClass::TrackCtl}) {
        std::size_t sent = 0, delivered = 0, dropped = 0;
        for (const auto& r : net.records()) {
            if (r.cls != cls) continue;
            ++sent;
            if (r.delivered()) {
                ++delivered;
            } else {
                REQUIRE(r.drop != DropReason::None); // finalize() closed the books
                ++dropped;
            }
        }
        CHECK(sent == delivered + dropped);
    }
    CHECK(net.audit_violations() == 0);
}

TEST_CASE("NoSdnRpl runs carry zero SDN control records") {
    Scenario sc;
    sc.mode = Mode::NoSdnRpl;
    sc.hops = 3;
    sc.duration_s = 60;
    Network net(sc);
    net.run();
    std::size_t app = 0;
    for (const auto& r : net.records()) {
        CHECK(r.cls == FlowClass::App);
        ++app;
    }
    CHECK(app > 10);
    CHECK(net.warmup_end_asn() == Asn{0});
}

TEST_CASE("SdnShared joins settle and NSUs tick at the configured period") {
    Scenario sc;
    sc.mode = Mode::SdnShared;
    sc.hops = 2;
    sc.duration_s = 70;
    sc.link_quality = 1.0; // deterministic cadence for the assertion
    Network net(sc);
    net.run();
    REQUIRE(net.warmup_end_asn().has_value());
    CHECK(net.node(1).join_state() == JoinState::Joined);
    CHECK(net.node(2).join_state() == JoinState::Joined);

    // NSU creation times per node are exactly one period apart.
    std::map<NodeId, std::vector<Asn>> nsu_times;
    for (const auto& r : net.records()) {
        if (r.cls == FlowClass::Nsu) {
            nsu_times[r.src].push_back(r.enqueue_asn);
        }
    }
    REQUIRE(nsu_times.size() == 2);
    const Asn period_slots = 1000; // 10 s at 10 ms slots
    for (const auto& [node, times] : nsu_times) {
        REQUIRE(times.size() >= 6); // 60 s after joining -> 6 NSUs
        for (std::size_t i = 1; i < times.size(); ++i) {
            CHECK(times[i] - times[i - 1] == period_slots);
        }
    }
}

TEST_CASE("per-node FTQ cadence follows the 60 s flow lifetime") {
    Scenario sc;
    sc.mode = Mode::SdnShared;
    sc.hops = 1;
    sc.duration_s = 260;
    sc.link_quality = 1.0;
    Network net(sc);
    net.run();
    std::vector<double> ftq_s;
    for (const auto& r : net.records()) {
        if (r.cls == FlowClass::Ftq && r.src == 1) {
            ftq_s.push_back(static_cast<double>(r.enqueue_asn) * sc.slot_duration_ms / 1000.0);
        }
    }
    REQUIRE(ftq_s.size() >= 3);
    for (std::size_t i = 1; i < ftq_s.size(); ++i) {
        const double gap = ftq_s[i] - ftq_s[i - 1];
        CHECK(gap >= 55.0);
        CHECK(gap <= 75.0);
    }
}

TEST_CASE("a node whose CACKs are lost twice joins after two retries") {
    Scenario sc = quiet(Mode::SdnShared, 1);
    sc.join_stagger_s = 1.0; // bring the join forward
    sc.max_retries = 0; // one shot per frame keeps the loss script exact
    Network net(sc);
    // Kill the CACK+CONF reply pairs of the first two join attempts.
    net.faults().add({0, 1, FlowClass::SdnDown, 0, 4});
    net.run_for_slots(net.sim().clock().slots_for_s(60.0));
    CHECK(net.node(1).join_state() == JoinState::Joined);
    CHECK(net.node(1).join_attempts() == 3); // initial CJOIN plus two retries
}

TEST_CASE("exhausted join retries mark the node failed and the run settles") {
    Scenario sc = quiet(Mode::SdnShared, 1);
    sc.join_stagger_s = 1.0;
    sc.cjoin_max_retries = 2;
    Network net(sc);
    net.faults().add({0, 1, FlowClass::SdnDown, 0, 1000}); // controller unreachable
    net.run_for_slots(net.sim().clock().slots_for_s(60.0));
    CHECK(net.node(1).join_state() == JoinState::JoinFailed);
    CHECK(net.warmup_end_asn().has_value()); // failed-terminal still settles
}

TEST_CASE("identical scenario and seed reproduce byte-identical records") {
    Scenario sc;
    sc.mode = Mode::SdnShared;
    sc.hops = 5;
    sc.duration_s = 60;
    sc.seed = 3;
    Network a(sc);
    a.run();
    Network b(sc);
    b.run();
    CHECK(records_csv(a.records(), false) == records_csv(b.records(), false));
    CHECK(records_csv(a.records(), true) == records_csv(b.records(), true));
}

TEST_CASE("SdnTracks: every node reaches TrackReady with a bundle chain to the root") {
    Scenario sc;
    sc.mode = Mode::SdnTracks;
    sc.hops = 5;
    sc.duration_s = 60;
    sc.seed = 2;
    Network net(sc);
    net.run();
    REQUIRE(net.warmup_end_asn().has_value());

    std::size_t active = 0;
    for (const auto& [id, t] : net.tracks().all()) {
        if (t.state != TrackState::Active) {
            continue;
        }
        ++active;
        // Chain property: hop i's egress bundle is hop i+1's ingress bundle.
        REQUIRE(t.bundles.size() == t.path.size() - 1);
        for (std::size_t i = 0; i + 1 < t.bundles.size(); ++i) {
            CHECK(t.bundles[i].dst == t.bundles[i + 1].src);
        }
        // Per-hop forward gaps are strictly positive.
        const auto len = net.schedule().length();
        for (std::size_t i = 0; i + 1 < t.bundles.size(); ++i) {
            const auto gap = forward_gap(len, t.bundles[i].cells.front().slot,
                                         t.bundles[i + 1].cells.front().slot);
            CHECK(gap >= 1);
        }
    }
    CHECK(active == 5);
    for (NodeId n = 1; n <= 5; ++n) {
        CHECK(net.node(n).join_state() == JoinState::TrackReady);
    }

    // Post-warm-up control rides track cells end to end.
    for (const auto& r : net.records()) {
        if (r.warmup || !r.delivered()) {
            continue;
        }
        if (r.cls == FlowClass::Nsu || r.cls == FlowClass::Ftq) {
            CHECK(r.via_track_only);
        }
    }
    CHECK(net.track_dump().find("Active") != std::string::npos);
    CHECK(net.full_audit().empty());
}

TEST_CASE("scripted InsufficientCells rolls the schedule back byte-identically") {
    Network net(quiet(Mode::SdnTracks, 5));
    const auto before = net.schedule().snapshot();
    net.force_track_failure_at(3);
    net.start();
    net.sim().schedule_event(10, "alloc", [&] { net.start_track_allocation(5); });
    net.run_for_slots(1500); // request, fail propagation, hold expiry
    CHECK(net.schedule().snapshot() == before);
}

TEST_CASE("a lost reservation request rolls back via the hold timer") {
    Network net(quiet(Mode::SdnTracks, 5));
    const auto before = net.schedule().snapshot();
    net.faults().add({4, 3, FlowClass::TrackCtl, 0, 1000}); // kill the 4->3 leg forever
    net.start();
    net.sim().schedule_event(10, "alloc", [&] { net.start_track_allocation(5); });
    net.run_for_slots(2000);
    CHECK(net.schedule().snapshot() == before);
}

TEST_CASE("release restores candidate availability exactly") {
    Network net(quiet(Mode::SdnTracks, 3));
    const auto before = net.schedule().snapshot();
    net.start();
    TrackId id = 0;
    net.sim().schedule_event(10, "alloc", [&] { id = net.start_track_allocation(3); });
    net.run_for_slots(1500);
    REQUIRE(net.tracks().find(id) != nullptr);
    REQUIRE(net.tracks().find(id)->state == TrackState::Active);
    const auto first_bundles = net.tracks().find(id)->bundles;

    CHECK(net.release_track(id));
    CHECK(net.schedule().snapshot() == before);
    CHECK_FALSE(net.release_track(id)); // double release is a signalled no-op

    TrackId id2 = 0;
    net.sim().schedule_event(net.sim().now() + 10, "realloc",
                             [&] { id2 = net.start_track_allocation(3); });
    net.run_for_slots(1500);
    REQUIRE(net.tracks().find(id2) != nullptr);
    REQUIRE(net.tracks().find(id2)->state == TrackState::Active);
    // Fresh network, fresh allocation: the same cells come back.
    REQUIRE(net.tracks().find(id2)->bundles.size() == first_bundles.size());
    for (std::size_t i = 0; i < first_bundles.size(); ++i) {
        CHECK(net.tracks().find(id2)->bundles[i].cells == first_bundles[i].cells);
    }
}

TEST_CASE("frames queued on a released track drop as TrackStale") {
    Network net(quiet(Mode::SdnTracks, 3));
    net.start();
    TrackId id = 0;
    net.sim().schedule_event(10, "alloc", [&] { id = net.start_track_allocation(3); });
    net.run_for_slots(1500);
    REQUIRE(net.tracks().find(id)->state == TrackState::Active);

    net.inject_track_frame(id);
    REQUIRE(net.queued_frames() == 1);
    net.release_track(id);
    CHECK(net.queued_frames() == 0);
    const auto drops = drop_histogram(net, FlowClass::App);
    CHECK(drops.at(DropReason::TrackStale) == 1);
}

TEST_CASE("track frames ride only their own cells with deterministic latency") {
    Scenario sc = quiet(Mode::SdnTracks, 5);
    sc.track_bandwidth = 1; // single-cell bundles make latency a closed form
    Network net(sc);
    net.start();
    TrackId id = 0;
    net.sim().schedule_event(10, "alloc", [&] { id = net.start_track_allocation(5); });
    net.run_for_slots(2000);
    const Track* t = net.tracks().find(id);
    REQUIRE(t != nullptr);
    REQUIRE(t->state == TrackState::Active);

    const auto len = net.schedule().length();
    auto closed_form = [&](Asn inject) {
        const auto first = t->bundles.front().cells.front().slot;
        Asn total = (first + len - inject % len) % len; // first egress wait
        for (std::size_t i = 0; i + 1 < t->bundles.size(); ++i) {
            total += forward_gap(len, t->bundles[i].cells.front().slot,
                                 t->bundles[i + 1].cells.front().slot);
        }
        return total;
    };

    for (Asn offset = 0; offset < 2; ++offset) {
        const Asn base = net.sim().now() + 5ull * len;
        const Asn inject = base - base % len + len + offset;
        net.sim().schedule_event(inject, "inject", [&] { net.inject_track_frame(id); });
        net.run_for_slots(inject - net.sim().now() + 5 * len + 1);
        const auto& rec = net.records().back();
        REQUIRE(rec.delivered());
        CHECK(rec.via_track_only);
        CHECK(*rec.deliver_asn - rec.enqueue_asn == closed_form(inject));
    }
}

TEST_CASE("run_experiment writes the documented artifact tree") {
    Scenario sc;
    sc.mode = Mode::SdnShared;
    sc.hops = 2;
    sc.duration_s = 30;
    const auto dir = std::filesystem::temp_directory_path() / "slicesim_test_exp";
    std::filesystem::remove_all(dir);
    const auto rep = run_experiment(sc, {1, 2}, dir);
    CHECK(rep.runs.size() == 2);
    for (const char* f : {"scenario.txt", "summary.csv", "report.json"}) {
        CHECK(std::filesystem::exists(dir / f));
    }
    for (const char* f :
         {"records.csv", "warmup_records.csv", "flowstats.csv", "schedule.txt", "tracks.txt",
          "controller_log.txt"}) {
        CHECK(std::filesystem::exists(dir / "run_seed1" / f));
    }
    CHECK(rep.summary.at("App").at("pdr").n == 2);

    // stats recompute reproduces the same flowstats bytes.
    std::ifstream before(dir / "run_seed1" / "flowstats.csv");
    std::stringstream sb;
    sb << before.rdbuf();
    CHECK(recompute_stats(dir, sc.slot_duration_ms) == 2);
    std::ifstream after(dir / "run_seed1" / "flowstats.csv");
    std::stringstream sa;
    sa << after.rdbuf();
    CHECK(sb.str() == sa.str());
    std::filesystem::remove_all(dir);
}
