#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "slicesim/codec.hpp"
#include "slicesim/controller.hpp"
#include "slicesim/metrics.hpp"
#include "slicesim/rng.hpp"
#include "slicesim/routing.hpp"
#include "slicesim/scenario.hpp"
#include "slicesim/sim_kernel.hpp"
#include "slicesim/topology.hpp"
#include "slicesim/track.hpp"
#include "slicesim/tsch.hpp"
#include "slicesim/sdn_node.hpp"

namespace slicesim {

enum class TxOutcome : std::uint8_t { Delivered, LinkLoss, Collision, Idle };

struct SlotEvent {
    CellAddr cell;
    bool shared = false;
    TxOutcome outcome = TxOutcome::Idle;
    NodeId src = kNoNode;
    NodeId dst = kNoNode;
    PacketId packet = 0;
};

// Scripted transmission faults for tests: kill the next `remaining` matching
// transmissions on a link (after letting `skip` matches through).
struct FaultRule {
    NodeId src = kNoNode; // kNoNode matches any
    NodeId dst = kNoNode;
    std::optional<FlowClass> cls;
    int skip = 0;
    int remaining = 1;
};

class FaultPlan {
public:
    void add(FaultRule r) { rules_.push_back(r); }

    bool should_drop(const Frame& f) {
        for (auto& r : rules_) {
            if (r.remaining <= 0) {
                continue;
            }
            if (r.src != kNoNode && r.src != f.from) continue;
            if (r.dst != kNoNode && r.dst != f.to) continue;
            if (r.cls && *r.cls != f.pkt.cls) continue;
            if (r.skip > 0) {
                --r.skip;
                continue;
            }
            --r.remaining;
            return true;
        }
        return false;
    }

private:
    std::vector<FaultRule> rules_;
};

// Hop-segment accounting: every frame handed to the MAC terminates in
// exactly one of these buckets (or is still queued when the run stops).
struct FrameLedger {
    std::uint64_t enqueued = 0;
    std::uint64_t delivered = 0;
    std::uint64_t drop_queue_overflow = 0;
    std::uint64_t drop_retry_limit = 0;
    std::uint64_t drop_track_stale = 0;

    std::uint64_t terminated() const {
        return delivered + drop_queue_overflow + drop_retry_limit + drop_track_stale;
    }
};

// One simulated mesh: topology, DAG, TSCH schedule, per-node SDN layer and
// the controller at node 0, all driven by the discrete-event kernel. A
// Network is built from a Scenario and run once; separate runs share nothing.
class Network {
public:
    explicit Network(const Scenario& sc)
        : sc_(sc),
          topo_(Topology::linear_chain(sc.hops, sc.spacing_m, sc.tx_range_m, sc.link_quality)),
          dag_(Dag::build(topo_, kControllerNode, sc.route_lifetime_s)),
          sim_(sc.slot_duration_ms),
          sched_(build_chain_schedule(sc.hops, static_cast<std::uint16_t>(sc.slotframe_length),
                                      static_cast<std::uint16_t>(sc.channels),
                                      static_cast<std::uint16_t>(sc.shared_slots))),
          link_loss_(sc.seed, "link-loss"),
          app_interval_(sc.seed, "app-interval"),
          shared_backoff_(sc.seed, "shared-slot-backoff"),
          ctrl_(ControllerPolicy{static_cast<std::uint16_t>(sc.nsu_period_s),
                                 static_cast<std::uint16_t>(sc.flow_lifetime_s), sc.afr_enabled,
                                 static_cast<std::uint32_t>(sc.afr_hit_threshold)},
                &dag_) {
        const std::size_t n = topo_.node_count();
        queues_.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            queues_.emplace_back(static_cast<std::size_t>(sc.queue_capacity));
        }
        tx_count_.assign(n, 0);
        rx_count_.assign(n, 0);
        link_attempts_.assign(n, {});
        track_attempts_.assign(n, 0);

        if (sdn_enabled()) {
            NodeConfig cfg;
            cfg.nsu_period_s = sc.nsu_period_s;
            cfg.flow_lifetime_s = sc.flow_lifetime_s;
            cfg.ppq_bytes = static_cast<std::size_t>(sc.ppq_bytes);
            cfg.flowtable_capacity = static_cast<std::size_t>(sc.flowtable_capacity);
            cfg.query_buffer = static_cast<std::size_t>(sc.query_buffer);
            cfg.query_timeout_s = sc.query_timeout_s;
            cfg.cjoin_max_retries = sc.cjoin_max_retries;
            for (NodeId i = 1; i < n; ++i) {
                auto node = std::make_unique<SdnNode>(i, cfg);
                // Everything except NSU traffic bypasses the flowtable: app
                // and RPL go to Layer-3, the engine's own control classes are
                // routed by it directly.
                for (FlowClass cls : {FlowClass::App, FlowClass::Rpl, FlowClass::Cjoin,
                                      FlowClass::Ftq, FlowClass::SdnDown, FlowClass::TrackCtl}) {
                    node->flowtable().add_blacklist({MatchField::on_class(cls)});
                }
                nodes_.emplace(i, std::move(node));
            }
        } else {
            warmup_end_asn_ = 0;
        }
    }

    // --- accessors ---------------------------------------------------------

    const Scenario& scenario() const { return sc_; }
    Simulator& sim() { return sim_; }
    Schedule& schedule() { return sched_; }
    const Schedule& schedule() const { return sched_; }
    const Topology& topology() const { return topo_; }
    const Dag& dag() const { return dag_; }
    Controller& controller() { return ctrl_; }
    TrackRegistry& tracks() { return tracks_; }
    FaultPlan& faults() { return faults_; }
    TxQueues& queues(NodeId n) { return queues_.at(n); }
    SdnNode& node(NodeId n) { return *nodes_.at(n); }
    bool sdn_enabled() const { return sc_.mode != Mode::NoSdnRpl; }
    bool track_mode() const { return sc_.mode == Mode::SdnTracks; }
    const std::vector<PacketRecord>& records() const { return records_; }
    const FrameLedger& ledger() const { return ledger_; }
    std::uint64_t audit_violations() const { return audit_violations_; }
    std::optional<Asn> warmup_end_asn() const { return warmup_end_asn_; }
    void set_capture_outcomes(bool on) { capture_ = on; }
    const std::vector<SlotEvent>& last_outcomes() const { return outcomes_; }

    // Forces InsufficientCells when this node selects track candidate cells
    // (scripted mid-allocation failure for rollback tests).
    void force_track_failure_at(NodeId n) { track_fail_at_.insert(n); }

    // InsufficientCells events seen so far: (track id, node that failed).
    const std::vector<std::pair<TrackId, NodeId>>& track_failures() const {
        return track_failures_;
    }

    // --- run orchestration ---------------------------------------------------

    // Starts the recurring slot executor and the scenario's traffic and join
    // event chains. Call once before run_until / run().
    void start() {
        if (started_) {
            return;
        }
        started_ = true;
        schedule_slot_tick_(sim_.now());
        for (NodeId n = 1; n < topo_.node_count(); ++n) {
            const double first = app_interval_.uniform(sc_.app_interval_min_s, sc_.app_interval_max_s);
            schedule_app_send_(n, first);
        }
        if (sdn_enabled()) {
            for (NodeId n = 1; n < topo_.node_count(); ++n) {
                const double at = dag_.rank(n) * sc_.join_stagger_s;
                sim_.schedule_event(sim_.clock().slots_for_s(at), "join-start",
                                    [this, n] { start_join_(n); });
            }
        }
    }

    // Full scenario run: waits for every node to settle (the warm-up), then
    // runs duration_s of measured time and closes the books.
    void run() {
        start();
        if (!warmup_end_asn_) {
            const double deadline_s =
                std::max(600.0, topo_.node_count() * (sc_.join_stagger_s + 60.0));
            const Asn deadline = sim_.clock().slots_for_s(deadline_s);
            while (!warmup_end_asn_ && sim_.now() < deadline) {
                sim_.run_until(std::min(deadline, sim_.now() + 500));
            }
            if (!warmup_end_asn_) {
                throw SimError("run: nodes failed to settle before " +
                               std::to_string(deadline_s) + "s; " + join_diagnostics_());
            }
        }
        const Asn end = *warmup_end_asn_ + sim_.clock().slots_for_s(sc_.duration_s);
        sim_.run_until(end);
        finalize_();
    }

    void run_for_slots(Asn slots) {
        start();
        sim_.run_until(sim_.now() + slots);
    }

    // --- traffic injection (scenario-driven and test-driven) ---------------

    Packet make_packet(FlowClass cls, NodeId src, NodeId dst, std::vector<std::uint8_t> payload) {
        Packet pkt;
        pkt.id = next_packet_id_++;
        pkt.cls = cls;
        pkt.src = src;
        pkt.dst = dst;
        pkt.seq = static_cast<std::uint16_t>(seq_counter_[src]++);
        pkt.payload = std::move(payload);

        PacketRecord rec;
        rec.id = pkt.id;
        rec.cls = cls;
        rec.src = src;
        rec.dst = dst;
        rec.enqueue_asn = sim_.now();
        rec.warmup = !warmup_end_asn_ || sim_.now() < *warmup_end_asn_;
        records_.push_back(rec);
        return pkt;
    }

    void inject_app_packet(NodeId src) {
        Packet pkt = make_packet(FlowClass::App, src, kControllerNode,
                                 std::vector<std::uint8_t>(sc_.app_payload_bytes, 0));
        process_at_node_(src, std::move(pkt));
    }

    // Runs a packet through the owning node's forwarding decision, exactly
    // as a locally originated packet would be.
    void send_packet(NodeId from, Packet pkt) { process_at_node_(from, std::move(pkt)); }

    // Injects a frame straight onto a track at its source (used by the
    // deterministic-latency checks).
    void inject_track_frame(TrackId track_id) {
        Track* t = tracks_.find(track_id);
        if (t == nullptr || t->state != TrackState::Active) {
            throw SimError("inject_track_frame: track not active");
        }
        Packet pkt = make_packet(FlowClass::App, t->source, t->destination, {0});
        enqueue_track_frame_(t->source, *t, std::move(pkt));
    }

    // --- slot execution -------------------------------------------------------

    // Executes one TSCH slot: dedicated cells transmit their head-of-line
    // frame of the right class; shared cells run slotted contention where
    // simultaneous in-range transmitters (or two frames to one receiver)
    // all collide. Losses are outcomes, never errors.
    void execute_slot(Asn asn) {
        outcomes_.clear();
        const auto slot = static_cast<std::uint16_t>(asn % sched_.length());
        const std::vector<Cell> cells = sched_.cells_at(slot); // snapshot

        struct Planned {
            CellAddr cell;
            bool shared;
            NodeId src;
            NodeId dst;
            bool track;
            TrackId track_id;
            bool collided = false;
        };
        std::vector<Planned> plan;

        for (const Cell& c : cells) {
            if (c.kind == CellKind::Shared) {
                std::size_t contenders = 0;
                for (NodeId n = 0; n < topo_.node_count(); ++n) {
                    NodeId neighbor = kNoNode;
                    Frame* head = queues_[n].oldest_best_effort_head(&neighbor);
                    // Contention slots carry mesh-originated traffic; the
                    // controller's downlink sticks to its scheduled cells.
                    if (head == nullptr || head->pkt.cls == FlowClass::SdnDown) {
                        continue;
                    }
                    if (!shared_backoff_.bernoulli(sc_.p_shared)) {
                        continue;
                    }
                    plan.push_back({c.addr(), true, n, neighbor, false, 0});
                    ++contenders;
                }
                if (contenders == 0 && capture_) {
                    outcomes_.push_back({c.addr(), true, TxOutcome::Idle});
                }
                continue;
            }
            if (c.state == CellState::Tentative) {
                continue; // reserved, not yet part of the live schedule
            }
            Frame* head = c.track ? queues_[c.src].track_head(*c.track)
                                  : queues_[c.src].best_effort_head(c.dst);
            if (head == nullptr) {
                if (capture_) {
                    outcomes_.push_back({c.addr(), false, TxOutcome::Idle, c.src, c.dst});
                }
                continue;
            }
            plan.push_back({c.addr(), false, c.src, c.dst, c.track.has_value(),
                            c.track.value_or(0)});
        }

        // Dynamic conflict audit: no node may transmit twice or transmit and
        // receive in the same slot across dedicated cells.
        {
            std::set<NodeId> busy;
            for (const auto& p : plan) {
                if (p.shared) {
                    continue;
                }
                if (!busy.insert(p.src).second || !busy.insert(p.dst).second) {
                    ++audit_violations_;
                }
            }
        }

        // Shared-cell collisions: mutually in-range transmitters or a common
        // receiver. Dedicated cells never collide by schedule construction.
        for (std::size_t i = 0; i < plan.size(); ++i) {
            if (!plan[i].shared) {
                continue;
            }
            for (std::size_t j = 0; j < plan.size(); ++j) {
                if (i == j || !plan[j].shared) {
                    continue;
                }
                if (topo_.in_range(plan[i].src, plan[j].src) || plan[i].dst == plan[j].dst) {
                    plan[i].collided = true;
                    break;
                }
            }
        }

        for (const auto& p : plan) {
            NodeId shared_neighbor = kNoNode;
            Frame* head = p.shared
                              ? queues_[p.src].oldest_best_effort_head(&shared_neighbor)
                              : (p.track ? queues_[p.src].track_head(p.track_id)
                                         : queues_[p.src].best_effort_head(p.dst));
            if (head == nullptr) {
                continue;
            }
            auto& att = link_attempts_[p.src][head->to];
            ++att.first;
            ++tx_count_[p.src];
            bool ok = false;
            TxOutcome outcome;
            if (p.collided) {
                outcome = TxOutcome::Collision;
            } else if (faults_.should_drop(*head)) {
                outcome = TxOutcome::LinkLoss;
            } else if (topo_.attempt_delivery(head->from, head->to, link_loss_)) {
                ok = true;
                outcome = TxOutcome::Delivered;
            } else {
                outcome = TxOutcome::LinkLoss;
            }
            if (capture_) {
                outcomes_.push_back(
                    {p.cell, p.shared, outcome, head->from, head->to, head->pkt.id});
            }
            auto pop_head = [&] {
                if (p.shared) {
                    queues_[p.src].pop_best_effort(shared_neighbor);
                } else if (p.track) {
                    queues_[p.src].pop_track(p.track_id);
                } else {
                    queues_[p.src].pop_best_effort(p.dst);
                }
            };
            if (ok) {
                ++att.second;
                Frame delivered = std::move(*head);
                pop_head();
                ++ledger_.delivered;
                ++rx_count_[delivered.to];
                receive_frame_(std::move(delivered), p.track, p.track_id);
            } else {
                ++head->retries;
                if (head->retries > sc_.max_retries) {
                    Frame dead = std::move(*head);
                    pop_head();
                    ++ledger_.drop_retry_limit;
                    drop_packet_(dead.pkt, DropReason::RetryLimit);
                }
            }
        }
    }

    // --- dumps ---------------------------------------------------------------

    std::string schedule_dump() const { return sched_.dump_grid(); }
    std::string track_dump() const { return tracks_.dump(); }

    std::vector<std::string> full_audit() const {
        std::vector<std::string> bad = sched_.audit();
        for (auto& s : tracks_.audit()) {
            bad.push_back(std::move(s));
        }
        if (audit_violations_ > 0) {
            bad.push_back(std::to_string(audit_violations_) + " per-slot conflicts");
        }
        return bad;
    }

    std::size_t queued_frames() const {
        std::size_t n = 0;
        for (const auto& q : queues_) {
            n += q.total_occupancy();
        }
        return n;
    }

    // Tears a track down: cells return to the free pool and every queued
    // frame of that class is dropped as TrackStale. A second release (or an
    // unknown id) is a no-op and returns false.
    bool release_track(TrackId id) {
        Track* t = tracks_.find(id);
        if (t == nullptr || t->state == TrackState::Released) {
            return false;
        }
        for (NodeId hop : t->path) {
            for (Frame& f : queues_[hop].drain_track(id)) {
                ++ledger_.drop_track_stale;
                drop_packet_(f.pkt, DropReason::TrackStale);
            }
        }
        if (nodes_.count(t->source) && nodes_.at(t->source)->track_binding() == id) {
            nodes_.at(t->source)->clear_track();
        }
        return tracks_.release(id, sched_);
    }

    // --- track allocation (distributed, message-driven) ---------------------

    // Kicks off the hop-by-hop reservation from `source` toward the
    // controller along the DAG parent chain.
    TrackId start_track_allocation(NodeId source) {
        ++track_attempts_[source];
        const TrackId id =
            static_cast<TrackId>((source << 4) | (track_attempts_[source] & 0x0F));
        std::vector<NodeId> path;
        for (NodeId cur = source;; cur = dag_.parent(cur)) {
            path.push_back(cur);
            if (cur == dag_.root()) {
                break;
            }
        }
        alloc_pending_[source] = id;
        TrackReqMsg req;
        req.track = id;
        req.requester = source;
        req.destination = dag_.root();
        req.bandwidth = static_cast<std::uint8_t>(sc_.track_bandwidth);
        req.prev_slot = kNoIngressSlot;
        req.path = path;
        send_track_leg_(source, path[1], TrackMsg{req});

        const Asn timeout = 2ull * sc_.hold_slotframes * sched_.length();
        sim_.schedule_event(sim_.now() + timeout, "track-alloc-timeout",
                            [this, source, id] { on_alloc_timeout_(source, id); });
        return id;
    }

private:
    // --- slot tick chain ---------------------------------------------------

    void schedule_slot_tick_(Asn asn) {
        sim_.schedule_event(asn, "slot", [this, asn] {
            execute_slot(asn);
            schedule_slot_tick_(asn + 1);
        });
    }

    // --- frame and packet plumbing -------------------------------------------

    PacketRecord& record_(PacketId id) { return records_.at(id); }

    void drop_packet_by_id_(PacketId id, DropReason reason) {
        PacketRecord& r = record_(id);
        if (!r.terminal()) {
            r.drop = reason;
        }
    }

    void drop_packet_(const Packet& pkt, DropReason reason) {
        drop_packet_by_id_(pkt.id, reason);
    }

    void enqueue_best_effort_frame_(NodeId at, NodeId next_hop, Packet pkt) {
        if (pkt.wire_bytes() > kMaxFrameBytes) {
            throw CodecError("frame exceeds 127 bytes");
        }
        const PacketId pid = pkt.id;
        Frame f;
        f.from = at;
        f.to = next_hop;
        f.pkt = std::move(pkt);
        f.enqueue_seq = ++enqueue_seq_;
        ++ledger_.enqueued;
        if (!queues_[at].enqueue_best_effort(next_hop, std::move(f))) {
            ++ledger_.drop_queue_overflow;
            drop_packet_by_id_(pid, DropReason::QueueOverflow);
        }
    }

    void enqueue_track_frame_(NodeId at, const Track& t, Packet pkt) {
        const CellBundle* egress = t.egress_of(at);
        auto next = t.next_hop_after(at);
        if (egress == nullptr || !next) {
            ++ledger_.drop_track_stale;
            drop_packet_(pkt, DropReason::TrackStale);
            return;
        }
        const PacketId pid = pkt.id;
        Frame f;
        f.from = at;
        f.to = *next;
        f.on_track = true;
        f.track = t.id;
        f.pkt = std::move(pkt);
        f.enqueue_seq = ++enqueue_seq_;
        ++ledger_.enqueued;
        if (!queues_[at].enqueue_track(t.id, std::move(f))) {
            ++ledger_.drop_queue_overflow;
            drop_packet_by_id_(pid, DropReason::QueueOverflow);
        }
    }

    static void srh_advance_(Packet& pkt, NodeId self) {
        while (!pkt.srh.empty() && pkt.srh.front() == self) {
            pkt.srh.erase(pkt.srh.begin());
        }
    }

    NodeId srh_or_default_next_(const Packet& pkt, NodeId at) const {
        if (!pkt.srh.empty()) {
            return pkt.srh.front();
        }
        if (at == dag_.root()) {
            throw SimError("no route from root without an SRH");
        }
        return dag_.next_hop_default(at);
    }

    // The Layer-3 / SDN decision point for a packet sitting at a node,
    // whether freshly originated or forwarded.
    void process_at_node_(NodeId at, Packet pkt) {
        if (pkt.dst == at) {
            deliver_local_(at, std::move(pkt));
            return;
        }
        if (pkt.cls == FlowClass::TrackCtl) {
            // Reservation signaling travels leg by leg between direct
            // neighbors, upward or downward.
            const NodeId next = pkt.dst;
            enqueue_best_effort_frame_(at, next, std::move(pkt));
            return;
        }
        if (!sdn_enabled() || at == kControllerNode || !nodes_.count(at)) {
            const NodeId next = srh_or_default_next_(pkt, at);
            enqueue_best_effort_frame_(at, next, std::move(pkt));
            return;
        }

        SdnNode& node = *nodes_.at(at);
        PipelineResult res = node.handle_packet(pkt, sim_.now_s());
        apply_pipeline_result_(at, std::move(pkt), res);
    }

    void apply_pipeline_result_(NodeId at, Packet pkt, PipelineResult& res) {
        SdnNode& node = *nodes_.at(at);
        switch (res.disposition) {
        case Disposition::DeliveredLocal:
            deliver_local_(at, std::move(pkt));
            return;
        case Disposition::ForwardedL3: {
            // Controller-bound control rides the node's track when it has
            // one; everything else follows the SRH or the default route.
            if (controller_bound_(pkt) && node.track_binding()) {
                Track* t = tracks_.find(*node.track_binding());
                if (t != nullptr && t->state == TrackState::Active) {
                    enqueue_track_frame_(at, *t, std::move(pkt));
                    return;
                }
            }
            const NodeId next = srh_or_default_next_(pkt, at);
            enqueue_best_effort_frame_(at, next, std::move(pkt));
            return;
        }
        case Disposition::ForwardedSdn: {
            if (!res.srh_to_push.empty()) {
                pkt.srh = res.srh_to_push;
                srh_advance_(pkt, at);
            }
            if (controller_bound_(pkt) && node.track_binding()) {
                Track* t = tracks_.find(*node.track_binding());
                if (t != nullptr && t->state == TrackState::Active) {
                    enqueue_track_frame_(at, *t, std::move(pkt));
                    return;
                }
            }
            NodeId next = !pkt.srh.empty() ? pkt.srh.front()
                                           : res.next_hop.value_or(srh_or_default_next_(pkt, at));
            enqueue_best_effort_frame_(at, next, std::move(pkt));
            return;
        }
        case Disposition::QueriedBuffered: {
            for (const Packet& evicted : res.buffer_evicted) {
                drop_packet_(evicted, DropReason::QueryBufferOverflow);
            }
            if (res.query) {
                send_control_message_(at, FlowClass::Ftq, SdnMessage{*res.query});
                schedule_query_timeout_(at, pkt, res.query->query_seq);
            }
            return;
        }
        case Disposition::Dropped:
            drop_packet_(pkt, res.drop_reason == DropReason::None ? DropReason::FlowDrop
                                                                  : res.drop_reason);
            return;
        }
    }

    bool controller_bound_(const Packet& pkt) const {
        return pkt.dst == kControllerNode &&
               (pkt.cls == FlowClass::Nsu || pkt.cls == FlowClass::Ftq ||
                pkt.cls == FlowClass::Cjoin);
    }

    void schedule_query_timeout_(NodeId at, const Packet& trigger, std::uint16_t query_seq) {
        const auto key = FlowKey::from_header(trigger.header_image());
        if (!key) {
            return;
        }
        const FlowKey k = *key;
        sim_.schedule_after_s(sc_.query_timeout_s, "query-timeout", [this, at, k, query_seq] {
            SdnNode& node = *nodes_.at(at);
            auto result = node.on_query_timeout(k, query_seq, sim_.now_s());
            for (const Packet& dead : result.dropped) {
                drop_packet_(dead, DropReason::QueryTimeout);
            }
            if (result.retry) {
                const std::uint16_t seq = result.retry->query_seq;
                send_control_message_(at, FlowClass::Ftq, SdnMessage{*result.retry});
                sim_.schedule_after_s(sc_.query_timeout_s, "query-timeout",
                                      [this, at, k, seq] {
                                          SdnNode& nd = *nodes_.at(at);
                                          auto r2 = nd.on_query_timeout(k, seq, sim_.now_s());
                                          for (const Packet& dead : r2.dropped) {
                                              drop_packet_(dead, DropReason::QueryTimeout);
                                          }
                                      });
            }
        });
    }

    // Wraps a controller protocol message in a packet and runs it through
    // the sender's own pipeline.
    void send_control_message_(NodeId from, FlowClass cls, const SdnMessage& msg) {
        Packet pkt = make_packet(cls, from, kControllerNode, encode_message(msg));
        process_at_node_(from, std::move(pkt));
    }

    void send_from_controller_(const OutMsg& out) {
        Packet pkt = make_packet(FlowClass::SdnDown, kControllerNode, out.dest,
                                 encode_message(out.msg));
        pkt.srh = dag_.source_route(out.dest);
        srh_advance_(pkt, kControllerNode);
        if (pkt.dst == kControllerNode) {
            deliver_local_(kControllerNode, std::move(pkt));
            return;
        }
        const NodeId next = pkt.srh.empty() ? pkt.dst : pkt.srh.front();
        enqueue_best_effort_frame_(kControllerNode, next, std::move(pkt));
    }

    // --- reception -------------------------------------------------------------

    void receive_frame_(Frame frame, bool via_track_cell, TrackId track_id) {
        const NodeId at = frame.to;
        Packet pkt = std::move(frame.pkt);
        PacketRecord& rec = record_(pkt.id);
        ++rec.hop_count;
        rec.via_track_only = rec.via_track_only && via_track_cell;

        if (via_track_cell) {
            Track* t = tracks_.find(track_id);
            if (t == nullptr || t->state != TrackState::Active) {
                ++ledger_.drop_track_stale;
                drop_packet_(pkt, DropReason::TrackStale);
                return;
            }
            if (at == t->destination) {
                deliver_local_(at, std::move(pkt));
                return;
            }
            // Layer-2 switching: ingress bundle straight to the paired
            // egress bundle, no Layer-3 processing at all.
            enqueue_track_frame_(at, *t, std::move(pkt));
            return;
        }

        if (pkt.cls == FlowClass::TrackCtl) {
            if (pkt.dst == at) {
                deliver_local_(at, std::move(pkt));
            } else {
                process_at_node_(at, std::move(pkt));
            }
            return;
        }
        srh_advance_(pkt, at);
        process_at_node_(at, std::move(pkt));
    }

    void deliver_local_(NodeId at, Packet pkt) {
        PacketRecord& rec = record_(pkt.id);
        if (!rec.terminal()) {
            rec.deliver_asn = sim_.now();
        }
        switch (pkt.cls) {
        case FlowClass::App:
        case FlowClass::Rpl:
            return; // sink
        case FlowClass::Cjoin: {
            const auto msg = decode_message(pkt.payload);
            for (const auto& out : ctrl_.handle_cjoin(std::get<CjoinMsg>(msg), sim_.now_s())) {
                send_from_controller_(out);
            }
            return;
        }
        case FlowClass::Nsu: {
            const auto msg = decode_message(pkt.payload);
            for (const auto& out : ctrl_.handle_nsu(std::get<NsuMsg>(msg), sim_.now_s())) {
                send_from_controller_(out);
            }
            return;
        }
        case FlowClass::Ftq: {
            const auto msg = decode_message(pkt.payload);
            for (const auto& out : ctrl_.handle_ftq(std::get<FtqMsg>(msg), sim_.now_s())) {
                send_from_controller_(out);
            }
            return;
        }
        case FlowClass::SdnDown:
            handle_sdn_down_(at, pkt);
            return;
        case FlowClass::TrackCtl:
            handle_track_signal_(at, pkt);
            return;
        }
    }

    void handle_sdn_down_(NodeId at, const Packet& pkt) {
        if (!nodes_.count(at)) {
            return;
        }
        SdnNode& node = *nodes_.at(at);
        const auto msg = decode_message(pkt.payload);
        if (std::holds_alternative<CackMsg>(msg)) {
            node.on_cack(std::get<CackMsg>(msg));
            on_join_progress_(at);
        } else if (std::holds_alternative<ConfMsg>(msg)) {
            node.on_conf(std::get<ConfMsg>(msg), sim_.now_s());
            on_join_progress_(at);
        } else if (std::holds_alternative<FtsMsg>(msg)) {
            auto result = node.apply_fts(std::get<FtsMsg>(msg), sim_.now_s());
            for (auto& [flushed_pkt, res] : result.flushed) {
                apply_pipeline_result_(at, std::move(flushed_pkt), res);
            }
        }
    }

    // --- join machinery --------------------------------------------------------

    void start_join_(NodeId n) {
        SdnNode& node = *nodes_.at(n);
        CjoinMsg msg = node.start_join(sim_.now_s());
        send_control_message_(n, FlowClass::Cjoin, SdnMessage{msg});
        schedule_join_retry_(n);
    }

    void schedule_join_retry_(NodeId n) {
        sim_.schedule_after_s(sc_.cjoin_retry_s, "cjoin-retry", [this, n] {
            SdnNode& node = *nodes_.at(n);
            if (node.join_state() != JoinState::Joining) {
                return;
            }
            if (auto msg = node.retry_join(sim_.now_s())) {
                send_control_message_(n, FlowClass::Cjoin, SdnMessage{*msg});
                schedule_join_retry_(n);
            } else {
                maybe_finish_warmup_(); // JoinFailed is terminal too
            }
        });
    }

    void on_join_progress_(NodeId n) {
        SdnNode& node = *nodes_.at(n);
        if (node.join_state() != JoinState::Joined || joined_hook_done_.count(n)) {
            return;
        }
        joined_hook_done_.insert(n);
        if (track_mode()) {
            start_track_allocation(n);
        } else {
            arm_nsu_timer_(n);
            maybe_finish_warmup_();
        }
    }

    void arm_nsu_timer_(NodeId n) {
        SdnNode& node = *nodes_.at(n);
        Asn fire = sim_.now() + sim_.clock().slots_for_s(node.nsu_period_s());
        // With a track up, phase the tick onto the slice's egress cell so the
        // update leaves on the very next transmission opportunity.
        if (node.track_binding()) {
            if (const Track* t = tracks_.find(*node.track_binding());
                t != nullptr && t->state == TrackState::Active) {
                if (const CellBundle* egress = t->egress_of(n); egress && !egress->cells.empty()) {
                    const Asn len = sched_.length();
                    const Asn target = egress->cells.front().slot;
                    fire += (target + len - fire % len) % len;
                }
            }
        }
        sim_.schedule_event(fire, "nsu-tick", [this, n] { nsu_tick_(n); });
    }

    void nsu_tick_(NodeId n) {
        SdnNode& node = *nodes_.at(n);
        SdnNode::NsuContext ctx;
        ctx.energy = energy_estimate_(n);
        ctx.queue_occupancy = static_cast<std::uint8_t>(
            std::min<std::size_t>(queues_[n].total_occupancy(), 255));
        ctx.neighbors = neighbor_reports_(n);
        if (auto msg = node.tick_nsu(sim_.now_s(), ctx)) {
            send_control_message_(n, FlowClass::Nsu, SdnMessage{*msg});
        }
        arm_nsu_timer_(n); // period is re-read each time, CONF can retune it
    }

    std::uint16_t energy_estimate_(NodeId n) const {
        const std::uint64_t e = 3ull * tx_count_[n] + rx_count_[n];
        return static_cast<std::uint16_t>(std::min<std::uint64_t>(e, 0xFFFF));
    }

    std::vector<NeighborReport> neighbor_reports_(NodeId n) const {
        std::vector<NeighborReport> out;
        for (NodeId nb : topo_.neighbors(n)) {
            const auto it = link_attempts_[n].find(nb);
            std::uint8_t est = 255;
            if (it != link_attempts_[n].end() && it->second.first > 0) {
                est = static_cast<std::uint8_t>(
                    255.0 * it->second.second / it->second.first + 0.5);
            }
            out.push_back({nb, est});
        }
        return out;
    }

    void maybe_finish_warmup_() {
        if (warmup_end_asn_ || !sdn_enabled()) {
            return;
        }
        for (NodeId n = 1; n < topo_.node_count(); ++n) {
            const SdnNode& node = *nodes_.at(n);
            if (node.join_state() == JoinState::JoinFailed) {
                continue;
            }
            if (track_mode()) {
                if (node.join_state() != JoinState::TrackReady &&
                    !(node.join_state() == JoinState::Joined &&
                      track_attempts_[n] >= sc_.track_max_attempts && !alloc_pending_.count(n))) {
                    return;
                }
            } else if (node.join_state() != JoinState::Joined) {
                return;
            }
        }
        warmup_end_asn_ = sim_.now();
    }

    std::string join_diagnostics_() const {
        std::string s = "join states:";
        for (NodeId n = 1; n < topo_.node_count(); ++n) {
            s += " " + std::to_string(n) + "=" + to_string(nodes_.at(n)->join_state());
        }
        return s;
    }

    // --- app traffic ------------------------------------------------------------

    void schedule_app_send_(NodeId n, double delay_s) {
        sim_.schedule_after_s(delay_s, "app-send", [this, n] {
            inject_app_packet(n);
            schedule_app_send_(n,
                               app_interval_.uniform(sc_.app_interval_min_s, sc_.app_interval_max_s));
        });
    }

    // --- track signaling ---------------------------------------------------------

    void send_track_leg_(NodeId from, NodeId to, const TrackMsg& msg) {
        Packet pkt = make_packet(FlowClass::TrackCtl, from, to, encode_track_msg(msg));
        process_at_node_(from, std::move(pkt));
    }

    void handle_track_signal_(NodeId at, const Packet& pkt) {
        const TrackMsg msg = decode_track_msg(pkt.payload);
        if (std::holds_alternative<TrackReqMsg>(msg)) {
            handle_track_req_(at, std::get<TrackReqMsg>(msg));
        } else if (std::holds_alternative<TrackConfirmMsg>(msg)) {
            handle_track_confirm_(at, std::get<TrackConfirmMsg>(msg));
        } else {
            handle_track_fail_(at, std::get<TrackFailMsg>(msg));
        }
    }

    static std::size_t path_index_(const std::vector<NodeId>& path, NodeId n) {
        for (std::size_t i = 0; i < path.size(); ++i) {
            if (path[i] == n) {
                return i;
            }
        }
        throw SimError("track signaling: node not on path");
    }

    void handle_track_req_(NodeId at, TrackReqMsg req) {
        const std::size_t idx = path_index_(req.path, at);
        const NodeId prev = req.path[idx - 1];
        const std::uint16_t ingress =
            req.prev_slot == kNoIngressSlot ? 0 : req.prev_slot;

        std::optional<std::vector<CellAddr>> cand;
        if (!track_fail_at_.count(at)) {
            cand = select_candidate_cells(sched_, prev, at, ingress, req.bandwidth);
        }
        if (!cand) {
            track_failures_.push_back({req.track, at});
            TrackFailMsg fail;
            fail.track = req.track;
            fail.requester = req.requester;
            fail.failed_at = at;
            fail.path = req.path;
            send_track_leg_(at, prev, TrackMsg{fail});
            return;
        }
        for (const auto& addr : *cand) {
            sched_.add_dedicated(addr, prev, at, req.track, CellState::Tentative);
        }
        tentative_[{req.track, at}] = *cand;
        schedule_hold_expiry_(req.track, at);
        req.chosen.push_back({prev, at, *cand});

        if (at == req.destination) {
            // Commit our own ingress cells and confirm back along the path.
            commit_tentative_(req.track, at);
            Track t;
            t.id = req.track;
            t.source = req.requester;
            t.destination = req.destination;
            t.path = req.path;
            for (auto it = req.chosen.rbegin(); it != req.chosen.rend(); ++it) {
                t.bundles.push_back({it->src, it->dst, req.track, it->cells});
            }
            std::reverse(t.bundles.begin(), t.bundles.end());
            t.state = TrackState::Active;
            tracks_.install(std::move(t));

            TrackConfirmMsg confirm;
            confirm.track = req.track;
            confirm.requester = req.requester;
            confirm.destination = req.destination;
            confirm.path = req.path;
            confirm.bundles = req.chosen;
            send_track_leg_(at, req.path[idx - 1], TrackMsg{confirm});
            return;
        }
        req.prev_slot = cand->front().slot;
        send_track_leg_(at, req.path[idx + 1], TrackMsg{req});
    }

    void handle_track_confirm_(NodeId at, const TrackConfirmMsg& confirm) {
        const std::size_t idx = path_index_(confirm.path, at);
        if (!commit_tentative_(confirm.track, at) && at != confirm.requester) {
            // Our hold timer already released the reservation; the track is
            // broken, tell the source.
            TrackFailMsg fail;
            fail.track = confirm.track;
            fail.requester = confirm.requester;
            fail.failed_at = at;
            fail.path = confirm.path;
            if (idx > 0) {
                send_track_leg_(at, confirm.path[idx - 1], TrackMsg{fail});
            }
            return;
        }
        if (at == confirm.requester) {
            auto it = alloc_pending_.find(at);
            if (it == alloc_pending_.end() || it->second != confirm.track) {
                // A superseded attempt completed anyway; tear it down so its
                // committed cells return to the pool.
                release_track(confirm.track);
                return;
            }
            alloc_pending_.erase(it);
            SdnNode& node = *nodes_.at(at);
            node.mark_track_ready(confirm.track);
            arm_nsu_timer_(at);
            maybe_finish_warmup_();
            return;
        }
        send_track_leg_(at, confirm.path[idx - 1], TrackMsg{confirm});
    }

    void handle_track_fail_(NodeId at, const TrackFailMsg& fail) {
        release_tentative_(fail.track, at);
        if (at == fail.requester) {
            finish_failed_alloc_(at, fail.track);
            return;
        }
        const std::size_t idx = path_index_(fail.path, at);
        if (idx > 0) {
            send_track_leg_(at, fail.path[idx - 1], TrackMsg{fail});
        }
    }

    bool commit_tentative_(TrackId track, NodeId at) {
        auto it = tentative_.find({track, at});
        if (it == tentative_.end()) {
            // The destination commits the cells it reserved moments before;
            // intermediate hops may legitimately have nothing (source).
            return false;
        }
        for (const auto& addr : it->second) {
            sched_.commit(addr);
        }
        tentative_.erase(it);
        return true;
    }

    void release_tentative_(TrackId track, NodeId at) {
        auto it = tentative_.find({track, at});
        if (it == tentative_.end()) {
            return;
        }
        for (const auto& addr : it->second) {
            const Cell* c = sched_.find(addr);
            if (c != nullptr && c->state == CellState::Tentative && c->track == track) {
                sched_.remove(addr);
            }
        }
        tentative_.erase(it);
    }

    void schedule_hold_expiry_(TrackId track, NodeId at) {
        const Asn hold = static_cast<Asn>(sc_.hold_slotframes) * sched_.length();
        sim_.schedule_event(sim_.now() + hold, "track-hold-expiry",
                            [this, track, at] { release_tentative_(track, at); });
    }

    void on_alloc_timeout_(NodeId source, TrackId id) {
        auto it = alloc_pending_.find(source);
        if (it == alloc_pending_.end() || it->second != id) {
            return; // finished or superseded
        }
        finish_failed_alloc_(source, id); // tears down whatever committed
    }

    void finish_failed_alloc_(NodeId source, TrackId id) {
        // A failed attempt may have committed cells on the hops the confirm
        // already crossed; tear down whatever it still owns.
        if (Track* t = tracks_.find(id)) {
            if (t->state == TrackState::Active) {
                release_track(id);
            } else if (t->state == TrackState::Allocating) {
                t->state = TrackState::Failed;
            }
        }
        auto it = alloc_pending_.find(source);
        if (it == alloc_pending_.end() || it->second != id) {
            return;
        }
        alloc_pending_.erase(it);
        if (track_attempts_[source] < sc_.track_max_attempts) {
            sim_.schedule_after_s(sc_.track_retry_s, "track-alloc-retry", [this, source] {
                if (nodes_.at(source)->join_state() == JoinState::Joined) {
                    start_track_allocation(source);
                }
            });
        } else {
            // Out of attempts: the node stays Joined with best-effort control.
            arm_nsu_timer_(source);
            maybe_finish_warmup_();
        }
    }

    // --- run teardown --------------------------------------------------------

    void finalize_() {
        for (auto& rec : records_) {
            if (!rec.terminal()) {
                rec.drop = DropReason::EndOfRun;
            }
        }
    }

    Scenario sc_;
    Topology topo_;
    Dag dag_;
    Simulator sim_;
    Schedule sched_;
    RngStream link_loss_;
    RngStream app_interval_;
    RngStream shared_backoff_;
    Controller ctrl_;
    TrackRegistry tracks_;
    FaultPlan faults_;

    std::vector<TxQueues> queues_;
    std::map<NodeId, std::unique_ptr<SdnNode>> nodes_;
    std::vector<PacketRecord> records_;
    FrameLedger ledger_;

    std::vector<std::uint64_t> tx_count_;
    std::vector<std::uint64_t> rx_count_;
    // per node: neighbor -> (attempts, successes)
    std::vector<std::map<NodeId, std::pair<std::uint32_t, std::uint32_t>>> link_attempts_;

    std::map<std::pair<TrackId, NodeId>, std::vector<CellAddr>> tentative_;
    std::map<NodeId, TrackId> alloc_pending_;
    std::vector<int> track_attempts_;
    std::vector<std::pair<TrackId, NodeId>> track_failures_;
    std::set<NodeId> track_fail_at_;
    std::set<NodeId> joined_hook_done_;

    PacketId next_packet_id_ = 0;
    std::map<NodeId, std::uint32_t> seq_counter_;
    std::uint64_t enqueue_seq_ = 0;
    std::uint64_t audit_violations_ = 0;
    std::optional<Asn> warmup_end_asn_;
    bool started_ = false;
    bool capture_ = false;
    std::vector<SlotEvent> outcomes_;
};

} // namespace slicesim
