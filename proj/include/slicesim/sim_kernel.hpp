#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <string>
#include <unordered_map>
#include <vector>

#include "slicesim/types.hpp"

namespace slicesim {

// Simulation clock. Wall time of any event is exactly asn * slot_ms; there
// is no drift term anywhere in the simulator.
struct SimClock {
    Asn asn = 0;
    double slot_ms = 10.0;

    double now_ms() const { return static_cast<double>(asn) * slot_ms; }
    double now_s() const { return now_ms() / 1000.0; }
    Asn slots_for_s(double seconds) const {
        return static_cast<Asn>(seconds * 1000.0 / slot_ms + 0.5);
    }
};

// Deterministic discrete-event engine. Events are totally ordered by
// (fire_asn, insertion sequence): ties at the same slot dispatch in FIFO
// insertion order, which is what makes identical (scenario, seed) pairs
// reproduce bit-identical runs.
class Simulator {
public:
    using EventId = std::uint64_t;
    using Handler = std::function<void()>;

    explicit Simulator(double slot_ms = 10.0) { clock_.slot_ms = slot_ms; }

    Asn now() const { return clock_.asn; }
    const SimClock& clock() const { return clock_; }
    double now_s() const { return clock_.now_s(); }

    EventId schedule_event(Asn fire_asn, const char* tag, Handler fn) {
        if (fire_asn < clock_.asn) {
            throw SimError("schedule_event: fire_asn " + std::to_string(fire_asn) +
                           " is before current asn " + std::to_string(clock_.asn));
        }
        EventId id = next_id_++;
        queue_.push(Event{fire_asn, next_seq_++, tag, id});
        handlers_.emplace(id, std::move(fn));
        return id;
    }

    EventId schedule_after_s(double delay_s, const char* tag, Handler fn) {
        return schedule_event(clock_.asn + clock_.slots_for_s(delay_s), tag, std::move(fn));
    }

    // Returns true if the event was still pending.
    bool cancel(EventId id) {
        return handlers_.erase(id) > 0;
    }

    // Dispatches every event with fire_asn <= end_asn and leaves the clock
    // at end_asn. Returns the number of events dispatched.
    std::size_t run_until(Asn end_asn) {
        if (end_asn < clock_.asn) {
            throw SimError("run_until: end_asn is before current asn");
        }
        std::size_t dispatched = 0;
        while (!queue_.empty() && queue_.top().fire_asn <= end_asn) {
            Event ev = queue_.top();
            queue_.pop();
            auto it = handlers_.find(ev.id);
            if (it == handlers_.end()) {
                continue; // cancelled
            }
            Handler fn = std::move(it->second);
            handlers_.erase(it);
            clock_.asn = ev.fire_asn;
            if (tracing_) {
                trace_.push_back({ev.fire_asn, ev.seq, ev.tag});
            }
            fn();
            ++dispatched;
        }
        clock_.asn = end_asn;
        return dispatched;
    }

    std::size_t pending_count() const { return handlers_.size(); }

    // Dispatch trace, for determinism checks.
    struct TraceEntry {
        Asn asn;
        std::uint64_t seq;
        std::string tag;
        bool operator==(const TraceEntry&) const = default;
    };
    void set_tracing(bool on) { tracing_ = on; }
    const std::vector<TraceEntry>& trace() const { return trace_; }

private:
    struct Event {
        Asn fire_asn;
        std::uint64_t seq;
        const char* tag;
        EventId id;
    };
    struct Later {
        bool operator()(const Event& a, const Event& b) const {
            if (a.fire_asn != b.fire_asn) return a.fire_asn > b.fire_asn;
            return a.seq > b.seq;
        }
    };

    SimClock clock_;
    std::priority_queue<Event, std::vector<Event>, Later> queue_;
    std::unordered_map<EventId, Handler> handlers_;
    EventId next_id_ = 1;
    std::uint64_t next_seq_ = 0;
    bool tracing_ = false;
    std::vector<TraceEntry> trace_;
};

} // namespace slicesim
