#include <doctest.h>

#include <cmath>
#include <vector>

#include "slicesim/rng.hpp"
#include "slicesim/sim_kernel.hpp"

using namespace slicesim;

TEST_CASE("events at the same slot dispatch in insertion order") {
    Simulator sim;
    std::vector<int> order;
    sim.schedule_event(50, "A", [&] { order.push_back(1); });
    sim.schedule_event(50, "B", [&] { order.push_back(2); });
    sim.run_until(50);
    CHECK(order == std::vector<int>{1, 2});
}

TEST_CASE("scheduling at the current asn fires this slot, after queued peers") {
    Simulator sim;
    std::vector<int> order;
    sim.schedule_event(10, "outer", [&] {
        order.push_back(1);
        sim.schedule_event(10, "inner", [&] { order.push_back(3); });
    });
    sim.schedule_event(10, "second", [&] { order.push_back(2); });
    sim.run_until(10);
    CHECK(order == std::vector<int>{1, 2, 3});
}

TEST_CASE("cancelled events never fire") {
    Simulator sim;
    bool fired = false;
    auto id = sim.schedule_event(100, "x", [&] { fired = true; });
    CHECK(sim.cancel(id));
    CHECK_FALSE(sim.cancel(id)); // second cancel: already gone
    sim.run_until(200);
    CHECK_FALSE(fired);
}

TEST_CASE("scheduling in the past aborts the run") {
    Simulator sim;
    sim.run_until(10);
    CHECK_THROWS_AS(sim.schedule_event(5, "late", [] {}), SimError);
}

TEST_CASE("run_until on an empty queue leaves the clock at the target") {
    Simulator sim;
    CHECK(sim.run_until(1000) == 0);
    CHECK(sim.now() == 1000);
}

TEST_CASE("run_until dispatches only events at or before the boundary") {
    Simulator sim;
    int n = 0;
    sim.schedule_event(10, "a", [&] { ++n; });
    sim.schedule_event(20, "b", [&] { ++n; });
    sim.schedule_event(30, "c", [&] { ++n; });
    sim.schedule_event(31, "d", [&] { ++n; });
    CHECK(sim.run_until(30) == 3);
    CHECK(n == 3);
    CHECK(sim.now() == 30);
}

TEST_CASE("clock timestamps are exactly asn * slot_duration") {
    Simulator sim(10.0);
    sim.run_until(12345);
    CHECK(sim.clock().now_ms() == 123450.0); // exact, no drift term
}

namespace {

// A little scenario with chained events and rng use, for the trace diff.
Simulator::EventId chain(Simulator& sim, RngStream& rng, int depth) {
    return sim.schedule_event(sim.now() + 1 + static_cast<Asn>(rng.uniform_int(5)), "chain",
                              [&sim, &rng, depth]() mutable {
                                  if (depth > 0) {
                                      chain(sim, rng, depth - 1);
                                  }
                              });
}

std::vector<Simulator::TraceEntry> run_traced() {
    Simulator sim;
    sim.set_tracing(true);
    RngStream rng(42, "trace-test");
    for (int i = 0; i < 10; ++i) {
        chain(sim, rng, 20);
    }
    sim.run_until(500);
    return sim.trace();
}

} // namespace

TEST_CASE("identical runs dispatch identical event traces") {
    const auto a = run_traced();
    const auto b = run_traced();
    REQUIRE(a.size() > 50);
    CHECK(a == b);
}

TEST_CASE("rng streams are deterministic per (seed, label)") {
    RngStream a(7, "link-loss");
    RngStream b(7, "link-loss");
    for (int i = 0; i < 100; ++i) {
        CHECK(a.draw() == b.draw());
    }
}

TEST_CASE("different stream labels decorrelate draws") {
    RngStream a(7, "link-loss");
    RngStream b(7, "app-interval");
    int equal = 0;
    double sum_abs_diff = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const double x = a.draw();
        const double y = b.draw();
        if (x == y) {
            ++equal;
        }
        sum_abs_diff += std::abs(x - y);
    }
    CHECK(equal == 0);
    // E|U-V| = 1/3 for independent uniforms.
    CHECK(sum_abs_diff / n == doctest::Approx(1.0 / 3.0).epsilon(0.05));
}

TEST_CASE("draws are uniform in [0,1): mean 0.5 within 0.01 over 1e5") {
    RngStream rng(123, "lln");
    double sum = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double x = rng.draw();
        REQUIRE(x >= 0.0);
        REQUIRE(x < 1.0);
        sum += x;
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.02));
    CHECK(std::abs(sum / n - 0.5) < 0.01);
}
