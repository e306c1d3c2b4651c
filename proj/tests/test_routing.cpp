#include <doctest.h>

#include <deque>
#include <limits>
#include <vector>

#include "slicesim/routing.hpp"
#include "slicesim/topology.hpp"

using namespace slicesim;

namespace {

// Plain BFS hop counts, independent of the Dag implementation.
std::vector<unsigned> bfs_ranks(const Topology& topo, NodeId root) {
    std::vector<unsigned> rank(topo.node_count(), std::numeric_limits<unsigned>::max());
    rank[root] = 0;
    std::deque<NodeId> q{root};
    while (!q.empty()) {
        NodeId cur = q.front();
        q.pop_front();
        for (NodeId nb : topo.neighbors(cur)) {
            if (rank[nb] == std::numeric_limits<unsigned>::max()) {
                rank[nb] = rank[cur] + 1;
                q.push_back(nb);
            }
        }
    }
    return rank;
}

} // namespace

TEST_CASE("2-node chain: node 1 parents to the root at rank 1") {
    const auto topo = Topology::linear_chain(1, 90, 100, 0.9);
    const auto dag = Dag::build(topo, 0);
    CHECK(dag.parent(1) == 0);
    CHECK(dag.rank(1) == 1);
    CHECK(dag.rank(0) == 0);
}

TEST_CASE("5-hop chain ranks match a BFS oracle") {
    const auto topo = Topology::linear_chain(5, 90, 100, 0.9);
    const auto dag = Dag::build(topo, 0);
    const auto oracle = bfs_ranks(topo, 0);
    for (NodeId n = 0; n < 6; ++n) {
        CHECK(dag.rank(n) == oracle[n]);
        CHECK(dag.rank(n) == n);
    }
}

TEST_CASE("equal-rank parent candidates break ties to the lower id") {
    // Node 1 is in range of nodes 2 and 4 (both rank 1) but not the root.
    std::vector<Topology::Point> pos{
        {0, 0},   // 0: root
        {10, 10}, // 1: the contended node
        {10, 0},  // 2: rank 1
        {20, 0},  // 3: fills the chain via 2
        {0, 10},  // 4: rank 1
    };
    Topology topo(pos, 10.0, 0.9);
    const auto dag = Dag::build(topo, 0);
    REQUIRE(dag.rank(2) == 1);
    REQUIRE(dag.rank(4) == 1);
    CHECK(dag.rank(1) == 2);
    CHECK(dag.parent(1) == 2);
}

TEST_CASE("parent chains are acyclic and reach the root in rank steps") {
    const auto topo = Topology::linear_chain(5, 40, 100, 0.9);
    const auto dag = Dag::build(topo, 0);
    for (NodeId n = 1; n < topo.node_count(); ++n) {
        NodeId cur = n;
        unsigned steps = 0;
        while (cur != 0) {
            cur = dag.parent(cur);
            ++steps;
            REQUIRE(steps <= topo.node_count());
        }
        CHECK(steps == dag.rank(n));
    }
}

TEST_CASE("source routes reverse the parent chain") {
    const auto topo = Topology::linear_chain(5, 90, 100, 0.9);
    const auto dag = Dag::build(topo, 0);

    CHECK(dag.source_route(5) == std::vector<NodeId>{1, 2, 3, 4, 5});
    CHECK(dag.source_route(1) == std::vector<NodeId>{1});
    CHECK(dag.source_route(0).empty());

    for (NodeId n = 0; n < 6; ++n) {
        CHECK(dag.source_route(n).size() == dag.rank(n));
    }
}

TEST_CASE("default upward route never expires; storing entries do") {
    const auto topo = Topology::linear_chain(5, 90, 100, 0.9);
    auto dag = Dag::build(topo, 0, 600.0);

    CHECK(dag.next_hop_default(3) == 2);
    CHECK_THROWS_AS(dag.next_hop_default(0), SimError);

    dag.add_storing_route(5, 4, 0.0);
    CHECK(dag.storing_next_hop(5, 599.0) == 4);
    CHECK(dag.storing_next_hop(5, 601.0) == std::nullopt); // 10 min lifetime elapsed
    CHECK(dag.storing_next_hop(9, 0.0) == std::nullopt);

    // The default route is still there long past the storing lifetime.
    CHECK(dag.next_hop_default(3) == 2);
}

TEST_CASE("unknown destinations are errors") {
    const auto topo = Topology::linear_chain(2, 90, 100, 0.9);
    const auto dag = Dag::build(topo, 0);
    CHECK_THROWS_AS(dag.source_route(9), SimError);
    CHECK_THROWS_AS(dag.rank(9), SimError);
}
