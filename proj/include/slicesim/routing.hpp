#pragma once

#include <algorithm>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "slicesim/topology.hpp"
#include "slicesim/types.hpp"

namespace slicesim {

// Minimal stand-in for RPL: a shortest-hop DAG rooted at the controller,
// built once from the topology. Upward default routes never expire; stored
// downward entries age out after route_lifetime_s (the controller normally
// uses source routes instead, so the storing table sits idle in the default
// scenarios).
class Dag {
public:
    static constexpr double kDefaultRouteLifetime = 600.0;

    static Dag build(const Topology& topo, NodeId root, double route_lifetime_s = kDefaultRouteLifetime) {
        Dag dag;
        dag.root_ = root;
        dag.route_lifetime_s_ = route_lifetime_s;
        const std::size_t n = topo.node_count();
        dag.parent_.assign(n, kNoNode);
        dag.rank_.assign(n, std::numeric_limits<unsigned>::max());

        // BFS by hop count; ties broken by lower parent id (neighbors are
        // scanned in ascending node order, so the first parent seen wins).
        dag.rank_[root] = 0;
        std::deque<NodeId> frontier{root};
        while (!frontier.empty()) {
            NodeId cur = frontier.front();
            frontier.pop_front();
            for (NodeId nb : topo.neighbors(cur)) {
                if (dag.rank_[nb] > dag.rank_[cur] + 1) {
                    dag.rank_[nb] = dag.rank_[cur] + 1;
                    dag.parent_[nb] = cur;
                    frontier.push_back(nb);
                } else if (dag.rank_[nb] == dag.rank_[cur] + 1 && cur < dag.parent_[nb]) {
                    dag.parent_[nb] = cur;
                }
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (dag.rank_[i] == std::numeric_limits<unsigned>::max()) {
                throw ScenarioError("dag: topology is disconnected from the root");
            }
        }
        return dag;
    }

    NodeId root() const { return root_; }

    unsigned rank(NodeId n) const {
        check_(n);
        return rank_[n];
    }

    NodeId parent(NodeId n) const {
        check_(n);
        if (n == root_) {
            throw SimError("dag: root has no parent");
        }
        return parent_[n];
    }

    // Upward default route; infinite lifetime, valid at any simulation time.
    NodeId next_hop_default(NodeId n) const { return parent(n); }

    // Root-to-destination hop list (empty for the root itself).
    std::vector<NodeId> source_route(NodeId destination) const {
        check_(destination);
        std::vector<NodeId> route;
        for (NodeId cur = destination; cur != root_; cur = parent_[cur]) {
            route.push_back(cur);
        }
        std::reverse(route.begin(), route.end());
        return route;
    }

    std::size_t node_count() const { return parent_.size(); }

    // Downward storing-mode entries (Non-Storing SRH is the default path;
    // these expire after route_lifetime_s).
    void add_storing_route(NodeId dst, NodeId next_hop, double now_s) {
        storing_[dst] = StoredRoute{next_hop, now_s};
    }

    std::optional<NodeId> storing_next_hop(NodeId dst, double now_s) const {
        auto it = storing_.find(dst);
        if (it == storing_.end()) {
            return std::nullopt;
        }
        if (now_s - it->second.installed_s > route_lifetime_s_) {
            return std::nullopt; // expired
        }
        return it->second.next_hop;
    }

    double route_lifetime_s() const { return route_lifetime_s_; }

private:
    void check_(NodeId n) const {
        if (n >= parent_.size()) {
            throw SimError("dag: unknown node " + std::to_string(n));
        }
    }

    struct StoredRoute {
        NodeId next_hop;
        double installed_s;
    };

    NodeId root_ = 0;
    double route_lifetime_s_ = kDefaultRouteLifetime;
    std::vector<NodeId> parent_;
    std::vector<unsigned> rank_;
    std::map<NodeId, StoredRoute> storing_;
};

} // namespace slicesim
