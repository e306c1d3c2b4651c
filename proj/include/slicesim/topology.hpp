#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "slicesim/rng.hpp"
#include "slicesim/types.hpp"

namespace slicesim {

// Node placement plus the unit-disk radio model: a transmission reaches its
// destination iff the nodes are within tx_range, and then succeeds with a
// flat per-attempt probability (no burst-loss memory). Immutable once built.
class Topology {
public:
    struct Point {
        double x = 0;
        double y = 0;
    };

    Topology(std::vector<Point> positions, double tx_range_m, double link_quality)
        : positions_(std::move(positions)), tx_range_m_(tx_range_m), link_quality_(link_quality) {
        if (tx_range_m_ <= 0) {
            throw ScenarioError("topology: tx_range must be > 0");
        }
        if (link_quality_ < 0.0 || link_quality_ > 1.0) {
            throw ScenarioError("topology: link_quality must be in [0,1]");
        }
        if (positions_.empty()) {
            throw ScenarioError("topology: no nodes");
        }
        if (!connected_()) {
            throw ScenarioError("topology: connectivity graph is not connected");
        }
    }

    // hop_count+1 nodes on a line, node 0 the controller. With spacing in
    // (tx_range/2, tx_range] each node hears exactly its line neighbors.
    static Topology linear_chain(int hop_count, double spacing_m, double tx_range_m,
                                 double link_quality) {
        if (hop_count < 1) {
            throw ScenarioError("linear topology: hop_count must be >= 1");
        }
        if (spacing_m <= 0 || spacing_m > tx_range_m) {
            throw ScenarioError("linear topology: spacing must be in (0, tx_range]");
        }
        std::vector<Point> pos;
        pos.reserve(static_cast<std::size_t>(hop_count) + 1);
        for (int i = 0; i <= hop_count; ++i) {
            pos.push_back({spacing_m * i, 0.0});
        }
        return Topology(std::move(pos), tx_range_m, link_quality);
    }

    std::size_t node_count() const { return positions_.size(); }
    double tx_range_m() const { return tx_range_m_; }
    double link_quality() const { return link_quality_; }

    double distance(NodeId a, NodeId b) const {
        check_(a);
        check_(b);
        const double dx = positions_[a].x - positions_[b].x;
        const double dy = positions_[a].y - positions_[b].y;
        return std::sqrt(dx * dx + dy * dy);
    }

    bool in_range(NodeId a, NodeId b) const { return distance(a, b) <= tx_range_m_; }

    std::vector<NodeId> neighbors(NodeId n) const {
        check_(n);
        std::vector<NodeId> out;
        for (NodeId m = 0; m < node_count(); ++m) {
            if (m != n && in_range(n, m)) {
                out.push_back(m);
            }
        }
        return out;
    }

    // One transmission attempt. Out of range never delivers and consumes no
    // randomness; in range is a Bernoulli(link_quality) draw from the
    // caller's link-loss stream.
    bool attempt_delivery(NodeId src, NodeId dst, RngStream& rng) const {
        if (src == dst) {
            throw SimError("attempt_delivery: src == dst");
        }
        if (!in_range(src, dst)) {
            return false;
        }
        return rng.bernoulli(link_quality_);
    }

private:
    void check_(NodeId n) const {
        if (n >= node_count()) {
            throw SimError("topology: unknown node " + std::to_string(n));
        }
    }

    bool connected_() const {
        std::vector<bool> seen(node_count(), false);
        std::vector<NodeId> stack{0};
        seen[0] = true;
        std::size_t visited = 1;
        while (!stack.empty()) {
            NodeId n = stack.back();
            stack.pop_back();
            for (NodeId m = 0; m < node_count(); ++m) {
                if (!seen[m] && m != n && in_range(n, m)) {
                    seen[m] = true;
                    ++visited;
                    stack.push_back(m);
                }
            }
        }
        return visited == node_count();
    }

    std::vector<Point> positions_;
    double tx_range_m_;
    double link_quality_;
};

} // namespace slicesim
