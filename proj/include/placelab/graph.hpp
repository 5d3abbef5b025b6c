#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <string>
#include <vector>

namespace placelab {

using NodeId = std::int32_t;

// One operation in a computation graph. Times are integer microseconds so
// that schedule arithmetic stays exact; sizes are bytes.
struct OpNode {
    NodeId id = 0;
    std::string name;  // hierarchical, slash-separated, unique within a graph
    std::int64_t compute_time_us = 0;
    std::int64_t output_bytes = 0;
    std::int64_t memory_bytes = 0;

    bool operator==(const OpNode&) const = default;
};

struct Edge {
    NodeId src = 0;
    NodeId dst = 0;

    bool operator==(const Edge&) const = default;
    auto operator<=>(const Edge&) const = default;
};

struct GraphStats {
    std::size_t num_nodes = 0;
    std::size_t num_edges = 0;
    double avg_degree = 0.0;  // edges / nodes
    int diameter = 0;         // longest shortest path, hops, edge direction ignored
    std::size_t num_sources = 0;
    std::size_t num_sinks = 0;
};

class ComputationGraph {
  public:
    ComputationGraph() = default;
    ComputationGraph(std::vector<OpNode> nodes, std::vector<Edge> edges)
        : nodes_(std::move(nodes)), edges_(std::move(edges)) {
        rebuild_adjacency();
    }

    const std::vector<OpNode>& nodes() const { return nodes_; }
    const std::vector<Edge>& edges() const { return edges_; }
    std::size_t num_nodes() const { return nodes_.size(); }
    std::size_t num_edges() const { return edges_.size(); }

    const OpNode& node(NodeId id) const { return nodes_[static_cast<std::size_t>(id)]; }
    const std::vector<NodeId>& predecessors(NodeId id) const { return preds_[static_cast<std::size_t>(id)]; }
    const std::vector<NodeId>& successors(NodeId id) const { return succs_[static_cast<std::size_t>(id)]; }

    // Nodes with no predecessors / no successors, sorted by name.
    std::vector<NodeId> sources() const { return boundary(preds_); }
    std::vector<NodeId> sinks() const { return boundary(succs_); }

    // Structural checks; returns one message per violation (empty == valid).
    // Never throws: meant for reporting on untrusted input.
    std::vector<std::string> validate() const;

    GraphStats stats() const;

  private:
    std::vector<NodeId> boundary(const std::vector<std::vector<NodeId>>& adj) const {
        std::vector<NodeId> out;
        for (NodeId v = 0; v < static_cast<NodeId>(nodes_.size()); ++v)
            if (adj[static_cast<std::size_t>(v)].empty()) out.push_back(v);
        std::sort(out.begin(), out.end(),
                  [&](NodeId a, NodeId b) { return node(a).name < node(b).name; });
        return out;
    }

    void rebuild_adjacency() {
        preds_.assign(nodes_.size(), {});
        succs_.assign(nodes_.size(), {});
        const auto n = static_cast<NodeId>(nodes_.size());
        for (const Edge& e : edges_) {
            if (e.src < 0 || e.src >= n || e.dst < 0 || e.dst >= n) continue;  // reported by validate()
            succs_[static_cast<std::size_t>(e.src)].push_back(e.dst);
            preds_[static_cast<std::size_t>(e.dst)].push_back(e.src);
        }
    }

    std::vector<OpNode> nodes_;
    std::vector<Edge> edges_;
    std::vector<std::vector<NodeId>> preds_;
    std::vector<std::vector<NodeId>> succs_;
};

inline std::vector<std::string> ComputationGraph::validate() const {
    std::vector<std::string> out;
    const auto n = static_cast<NodeId>(nodes_.size());

    if (n == 0) {
        out.push_back("graph has no nodes");
        return out;
    }

    for (NodeId v = 0; v < n; ++v) {
        const OpNode& op = node(v);
        if (op.id != v)
            out.push_back("node at index " + std::to_string(v) + " ('" + op.name +
                          "') has id " + std::to_string(op.id) + "; ids must be contiguous 0..N-1");
        if (op.name.empty()) out.push_back("node " + std::to_string(v) + " has an empty name");
        if (op.compute_time_us <= 0)
            out.push_back("node '" + op.name + "' has non-positive compute_time_us");
        if (op.output_bytes < 0) out.push_back("node '" + op.name + "' has negative output_bytes");
        if (op.memory_bytes < 0) out.push_back("node '" + op.name + "' has negative memory_bytes");
    }

    {
        std::vector<std::string> names;
        names.reserve(nodes_.size());
        for (const OpNode& op : nodes_) names.push_back(op.name);
        std::sort(names.begin(), names.end());
        for (std::size_t i = 1; i < names.size(); ++i)
            if (names[i] == names[i - 1] && (i == 1 || names[i] != names[i - 2]))
                out.push_back("duplicate node name '" + names[i] + "'");
    }

    bool edges_ok = true;
    for (const Edge& e : edges_) {
        if (e.src < 0 || e.src >= n || e.dst < 0 || e.dst >= n) {
            out.push_back("edge (" + std::to_string(e.src) + " -> " + std::to_string(e.dst) +
                          ") references a node id outside 0.." + std::to_string(n - 1));
            edges_ok = false;
        } else if (e.src == e.dst) {
            out.push_back("self-loop on node '" + node(e.src).name + "'");
            edges_ok = false;
        }
    }
    {
        std::vector<Edge> sorted = edges_;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 1; i < sorted.size(); ++i)
            if (sorted[i] == sorted[i - 1] && (i == 1 || !(sorted[i] == sorted[i - 2]))) {
                const Edge& e = sorted[i];
                const bool in_range = e.src >= 0 && e.src < n && e.dst >= 0 && e.dst < n;
                out.push_back("duplicate edge (" +
                              (in_range ? node(e.src).name : std::to_string(e.src)) + " -> " +
                              (in_range ? node(e.dst).name : std::to_string(e.dst)) + ")");
            }
    }

    if (edges_ok) {
        // Kahn's algorithm; anything left with in-degree > 0 sits on a cycle.
        std::vector<int> indeg(nodes_.size(), 0);
        for (const Edge& e : edges_) ++indeg[static_cast<std::size_t>(e.dst)];
        std::deque<NodeId> ready;
        for (NodeId v = 0; v < n; ++v)
            if (indeg[static_cast<std::size_t>(v)] == 0) ready.push_back(v);
        std::size_t seen = 0;
        while (!ready.empty()) {
            NodeId v = ready.front();
            ready.pop_front();
            ++seen;
            for (NodeId w : successors(v))
                if (--indeg[static_cast<std::size_t>(w)] == 0) ready.push_back(w);
        }
        if (seen != nodes_.size()) {
            std::string msg = "cycle detected involving:";
            int listed = 0;
            for (NodeId v = 0; v < n && listed < 8; ++v)
                if (indeg[static_cast<std::size_t>(v)] > 0) {
                    msg += " '" + node(v).name + "'";
                    ++listed;
                }
            out.push_back(msg);
        }

        // Weak connectivity: undirected reachability from node 0.
        std::vector<char> seen_u(nodes_.size(), 0);
        std::deque<NodeId> q{0};
        seen_u[0] = 1;
        while (!q.empty()) {
            NodeId v = q.front();
            q.pop_front();
            for (const auto* adj : {&successors(v), &predecessors(v)})
                for (NodeId w : *adj)
                    if (!seen_u[static_cast<std::size_t>(w)]) {
                        seen_u[static_cast<std::size_t>(w)] = 1;
                        q.push_back(w);
                    }
        }
        for (NodeId v = 0; v < n; ++v)
            if (!seen_u[static_cast<std::size_t>(v)])
                out.push_back("node '" + node(v).name + "' is disconnected from node '" +
                              node(0).name + "' (graph must be weakly connected)");

        if (sources().empty()) out.push_back("graph has no source node");
        if (sinks().empty()) out.push_back("graph has no sink node");
    }

    return out;
}

inline GraphStats ComputationGraph::stats() const {
    GraphStats s;
    s.num_nodes = num_nodes();
    s.num_edges = num_edges();
    s.avg_degree = s.num_nodes == 0 ? 0.0
                                    : static_cast<double>(s.num_edges) / static_cast<double>(s.num_nodes);
    s.num_sources = sources().size();
    s.num_sinks = sinks().size();

    // Diameter over the undirected view: BFS from every node, keep the largest
    // finite distance. Quadratic-ish, fine for the graph sizes handled here.
    const auto n = static_cast<NodeId>(num_nodes());
    std::vector<int> dist(num_nodes());
    int best = 0;
    for (NodeId s0 = 0; s0 < n; ++s0) {
        std::fill(dist.begin(), dist.end(), -1);
        dist[static_cast<std::size_t>(s0)] = 0;
        std::deque<NodeId> q{s0};
        while (!q.empty()) {
            NodeId v = q.front();
            q.pop_front();
            for (const auto* adj : {&successors(v), &predecessors(v)})
                for (NodeId w : *adj)
                    if (dist[static_cast<std::size_t>(w)] < 0) {
                        dist[static_cast<std::size_t>(w)] = dist[static_cast<std::size_t>(v)] + 1;
                        q.push_back(w);
                    }
        }
        for (int d : dist) best = std::max(best, d);
    }
    s.diameter = best;
    return s;
}

// Longest directed path in hops. Companion metric to GraphStats::diameter,
// which ignores edge direction; reports assume an acyclic graph.
inline int longest_directed_path_hops(const ComputationGraph& g) {
    const auto n = static_cast<NodeId>(g.num_nodes());
    std::vector<int> indeg(g.num_nodes(), 0), depth(g.num_nodes(), 0);
    for (const Edge& e : g.edges()) ++indeg[static_cast<std::size_t>(e.dst)];
    std::deque<NodeId> ready;
    for (NodeId v = 0; v < n; ++v)
        if (indeg[static_cast<std::size_t>(v)] == 0) ready.push_back(v);
    int best = 0;
    while (!ready.empty()) {
        NodeId v = ready.front();
        ready.pop_front();
        best = std::max(best, depth[static_cast<std::size_t>(v)]);
        for (NodeId w : g.successors(v)) {
            auto wi = static_cast<std::size_t>(w);
            depth[wi] = std::max(depth[wi], depth[static_cast<std::size_t>(v)] + 1);
            if (--indeg[wi] == 0) ready.push_back(w);
        }
    }
    return best;
}

}  // namespace placelab
