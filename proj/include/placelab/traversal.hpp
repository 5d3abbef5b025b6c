#pragma once

#include <algorithm>
#include <deque>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "placelab/graph.hpp"

namespace placelab {

enum class TraversalKind {
    kTopo,
    kReversedTopo,
    kDfsPreorder,
    kDfsPostorder,
    kBfs,
    kLexico,
};

inline constexpr TraversalKind kAllTraversalKinds[] = {
    TraversalKind::kTopo,         TraversalKind::kReversedTopo, TraversalKind::kDfsPreorder,
    TraversalKind::kDfsPostorder, TraversalKind::kBfs,          TraversalKind::kLexico,
};

inline const char* to_string(TraversalKind k) {
    switch (k) {
        case TraversalKind::kTopo: return "topo";
        case TraversalKind::kReversedTopo: return "reversed-topo";
        case TraversalKind::kDfsPreorder: return "dfs-preorder";
        case TraversalKind::kDfsPostorder: return "dfs-postorder";
        case TraversalKind::kBfs: return "bfs";
        case TraversalKind::kLexico: return "lexico";
    }
    throw std::invalid_argument("unknown traversal kind");
}

inline TraversalKind traversal_kind_from_string(const std::string& s) {
    for (TraversalKind k : kAllTraversalKinds)
        if (s == to_string(k)) return k;
    throw std::invalid_argument("unknown traversal order '" + s + "'");
}

namespace detail {

// Successor lists re-sorted by node name; ties cannot occur on valid graphs.
inline std::vector<std::vector<NodeId>> succs_by_name(const ComputationGraph& g) {
    std::vector<std::vector<NodeId>> out(g.num_nodes());
    for (NodeId v = 0; v < static_cast<NodeId>(g.num_nodes()); ++v) {
        out[static_cast<std::size_t>(v)] = g.successors(v);
        std::sort(out[static_cast<std::size_t>(v)].begin(), out[static_cast<std::size_t>(v)].end(),
                  [&](NodeId a, NodeId b) { return g.node(a).name < g.node(b).name; });
    }
    return out;
}

inline std::vector<NodeId> topo_by_name(const ComputationGraph& g) {
    const auto n = static_cast<NodeId>(g.num_nodes());
    std::vector<int> indeg(g.num_nodes(), 0);
    for (const Edge& e : g.edges()) ++indeg[static_cast<std::size_t>(e.dst)];

    auto by_name = [&](NodeId a, NodeId b) { return g.node(a).name > g.node(b).name; };
    std::priority_queue<NodeId, std::vector<NodeId>, decltype(by_name)> ready(by_name);
    for (NodeId v = 0; v < n; ++v)
        if (indeg[static_cast<std::size_t>(v)] == 0) ready.push(v);

    std::vector<NodeId> order;
    order.reserve(g.num_nodes());
    while (!ready.empty()) {
        NodeId v = ready.top();
        ready.pop();
        order.push_back(v);
        for (NodeId w : g.successors(v))
            if (--indeg[static_cast<std::size_t>(w)] == 0) ready.push(w);
    }
    if (order.size() != g.num_nodes())
        throw std::invalid_argument("traversal requires an acyclic graph");
    return order;
}

// Iterative DFS over all sources (name order), children in name order, nodes
// visited once. Emits preorder at first visit, postorder once all children
// have been expanded.
inline void dfs_orders(const ComputationGraph& g, std::vector<NodeId>* pre, std::vector<NodeId>* post) {
    const auto succs = succs_by_name(g);
    std::vector<char> seen(g.num_nodes(), 0);
    struct Frame {
        NodeId v;
        std::size_t next_child = 0;
    };
    for (NodeId s : g.sources()) {
        if (seen[static_cast<std::size_t>(s)]) continue;
        std::vector<Frame> stack{{s}};
        seen[static_cast<std::size_t>(s)] = 1;
        if (pre) pre->push_back(s);
        while (!stack.empty()) {
            Frame& f = stack.back();
            const auto& kids = succs[static_cast<std::size_t>(f.v)];
            bool descended = false;
            while (f.next_child < kids.size()) {
                NodeId c = kids[f.next_child++];
                if (seen[static_cast<std::size_t>(c)]) continue;
                seen[static_cast<std::size_t>(c)] = 1;
                if (pre) pre->push_back(c);
                stack.push_back({c});
                descended = true;
                break;
            }
            if (!descended) {
                if (post) post->push_back(f.v);
                stack.pop_back();
            }
        }
    }
}

}  // namespace detail

// Every order visits each node exactly once and is a pure function of the
// graph: all ties are broken by byte-wise node-name comparison.
inline std::vector<NodeId> traverse(const ComputationGraph& g, TraversalKind kind) {
    switch (kind) {
        case TraversalKind::kTopo:
            return detail::topo_by_name(g);
        case TraversalKind::kReversedTopo: {
            auto order = detail::topo_by_name(g);
            std::reverse(order.begin(), order.end());
            return order;
        }
        case TraversalKind::kDfsPreorder: {
            std::vector<NodeId> pre;
            pre.reserve(g.num_nodes());
            detail::dfs_orders(g, &pre, nullptr);
            if (pre.size() != g.num_nodes())
                throw std::invalid_argument("dfs traversal did not reach every node");
            return pre;
        }
        case TraversalKind::kDfsPostorder: {
            std::vector<NodeId> post;
            post.reserve(g.num_nodes());
            detail::dfs_orders(g, nullptr, &post);
            if (post.size() != g.num_nodes())
                throw std::invalid_argument("dfs traversal did not reach every node");
            return post;
        }
        case TraversalKind::kBfs: {
            std::vector<NodeId> order;
            order.reserve(g.num_nodes());
            const auto succs = detail::succs_by_name(g);
            std::vector<char> seen(g.num_nodes(), 0);
            std::deque<NodeId> q;
            for (NodeId s : g.sources()) {  // sources() is already name-sorted
                q.push_back(s);
                seen[static_cast<std::size_t>(s)] = 1;
            }
            while (!q.empty()) {
                NodeId v = q.front();
                q.pop_front();
                order.push_back(v);
                for (NodeId w : succs[static_cast<std::size_t>(v)])
                    if (!seen[static_cast<std::size_t>(w)]) {
                        seen[static_cast<std::size_t>(w)] = 1;
                        q.push_back(w);
                    }
            }
            if (order.size() != g.num_nodes())
                throw std::invalid_argument("bfs traversal did not reach every node");
            return order;
        }
        case TraversalKind::kLexico: {
            std::vector<NodeId> order(g.num_nodes());
            for (NodeId v = 0; v < static_cast<NodeId>(g.num_nodes()); ++v)
                order[static_cast<std::size_t>(v)] = v;
            std::sort(order.begin(), order.end(),
                      [&](NodeId a, NodeId b) { return g.node(a).name < g.node(b).name; });
            for (std::size_t i = 1; i < order.size(); ++i)
                if (g.node(order[i]).name == g.node(order[i - 1]).name)
                    throw std::invalid_argument("lexico traversal requires unique node names; '" +
                                                g.node(order[i]).name + "' repeats");
            return order;
        }
    }
    throw std::invalid_argument("unknown traversal kind");
}

}  // namespace placelab
