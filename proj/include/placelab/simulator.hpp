#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "placelab/cluster.hpp"
#include "placelab/graph.hpp"
#include "placelab/traversal.hpp"

namespace placelab {

struct MemoryViolation {
    int device = 0;
    std::int64_t used_bytes = 0;
    std::int64_t capacity_bytes = 0;

    bool operator==(const MemoryViolation&) const = default;
};

// All times are microseconds internally; compute times are integers, so sums
// of them are exact in double. Seconds views divide by 1e6 at the boundary.
struct SimulationResult {
    double makespan_us = 0.0;
    std::vector<double> device_busy_us;
    std::int64_t cross_device_bytes = 0;
    std::vector<MemoryViolation> memory_violations;

    double makespan_sec() const { return makespan_us / 1e6; }
    std::vector<double> device_busy_sec() const {
        std::vector<double> out(device_busy_us.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = device_busy_us[i] / 1e6;
        return out;
    }
};

// Static memory model: a device holds the working set of every node placed on
// it; violations are reported but do not change timing.
inline std::vector<MemoryViolation> check_memory(const ComputationGraph& g, const Placement& p,
                                                 const ClusterSpec& c) {
    std::vector<std::int64_t> used(static_cast<std::size_t>(c.num_devices()), 0);
    for (NodeId v = 0; v < static_cast<NodeId>(g.num_nodes()); ++v)
        used[static_cast<std::size_t>(p[v])] += g.node(v).memory_bytes;
    std::vector<MemoryViolation> out;
    for (int d = 0; d < c.num_devices(); ++d)
        if (used[static_cast<std::size_t>(d)] > c.devices[static_cast<std::size_t>(d)].memory_capacity_bytes)
            out.push_back({d, used[static_cast<std::size_t>(d)],
                           c.devices[static_cast<std::size_t>(d)].memory_capacity_bytes});
    return out;
}

// Reusable per-graph scheduling context: the deterministic topological order
// used for tie-breaking. Callers running many simulations on one graph should
// build this once.
struct SimContext {
    std::vector<NodeId> topo_order;
    std::vector<int> topo_index;
};

inline SimContext make_sim_context(const ComputationGraph& g) {
    SimContext ctx;
    ctx.topo_order = traverse(g, TraversalKind::kTopo);
    ctx.topo_index.resize(g.num_nodes());
    for (std::size_t i = 0; i < ctx.topo_order.size(); ++i)
        ctx.topo_index[static_cast<std::size_t>(ctx.topo_order[i])] = static_cast<int>(i);
    return ctx;
}

// Event-driven list scheduling. Each device executes one node at a time; a
// node may start once every predecessor has finished and its output has
// arrived (cross-device edges pay latency + bytes/bandwidth on a dedicated
// link; transfers do not occupy devices). Whenever a device is free it starts
// the waiting node with the smallest topological index, so the schedule is a
// deterministic function of (graph, placement, cluster).
inline SimulationResult simulate(const ComputationGraph& g, const Placement& p, const ClusterSpec& c,
                                 const SimContext& ctx) {
    {
        auto bad = validate_placement(p, g, c);
        if (!bad.empty()) throw std::invalid_argument("simulate: " + bad.front());
    }
    const auto n = static_cast<NodeId>(g.num_nodes());
    const double bandwidth_us = c.bandwidth_bytes_per_sec / 1e6;  // bytes per microsecond
    const double latency_us = c.transfer_latency_sec * 1e6;

    SimulationResult res;
    res.device_busy_us.assign(static_cast<std::size_t>(c.num_devices()), 0.0);
    res.memory_violations = check_memory(g, p, c);
    for (const Edge& e : g.edges())
        if (p[e.src] != p[e.dst]) res.cross_device_bytes += g.node(e.src).output_bytes;

    std::vector<int> indeg(g.num_nodes(), 0);
    for (const Edge& e : g.edges()) ++indeg[static_cast<std::size_t>(e.dst)];

    std::vector<double> finish_us(g.num_nodes(), 0.0);
    std::vector<double> arrival_us(g.num_nodes(), 0.0);  // valid once indeg hits 0

    // Nodes whose inputs have arrived, keyed by topological index per device.
    std::vector<std::set<int>> available(static_cast<std::size_t>(c.num_devices()));
    // Device a node finishes on, keyed by event; -1 marks an arrival event.
    using Event = std::pair<double, int>;  // (time, topo index); kind derived from node state
    std::priority_queue<Event, std::vector<Event>, std::greater<>> events;

    std::vector<char> arrived(g.num_nodes(), 0);
    std::vector<char> started(g.num_nodes(), 0);

    auto on_ready = [&](NodeId v, double now) {
        // All predecessors finished; arrival_us[v] is final.
        if (arrival_us[static_cast<std::size_t>(v)] <= now) {
            arrived[static_cast<std::size_t>(v)] = 1;
            available[static_cast<std::size_t>(p[v])].insert(ctx.topo_index[static_cast<std::size_t>(v)]);
        } else {
            events.emplace(arrival_us[static_cast<std::size_t>(v)], ctx.topo_index[static_cast<std::size_t>(v)]);
        }
    };

    for (NodeId v = 0; v < n; ++v)
        if (indeg[static_cast<std::size_t>(v)] == 0) on_ready(v, 0.0);

    std::vector<double> device_free_us(static_cast<std::size_t>(c.num_devices()), 0.0);
    std::size_t completed = 0;
    double now = 0.0;

    auto dispatch = [&](double t) {
        for (int d = 0; d < c.num_devices(); ++d) {
            auto& avail = available[static_cast<std::size_t>(d)];
            while (device_free_us[static_cast<std::size_t>(d)] <= t && !avail.empty()) {
                const NodeId v = ctx.topo_order[static_cast<std::size_t>(*avail.begin())];
                avail.erase(avail.begin());
                started[static_cast<std::size_t>(v)] = 1;
                const double f = t + static_cast<double>(g.node(v).compute_time_us);
                finish_us[static_cast<std::size_t>(v)] = f;
                device_free_us[static_cast<std::size_t>(d)] = f;
                res.device_busy_us[static_cast<std::size_t>(d)] +=
                    static_cast<double>(g.node(v).compute_time_us);
                events.emplace(f, ctx.topo_index[static_cast<std::size_t>(v)]);
            }
        }
    };

    dispatch(0.0);
    while (!events.empty()) {
        now = events.top().first;
        // Drain every event at this timestamp before dispatching, so the
        // choice among simultaneously available nodes is order-independent.
        while (!events.empty() && events.top().first == now) {
            const NodeId v = ctx.topo_order[static_cast<std::size_t>(events.top().second)];
            events.pop();
            if (started[static_cast<std::size_t>(v)]) {
                // Finish event: release successors.
                ++completed;
                for (NodeId w : g.successors(v)) {
                    const auto wi = static_cast<std::size_t>(w);
                    double t_arr = finish_us[static_cast<std::size_t>(v)];
                    if (p[v] != p[w])
                        t_arr += latency_us + static_cast<double>(g.node(v).output_bytes) / bandwidth_us;
                    arrival_us[wi] = std::max(arrival_us[wi], t_arr);
                    if (--indeg[wi] == 0) on_ready(w, now);
                }
            } else if (!arrived[static_cast<std::size_t>(v)]) {
                // Arrival event.
                arrived[static_cast<std::size_t>(v)] = 1;
                available[static_cast<std::size_t>(p[v])].insert(
                    ctx.topo_index[static_cast<std::size_t>(v)]);
            }
        }
        dispatch(now);
    }

    if (completed != g.num_nodes())
        throw std::logic_error("simulate: schedule stalled (is the graph acyclic?)");
    res.makespan_us = *std::max_element(finish_us.begin(), finish_us.end());
    return res;
}

inline SimulationResult simulate(const ComputationGraph& g, const Placement& p, const ClusterSpec& c) {
    return simulate(g, p, c, make_sim_context(g));
}

// Longest chain of compute times (microseconds), transfers ignored. A lower
// bound on the makespan of every placement.
inline double critical_path_us(const ComputationGraph& g) {
    const auto order = traverse(g, TraversalKind::kTopo);
    std::vector<double> dp(g.num_nodes(), 0.0);
    double best = 0.0;
    for (NodeId v : order) {
        const auto vi = static_cast<std::size_t>(v);
        double in = 0.0;
        for (NodeId u : g.predecessors(v)) in = std::max(in, dp[static_cast<std::size_t>(u)]);
        dp[vi] = in + static_cast<double>(g.node(v).compute_time_us);
        best = std::max(best, dp[vi]);
    }
    return best;
}

struct BruteForceResult {
    Placement placement;
    SimulationResult result;
    std::uint64_t evaluated = 0;  // memory-feasible placements simulated
};

// Exhaustive baseline for tiny instances: tries every memory-feasible
// placement and returns the earliest-enumerated one with minimum makespan.
// When device memory capacities are all equal, devices are interchangeable,
// so enumeration is restricted to canonical labelings (device k may appear
// only after devices 0..k-1), cutting the space by up to |D|! without losing
// any distinct schedule.
inline BruteForceResult brute_force_optimal(const ComputationGraph& g, const ClusterSpec& c,
                                            std::size_t node_limit = 10) {
    if (g.num_nodes() > node_limit)
        throw std::invalid_argument("brute_force_optimal: graph has " + std::to_string(g.num_nodes()) +
                                    " nodes, limit is " + std::to_string(node_limit));
    if (c.num_devices() > 3)
        throw std::invalid_argument("brute_force_optimal: at most 3 devices supported, got " +
                                    std::to_string(c.num_devices()));
    if (c.num_devices() < 1) throw std::invalid_argument("brute_force_optimal: cluster has no devices");

    const auto n = g.num_nodes();
    const int d = c.num_devices();
    bool uniform_memory = true;
    for (const DeviceSpec& dev : c.devices)
        uniform_memory = uniform_memory &&
                         dev.memory_capacity_bytes == c.devices.front().memory_capacity_bytes;

    const SimContext ctx = make_sim_context(g);
    BruteForceResult best;
    best.result.makespan_us = std::numeric_limits<double>::infinity();

    Placement p;
    p.device_of.assign(n, 0);
    while (true) {
        bool canonical = true;
        if (uniform_memory) {
            int max_seen = -1;
            for (std::size_t i = 0; i < n && canonical; ++i) {
                if (p.device_of[i] > max_seen + 1) canonical = false;
                max_seen = std::max(max_seen, p.device_of[i]);
            }
        }
        if (canonical && check_memory(g, p, c).empty()) {
            SimulationResult r = simulate(g, p, c, ctx);
            ++best.evaluated;
            if (r.makespan_us < best.result.makespan_us) {
                best.result = std::move(r);
                best.placement = p;
            }
        }
        // Odometer increment, last node fastest.
        std::size_t i = n;
        while (i > 0) {
            --i;
            if (++p.device_of[i] < d) break;
            p.device_of[i] = 0;
            if (i == 0) return best;
        }
        if (n == 0) return best;
    }
}

}  // namespace placelab
