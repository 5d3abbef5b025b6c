#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "placelab/graph.hpp"
#include "placelab/random.hpp"

namespace placelab {

enum class Family { kCnnLike, kNmtLike, kPtbLike };

inline constexpr Family kAllFamilies[] = {Family::kCnnLike, Family::kNmtLike, Family::kPtbLike};

inline const char* to_string(Family f) {
    switch (f) {
        case Family::kCnnLike: return "cnn-like";
        case Family::kNmtLike: return "nmt-like";
        case Family::kPtbLike: return "ptb-like";
    }
    throw std::invalid_argument("unknown family");
}

inline Family family_from_string(const std::string& s) {
    for (Family f : kAllFamilies)
        if (s == to_string(f)) return f;
    throw std::invalid_argument("unknown graph family '" + s + "'");
}

// Structure is derived from target_nodes unless the family's explicit knobs
// are set (> 0). Node attributes are sampled log-uniformly; memory scales
// with output size.
struct FamilySpec {
    Family family = Family::kCnnLike;
    int target_nodes = 0;
    std::uint64_t seed = 0;

    int blocks = 0, branches = 0, branch_length = 0;    // cnn-like
    int unroll = 0, depth = 0;                          // nmt-like
    int backbone = 0, siblings = 0, cluster_every = 0;  // ptb-like

    std::int64_t compute_time_us_min = 100;        // 100 microseconds
    std::int64_t compute_time_us_max = 10000;      // 10 milliseconds
    std::int64_t output_bytes_min = 1024;          // 1 KiB
    std::int64_t output_bytes_max = 10 * 1000 * 1000;  // 10 MB
    double memory_per_output_byte = 2.0;
};

namespace detail {

struct GraphDraft {
    std::vector<std::string> names;
    std::vector<Edge> edges;

    NodeId add(std::string name) {
        names.push_back(std::move(name));
        return static_cast<NodeId>(names.size() - 1);
    }
    void link(NodeId src, NodeId dst) { edges.push_back({src, dst}); }
};

inline ComputationGraph finish(GraphDraft draft, const FamilySpec& spec) {
    Rng attrs(derive_seed(spec.seed, std::string_view("attributes")));
    std::vector<OpNode> nodes;
    nodes.reserve(draft.names.size());
    for (std::size_t i = 0; i < draft.names.size(); ++i) {
        OpNode op;
        op.id = static_cast<NodeId>(i);
        op.name = std::move(draft.names[i]);
        op.compute_time_us = std::max<std::int64_t>(
            1, std::llround(attrs.log_uniform(static_cast<double>(spec.compute_time_us_min),
                                              static_cast<double>(spec.compute_time_us_max))));
        op.output_bytes = std::max<std::int64_t>(
            0, std::llround(attrs.log_uniform(static_cast<double>(spec.output_bytes_min),
                                              static_cast<double>(spec.output_bytes_max))));
        op.memory_bytes = std::llround(static_cast<double>(op.output_bytes) * spec.memory_per_output_byte);
        nodes.push_back(std::move(op));
    }
    return ComputationGraph(std::move(nodes), std::move(draft.edges));
}

}  // namespace detail

// Chain of convolution-style blocks. Each block fans an input node out into
// parallel branch chains that merge in a concat node; blocks are chained
// concat -> next input. Branch counts default to 3 or 4 per block, so a block
// averages 5.5 nodes and the edge/node ratio sits near 1.45.
inline ComputationGraph gen_cnn_like(const FamilySpec& spec) {
    Rng structure(derive_seed(spec.seed, std::string_view("structure")));
    const int blocks = spec.blocks > 0
                           ? spec.blocks
                           : std::max(1, static_cast<int>(std::lround(spec.target_nodes / 5.5)));
    detail::GraphDraft d;
    NodeId prev_concat = -1;
    for (int k = 0; k < blocks; ++k) {
        const std::string base = "block_" + std::to_string(k);
        const int branches =
            spec.branches > 0 ? spec.branches : static_cast<int>(structure.uniform_int(3, 4));
        const int len = spec.branch_length > 0 ? spec.branch_length : 1;

        const NodeId in = d.add(base + "/in");
        if (prev_concat >= 0) d.link(prev_concat, in);
        std::vector<NodeId> tails;
        tails.reserve(branches);
        for (int j = 0; j < branches; ++j) {
            NodeId prev = in;
            for (int i = 0; i < len; ++i) {
                const NodeId op =
                    d.add(base + "/branch_" + std::to_string(j) + "/op_" + std::to_string(i));
                d.link(prev, op);
                prev = op;
            }
            tails.push_back(prev);
        }
        // The concat comes after the branch ops so that node ids stay in
        // topological order, which keeps raw dumps readable.
        const NodeId concat = d.add(base + "/concat");
        for (NodeId t : tails) d.link(t, concat);
        prev_concat = concat;
    }
    return detail::finish(std::move(d), spec);
}

namespace detail {

// Encoder/decoder shape solver: u unrolled steps of depth-d cell chains on
// each side plus one attention node per decoder step reading every encoder
// step's output. Node count is u*(2d+1); picks (d, u) whose edge/node ratio
// lands nearest 2.65 while staying within ~15% of the target size.
inline void solve_nmt_shape(int target_nodes, int& depth, int& unroll) {
    auto edges = [](long long u, long long dd) {
        return 2 * u * (dd - 1) + 2 * (u - 1) + u * u + u;
    };
    double best_score = std::numeric_limits<double>::infinity();
    int best_d = 1, best_u = std::max(2, target_nodes / 3);
    for (int dd = 1; dd <= 16; ++dd) {
        const int u0 = static_cast<int>(std::lround(static_cast<double>(target_nodes) / (2 * dd + 1)));
        for (int u = std::max(2, u0 - 1); u <= u0 + 1; ++u) {
            const long long nodes = static_cast<long long>(u) * (2 * dd + 1);
            const double size_err =
                std::abs(static_cast<double>(nodes) - target_nodes) / std::max(1, target_nodes);
            if (size_err > 0.15) continue;
            const double deg = static_cast<double>(edges(u, dd)) / static_cast<double>(nodes);
            const double score = std::abs(deg - 2.65) + 0.01 * size_err;
            if (score < best_score) {
                best_score = score;
                best_d = dd;
                best_u = u;
            }
        }
    }
    if (!std::isfinite(best_score)) {
        // Tiny targets: nothing within 15%; fall back to depth 1, nearest size.
        best_d = 1;
        best_u = std::max(2, static_cast<int>(std::lround(target_nodes / 3.0)));
    }
    depth = best_d;
    unroll = best_u;
}

}  // namespace detail

// Sequence-to-sequence shape: an encoder chain and a decoder chain of u
// unrolled steps (each step a chain of `depth` cell ops), with one attention
// node per decoder step that reads the output of every encoder step.
inline ComputationGraph gen_nmt_like(const FamilySpec& spec) {
    int depth = spec.depth, unroll = spec.unroll;
    if (unroll <= 0 && depth <= 0) {
        detail::solve_nmt_shape(spec.target_nodes, depth, unroll);
    } else if (unroll > 0 && depth <= 0) {
        depth = std::max(1, static_cast<int>(std::lround(
                                (static_cast<double>(spec.target_nodes) / unroll - 1.0) / 2.0)));
    } else if (unroll <= 0 && depth > 0) {
        unroll = std::max(2, static_cast<int>(std::lround(
                                 static_cast<double>(spec.target_nodes) / (2 * depth + 1))));
    }

    detail::GraphDraft d;
    std::vector<NodeId> enc_end(static_cast<std::size_t>(unroll));
    NodeId prev_end = -1;
    for (int i = 0; i < unroll; ++i) {
        NodeId prev = -1;
        for (int j = 0; j < depth; ++j) {
            const NodeId op =
                d.add("encoder/step_" + std::to_string(i) + "/op_" + std::to_string(j));
            if (j == 0) {
                if (prev_end >= 0) d.link(prev_end, op);
            } else {
                d.link(prev, op);
            }
            prev = op;
        }
        enc_end[static_cast<std::size_t>(i)] = prev;
        prev_end = prev;
    }

    prev_end = -1;
    for (int i = 0; i < unroll; ++i) {
        const NodeId attn = d.add("decoder/attention/attn_" + std::to_string(i));
        for (int j = 0; j < unroll; ++j) d.link(enc_end[static_cast<std::size_t>(j)], attn);
        NodeId prev = attn;
        for (int j = 0; j < depth; ++j) {
            const NodeId op =
                d.add("decoder/step_" + std::to_string(i) + "/op_" + std::to_string(j));
            d.link(prev, op);
            if (j == 0 && prev_end >= 0) d.link(prev_end, op);
            prev = op;
        }
        prev_end = prev;
    }
    return detail::finish(std::move(d), spec);
}

// Long recurrent backbone with small sibling clusters hanging off it every
// few steps: sibling gates read two consecutive backbone cells, feed the one
// after, and are chained among themselves. Shortcuts never beat the backbone,
// so the hop diameter stays close to the backbone length while the sibling
// edges push the edge/node ratio toward 2.56.
inline ComputationGraph gen_ptb_like(const FamilySpec& spec) {
    const int backbone =
        spec.backbone > 0 ? spec.backbone
                          : std::max(4, static_cast<int>(std::lround(spec.target_nodes / 1.8)));
    const int siblings = spec.siblings > 0 ? spec.siblings : 4;
    const int every = spec.cluster_every > 0 ? spec.cluster_every : 5;

    detail::GraphDraft d;
    std::vector<NodeId> cell(static_cast<std::size_t>(backbone));
    for (int i = 0; i < backbone; ++i) {
        cell[static_cast<std::size_t>(i)] = d.add("step_" + std::to_string(i) + "/cell");
        if (i > 0) d.link(cell[static_cast<std::size_t>(i - 1)], cell[static_cast<std::size_t>(i)]);
    }
    for (int i = 0; i + 2 < backbone; i += every) {
        std::vector<NodeId> gate(static_cast<std::size_t>(siblings));
        for (int j = 0; j < siblings; ++j) {
            gate[static_cast<std::size_t>(j)] =
                d.add("step_" + std::to_string(i) + "/gate_" + std::to_string(j));
            d.link(cell[static_cast<std::size_t>(i)], gate[static_cast<std::size_t>(j)]);
            d.link(cell[static_cast<std::size_t>(i + 1)], gate[static_cast<std::size_t>(j)]);
            d.link(gate[static_cast<std::size_t>(j)], cell[static_cast<std::size_t>(i + 2)]);
            for (int k = 0; k < j; ++k)
                d.link(gate[static_cast<std::size_t>(k)], gate[static_cast<std::size_t>(j)]);
        }
    }
    return detail::finish(std::move(d), spec);
}

inline ComputationGraph gen_graph(const FamilySpec& spec) {
    switch (spec.family) {
        case Family::kCnnLike: return gen_cnn_like(spec);
        case Family::kNmtLike: return gen_nmt_like(spec);
        case Family::kPtbLike: return gen_ptb_like(spec);
    }
    throw std::invalid_argument("unknown family");
}

// A family of related graphs with varied structure knobs and per-item seeds,
// fully determined by the base spec. nmt-like items get pairwise distinct
// unroll counts; the others sweep the target size across +/-15%.
inline std::vector<ComputationGraph> gen_dataset(const FamilySpec& base, int count) {
    if (count < 1) throw std::invalid_argument("gen_dataset: count must be >= 1");
    std::vector<ComputationGraph> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        FamilySpec item = base;
        item.seed = derive_seed(base.seed, std::string_view("item"), static_cast<std::uint64_t>(k));
        if (base.family == Family::kNmtLike && base.unroll <= 0) {
            int depth = 0, unroll = 0;
            detail::solve_nmt_shape(base.target_nodes, depth, unroll);
            item.depth = base.depth > 0 ? base.depth : depth;
            item.unroll = std::max(2 + k, unroll - count / 2 + k);
        } else if (count > 1) {
            const double scale = 0.85 + 0.3 * static_cast<double>(k) / static_cast<double>(count - 1);
            item.target_nodes =
                std::max(1, static_cast<int>(std::lround(base.target_nodes * scale)));
        }
        out.push_back(gen_graph(item));
    }
    return out;
}

}  // namespace placelab
