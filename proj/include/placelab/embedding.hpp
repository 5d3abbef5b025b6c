#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "placelab/cluster.hpp"
#include "placelab/graph.hpp"
#include "placelab/random.hpp"

namespace placelab {

// Per-node feature row layout; width is kFeatureBase + num_devices.
inline constexpr int kFeatComputeTime = 0;  // compute_time / max compute_time in graph
inline constexpr int kFeatOutputBytes = 1;  // output_bytes / max output_bytes in graph
inline constexpr int kFeatIsCurrent = 2;    // 1 for the node about to be re-placed
inline constexpr int kFeatIsPlaced = 3;     // 1 once the agent has re-placed the node
inline constexpr int kFeatureBase = 4;      // device one-hot starts here

inline int feature_dim(int num_devices) { return kFeatureBase + num_devices; }

// Rows follow NodeId order. `current` may be -1 (no node in flight).
inline Eigen::MatrixXd build_features(const ComputationGraph& g, const Placement& p,
                                      const std::vector<char>& placed, NodeId current,
                                      int num_devices) {
    const auto n = static_cast<Eigen::Index>(g.num_nodes());
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, feature_dim(num_devices));
    std::int64_t max_compute = 1, max_output = 1;
    for (const OpNode& op : g.nodes()) {
        max_compute = std::max(max_compute, op.compute_time_us);
        max_output = std::max(max_output, op.output_bytes);
    }
    for (NodeId v = 0; v < static_cast<NodeId>(g.num_nodes()); ++v) {
        const OpNode& op = g.node(v);
        const auto r = static_cast<Eigen::Index>(v);
        x(r, kFeatComputeTime) = static_cast<double>(op.compute_time_us) / static_cast<double>(max_compute);
        x(r, kFeatOutputBytes) = static_cast<double>(op.output_bytes) / static_cast<double>(max_output);
        x(r, kFeatIsCurrent) = v == current ? 1.0 : 0.0;
        x(r, kFeatIsPlaced) = placed[static_cast<std::size_t>(v)] ? 1.0 : 0.0;
        x(r, kFeatureBase + p[v]) = 1.0;
    }
    return x;
}

// Message-passing network: an input affine layer, then `rounds` iterations of
//   h'(v) = relu( W_self h(v) + b_self
//               + sum over preds u  of W_pred h(u) + b_pred
//               + sum over succs w  of W_succ h(w) + b_succ )
// followed by mean pooling into a graph-level summary vector.
struct EmbeddingParams {
    int feature_dim = 0;
    int dim = 0;
    int rounds = 0;
    Eigen::MatrixXd w_in;  // dim x feature_dim
    Eigen::VectorXd b_in;
    std::vector<Eigen::MatrixXd> w_self, w_pred, w_succ;  // dim x dim each round
    std::vector<Eigen::VectorXd> b_self, b_pred, b_succ;

    // All weights and biases uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
    static EmbeddingParams init(int feature_dim, int dim, int rounds, Rng& rng) {
        EmbeddingParams p;
        p.feature_dim = feature_dim;
        p.dim = dim;
        p.rounds = rounds;
        auto fill = [&rng](Eigen::Ref<Eigen::MatrixXd> m, int fan_in) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
            for (Eigen::Index i = 0; i < m.rows(); ++i)
                for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-bound, bound);
        };
        p.w_in.resize(dim, feature_dim);
        p.b_in.resize(dim);
        fill(p.w_in, feature_dim);
        fill(p.b_in, feature_dim);
        for (int r = 0; r < rounds; ++r) {
            for (auto* w : {&p.w_self, &p.w_pred, &p.w_succ}) {
                w->emplace_back(dim, dim);
                fill(w->back(), dim);
            }
            for (auto* b : {&p.b_self, &p.b_pred, &p.b_succ}) {
                b->emplace_back(dim);
                fill(b->back(), dim);
            }
        }
        return p;
    }

    static EmbeddingParams zeros_like(const EmbeddingParams& o) {
        EmbeddingParams p;
        p.feature_dim = o.feature_dim;
        p.dim = o.dim;
        p.rounds = o.rounds;
        p.w_in = Eigen::MatrixXd::Zero(o.w_in.rows(), o.w_in.cols());
        p.b_in = Eigen::VectorXd::Zero(o.b_in.size());
        for (int r = 0; r < o.rounds; ++r) {
            p.w_self.push_back(Eigen::MatrixXd::Zero(o.dim, o.dim));
            p.w_pred.push_back(Eigen::MatrixXd::Zero(o.dim, o.dim));
            p.w_succ.push_back(Eigen::MatrixXd::Zero(o.dim, o.dim));
            p.b_self.push_back(Eigen::VectorXd::Zero(o.dim));
            p.b_pred.push_back(Eigen::VectorXd::Zero(o.dim));
            p.b_succ.push_back(Eigen::VectorXd::Zero(o.dim));
        }
        return p;
    }

    template <typename Fn>
    void for_each_block(Fn&& fn) {
        fn(w_in);
        fn(b_in);
        for (int r = 0; r < rounds; ++r) {
            fn(w_self[static_cast<std::size_t>(r)]);
            fn(b_self[static_cast<std::size_t>(r)]);
            fn(w_pred[static_cast<std::size_t>(r)]);
            fn(b_pred[static_cast<std::size_t>(r)]);
            fn(w_succ[static_cast<std::size_t>(r)]);
            fn(b_succ[static_cast<std::size_t>(r)]);
        }
    }
    template <typename Fn>
    void for_each_block(Fn&& fn) const {
        const_cast<EmbeddingParams*>(this)->for_each_block([&](auto& m) { fn(std::as_const(m)); });
    }

    std::size_t param_count() const {
        std::size_t n = 0;
        for_each_block([&](const auto& m) { n += static_cast<std::size_t>(m.size()); });
        return n;
    }

    double squared_norm() const {
        double s = 0.0;
        for_each_block([&](const auto& m) { s += m.squaredNorm(); });
        return s;
    }

    std::vector<double> flatten() const {
        std::vector<double> out;
        out.reserve(param_count());
        for_each_block([&](const auto& m) { out.insert(out.end(), m.data(), m.data() + m.size()); });
        return out;
    }

    void unflatten(const std::vector<double>& flat) {
        if (flat.size() != param_count())
            throw std::invalid_argument("unflatten: size mismatch");
        std::size_t off = 0;
        for_each_block([&](auto& m) {
            std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
                      flat.begin() + static_cast<std::ptrdiff_t>(off + static_cast<std::size_t>(m.size())),
                      m.data());
            off += static_cast<std::size_t>(m.size());
        });
    }
};

struct EmbeddingOutput {
    Eigen::MatrixXd per_node;       // num_nodes x dim
    Eigen::VectorXd global_summary;  // dim
};

// Forward pass with everything the backward pass needs.
struct EmbeddingForward {
    Eigen::MatrixXd x;               // features the pass consumed
    std::vector<Eigen::MatrixXd> h;  // h[0..rounds], activations per round
    std::vector<Eigen::MatrixXd> z;  // z[r] = preactivation of h[r+1]
    EmbeddingOutput out;
};

inline EmbeddingForward embed_forward(const ComputationGraph& g, const Eigen::MatrixXd& x,
                                      const EmbeddingParams& p) {
    const auto n = static_cast<Eigen::Index>(g.num_nodes());
    if (x.rows() != n || x.cols() != p.feature_dim)
        throw std::invalid_argument("embed_forward: feature matrix is " + std::to_string(x.rows()) +
                                    "x" + std::to_string(x.cols()) + ", expected " + std::to_string(n) +
                                    "x" + std::to_string(p.feature_dim));

    Eigen::VectorXd indeg = Eigen::VectorXd::Zero(n), outdeg = Eigen::VectorXd::Zero(n);
    for (const Edge& e : g.edges()) {
        indeg(e.dst) += 1.0;
        outdeg(e.src) += 1.0;
    }

    EmbeddingForward f;
    f.x = x;
    f.h.reserve(static_cast<std::size_t>(p.rounds) + 1);
    f.z.reserve(static_cast<std::size_t>(p.rounds));
    f.h.push_back((x * p.w_in.transpose()).rowwise() + p.b_in.transpose());

    for (int r = 0; r < p.rounds; ++r) {
        const auto ri = static_cast<std::size_t>(r);
        const Eigen::MatrixXd& h = f.h.back();
        const Eigen::MatrixXd m_pred = h * p.w_pred[ri].transpose();
        const Eigen::MatrixXd m_succ = h * p.w_succ[ri].transpose();
        Eigen::MatrixXd z = h * p.w_self[ri].transpose();
        // Edge aggregation: each incoming/outgoing message carries its bias.
        for (const Edge& e : g.edges()) {
            z.row(e.dst) += m_pred.row(e.src);
            z.row(e.src) += m_succ.row(e.dst);
        }
        z.rowwise() += p.b_self[ri].transpose();
        z += indeg * p.b_pred[ri].transpose();
        z += outdeg * p.b_succ[ri].transpose();
        if (!z.allFinite())
            throw std::runtime_error("message passing produced non-finite values in round " +
                                     std::to_string(r));
        f.h.push_back(z.cwiseMax(0.0));
        f.z.push_back(std::move(z));
    }

    f.out.per_node = f.h.back();
    f.out.global_summary = f.h.back().colwise().mean();
    return f;
}

inline EmbeddingOutput message_pass(const ComputationGraph& g, const Eigen::MatrixXd& x,
                                    const EmbeddingParams& p) {
    return embed_forward(g, x, p).out;
}

// Reverse-mode gradients of sum(upstream_per_node .* per_node)
//                         + dot(upstream_global, global_summary)
// with respect to every parameter, accumulated into `grads`.
inline void embedding_gradients_cached(const ComputationGraph& g, const EmbeddingParams& p,
                                       const EmbeddingForward& f,
                                       const Eigen::MatrixXd& upstream_per_node,
                                       const Eigen::VectorXd& upstream_global,
                                       EmbeddingParams& grads) {
    const auto n = static_cast<Eigen::Index>(g.num_nodes());
    Eigen::VectorXd indeg = Eigen::VectorXd::Zero(n), outdeg = Eigen::VectorXd::Zero(n);
    for (const Edge& e : g.edges()) {
        indeg(e.dst) += 1.0;
        outdeg(e.src) += 1.0;
    }

    // Mean pooling spreads the global upstream evenly over rows.
    Eigen::MatrixXd dh = upstream_per_node;
    dh.rowwise() += (upstream_global / static_cast<double>(n)).transpose();

    for (int r = p.rounds - 1; r >= 0; --r) {
        const auto ri = static_cast<std::size_t>(r);
        const Eigen::MatrixXd& h_prev = f.h[ri];
        // relu'(z) with the 0-at-0 convention.
        const Eigen::MatrixXd dz =
            (f.z[ri].array() > 0.0).cast<double>().matrix().cwiseProduct(dh);

        Eigen::MatrixXd b_pred_rows = Eigen::MatrixXd::Zero(n, p.dim);  // row u: sum of dz over preds' targets
        Eigen::MatrixXd b_succ_rows = Eigen::MatrixXd::Zero(n, p.dim);
        for (const Edge& e : g.edges()) {
            b_pred_rows.row(e.src) += dz.row(e.dst);
            b_succ_rows.row(e.dst) += dz.row(e.src);
        }

        grads.w_self[ri] += dz.transpose() * h_prev;
        grads.b_self[ri] += dz.colwise().sum().transpose();
        grads.w_pred[ri] += b_pred_rows.transpose() * h_prev;
        grads.b_pred[ri] += dz.transpose() * indeg;
        grads.w_succ[ri] += b_succ_rows.transpose() * h_prev;
        grads.b_succ[ri] += dz.transpose() * outdeg;

        dh = dz * p.w_self[ri] + b_pred_rows * p.w_pred[ri] + b_succ_rows * p.w_succ[ri];
    }

    grads.w_in += dh.transpose() * f.x;
    grads.b_in += dh.colwise().sum().transpose();
}

inline EmbeddingParams embedding_gradients(const ComputationGraph& g, const Eigen::MatrixXd& x,
                                           const EmbeddingParams& p,
                                           const Eigen::MatrixXd& upstream_per_node,
                                           const Eigen::VectorXd& upstream_global) {
    EmbeddingParams grads = EmbeddingParams::zeros_like(p);
    const EmbeddingForward f = embed_forward(g, x, p);
    embedding_gradients_cached(g, p, f, upstream_per_node, upstream_global, grads);
    return grads;
}

}  // namespace placelab
