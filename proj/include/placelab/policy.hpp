#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "placelab/cluster.hpp"
#include "placelab/embedding.hpp"
#include "placelab/graph.hpp"
#include "placelab/random.hpp"
#include "placelab/simulator.hpp"
#include "placelab/traversal.hpp"

namespace placelab {

// Two affine layers with a relu between, softmax over devices on top.
struct PolicyParams {
    Eigen::MatrixXd w1;  // hidden x input
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;  // actions x hidden
    Eigen::VectorXd b2;

    static PolicyParams init(int input_dim, int hidden, int actions, Rng& rng) {
        PolicyParams p;
        auto fill = [&rng](Eigen::Ref<Eigen::MatrixXd> m, int fan_in) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
            for (Eigen::Index i = 0; i < m.rows(); ++i)
                for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-bound, bound);
        };
        p.w1.resize(hidden, input_dim);
        p.b1.resize(hidden);
        p.w2.resize(actions, hidden);
        p.b2.resize(actions);
        fill(p.w1, input_dim);
        fill(p.b1, input_dim);
        fill(p.w2, hidden);
        fill(p.b2, hidden);
        return p;
    }

    static PolicyParams zeros_like(const PolicyParams& o) {
        PolicyParams p;
        p.w1 = Eigen::MatrixXd::Zero(o.w1.rows(), o.w1.cols());
        p.b1 = Eigen::VectorXd::Zero(o.b1.size());
        p.w2 = Eigen::MatrixXd::Zero(o.w2.rows(), o.w2.cols());
        p.b2 = Eigen::VectorXd::Zero(o.b2.size());
        return p;
    }

    double squared_norm() const {
        return w1.squaredNorm() + b1.squaredNorm() + w2.squaredNorm() + b2.squaredNorm();
    }

    template <typename Fn>
    void for_each_block(Fn&& fn) {
        fn(w1);
        fn(b1);
        fn(w2);
        fn(b2);
    }

    std::size_t param_count() const {
        return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size());
    }

    std::vector<double> flatten() const {
        std::vector<double> out;
        out.reserve(param_count());
        const_cast<PolicyParams*>(this)->for_each_block(
            [&](const auto& m) { out.insert(out.end(), m.data(), m.data() + m.size()); });
        return out;
    }

    void unflatten(const std::vector<double>& flat) {
        if (flat.size() != param_count()) throw std::invalid_argument("unflatten: size mismatch");
        std::size_t off = 0;
        for_each_block([&](auto& m) {
            std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
                      flat.begin() + static_cast<std::ptrdiff_t>(off + static_cast<std::size_t>(m.size())),
                      m.data());
            off += static_cast<std::size_t>(m.size());
        });
    }
};

struct PolicyForward {
    Eigen::VectorXd input;
    Eigen::VectorXd h_pre;
    Eigen::VectorXd h;
    Eigen::VectorXd logits;
    std::vector<double> probs;
};

// Numerically stable softmax: probabilities are invariant to shifting every
// logit by a constant, and all-zero parameters yield the uniform policy.
inline PolicyForward policy_forward(const PolicyParams& p, const Eigen::VectorXd& input) {
    PolicyForward f;
    f.input = input;
    f.h_pre = p.w1 * input + p.b1;
    f.h = f.h_pre.cwiseMax(0.0);
    f.logits = p.w2 * f.h + p.b2;
    if (!f.logits.allFinite()) throw std::runtime_error("policy produced non-finite logits");
    const double m = f.logits.maxCoeff();
    Eigen::VectorXd e = (f.logits.array() - m).exp();
    const double s = e.sum();
    f.probs.resize(static_cast<std::size_t>(e.size()));
    for (Eigen::Index i = 0; i < e.size(); ++i) f.probs[static_cast<std::size_t>(i)] = e(i) / s;
    return f;
}

// Gradient of coef * log probs[action] w.r.t. policy parameters, accumulated
// into `grads`; returns the gradient w.r.t. the input vector.
inline Eigen::VectorXd policy_gradients_cached(const PolicyParams& p, const PolicyForward& f,
                                               int action, double coef, PolicyParams& grads) {
    Eigen::VectorXd dlogits(f.logits.size());
    for (Eigen::Index i = 0; i < dlogits.size(); ++i)
        dlogits(i) = coef * ((i == action ? 1.0 : 0.0) - f.probs[static_cast<std::size_t>(i)]);
    grads.w2 += dlogits * f.h.transpose();
    grads.b2 += dlogits;
    Eigen::VectorXd dh = p.w2.transpose() * dlogits;
    Eigen::VectorXd dh_pre = (f.h_pre.array() > 0.0).cast<double>().matrix().cwiseProduct(dh);
    grads.w1 += dh_pre * f.input.transpose();
    grads.b1 += dh_pre;
    return p.w1.transpose() * dh_pre;
}

struct AgentParams {
    EmbeddingParams embed;
    PolicyParams policy;

    static AgentParams init(int num_devices, int embed_dim, int embed_rounds, int hidden, Rng& rng) {
        AgentParams a;
        a.embed = EmbeddingParams::init(feature_dim(num_devices), embed_dim, embed_rounds, rng);
        a.policy = PolicyParams::init(2 * embed_dim, hidden, num_devices, rng);
        return a;
    }

    std::vector<double> flatten() const {
        std::vector<double> out = embed.flatten();
        const std::vector<double> p = policy.flatten();
        out.insert(out.end(), p.begin(), p.end());
        return out;
    }

    void unflatten(const std::vector<double>& flat) {
        const std::size_t ne = embed.param_count();
        if (flat.size() != ne + policy.param_count())
            throw std::invalid_argument("unflatten: size mismatch");
        embed.unflatten({flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(ne)});
        policy.unflatten({flat.begin() + static_cast<std::ptrdiff_t>(ne), flat.end()});
    }
};

struct StepRecord {
    NodeId node = 0;
    int action = 0;
    double log_prob = 0.0;        // log probability of the sampled device
    double reward = 0.0;          // scaled makespan improvement net of penalty
    double memory_penalty = 0.0;  // >= 0; reward + memory_penalty telescopes
};

struct EpisodeTrace {
    std::vector<StepRecord> steps;
    Placement initial_placement;
    Placement final_placement;
    double initial_makespan_us = 0.0;
    double final_makespan_us = 0.0;
    double time_scale_us = 0.0;

    struct StepCache {
        EmbeddingForward embed;
        PolicyForward policy;
    };
    std::vector<StepCache> caches;  // filled only when requested; parallel to steps
};

struct RunEpisodeOptions {
    double time_scale_us = 0.0;   // <= 0: use the episode's initial makespan
    double memory_penalty = 1.0;  // per device over capacity, per step
    bool keep_caches = false;     // retain forward passes for reinforce_update
    const SimContext* sim = nullptr;
};

// One placement episode: walk the nodes in `order`, re-placing each on a
// device sampled from the policy, and score each step by the change in
// simulated makespan. Rewards are scaled by time_scale_us, so the sum of
// unpenalized rewards telescopes to (initial - final) / time_scale.
inline EpisodeTrace run_episode(const ComputationGraph& g, const std::vector<NodeId>& order,
                                const AgentParams& agent, const ClusterSpec& cluster,
                                const Placement& initial, Rng& rng, const RunEpisodeOptions& opts = {}) {
    if (order.size() != g.num_nodes())
        throw std::invalid_argument("run_episode: order visits " + std::to_string(order.size()) +
                                    " nodes, graph has " + std::to_string(g.num_nodes()));
    SimContext local_ctx;
    const SimContext* ctx = opts.sim;
    if (ctx == nullptr) {
        local_ctx = make_sim_context(g);
        ctx = &local_ctx;
    }
    const int devices = cluster.num_devices();

    EpisodeTrace trace;
    trace.initial_placement = initial;
    trace.initial_makespan_us = simulate(g, initial, cluster, *ctx).makespan_us;
    trace.time_scale_us = opts.time_scale_us > 0.0 ? opts.time_scale_us : trace.initial_makespan_us;

    Placement placement = initial;
    std::vector<char> placed(g.num_nodes(), 0);
    double prev_us = trace.initial_makespan_us;

    trace.steps.reserve(order.size());
    for (NodeId v : order) {
        const Eigen::MatrixXd x = build_features(g, placement, placed, v, devices);
        EmbeddingForward ef = embed_forward(g, x, agent.embed);
        Eigen::VectorXd input(2 * agent.embed.dim);
        input << ef.out.per_node.row(v).transpose(), ef.out.global_summary;
        PolicyForward pf = policy_forward(agent.policy, input);

        const int a = rng.categorical(pf.probs);
        placement[v] = a;
        placed[static_cast<std::size_t>(v)] = 1;

        const SimulationResult sim = simulate(g, placement, cluster, *ctx);
        const double improvement = (prev_us - sim.makespan_us) / trace.time_scale_us;
        const double penalty =
            opts.memory_penalty * static_cast<double>(sim.memory_violations.size());

        StepRecord step;
        step.node = v;
        step.action = a;
        step.log_prob = std::log(pf.probs[static_cast<std::size_t>(a)]);
        step.reward = improvement - penalty;
        step.memory_penalty = penalty;
        trace.steps.push_back(step);
        if (opts.keep_caches) trace.caches.push_back({std::move(ef), std::move(pf)});

        prev_us = sim.makespan_us;
    }

    trace.final_placement = placement;
    trace.final_makespan_us = prev_us;
    return trace;
}

// Exponential moving average of episode returns.
struct BaselineState {
    double value = 0.0;
    double decay = 0.9;

    void update(double episode_return) { value = decay * value + (1.0 - decay) * episode_return; }
};

struct UpdateConfig {
    double learning_rate = 1e-2;
    double grad_clip = 5.0;  // max global gradient norm; <= 0 disables clipping
};

struct UpdateDiagnostics {
    double grad_norm = 0.0;  // before clipping
    bool clipped = false;
    double mean_return = 0.0;
};

namespace detail {

// Rebuild the forward passes of a cache-free trace by replaying its actions.
inline EpisodeTrace::StepCache replay_step(const ComputationGraph& g, const AgentParams& agent,
                                           int devices, const Placement& placement,
                                           const std::vector<char>& placed, NodeId v) {
    EpisodeTrace::StepCache cache;
    const Eigen::MatrixXd x = build_features(g, placement, placed, v, devices);
    cache.embed = embed_forward(g, x, agent.embed);
    Eigen::VectorXd input(2 * agent.embed.dim);
    input << cache.embed.out.per_node.row(v).transpose(), cache.embed.out.global_summary;
    cache.policy = policy_forward(agent.policy, input);
    return cache;
}

}  // namespace detail

struct ReinforceGradients {
    EmbeddingParams embed;
    PolicyParams policy;
    double mean_return = 0.0;
};

// Gradient of the REINFORCE objective sum_t log pi(a_t | s_t) * (G_t - b),
// averaged over traces, where G_t is the suffix sum of step rewards and b a
// fixed baseline. Gradients flow through the policy head into the embedding.
// Traces without caches are replayed (states depend only on recorded actions,
// not on the parameters, so the objective is differentiable in closed form).
inline ReinforceGradients reinforce_gradients(const AgentParams& agent, const ComputationGraph& g,
                                              const ClusterSpec& cluster,
                                              const std::vector<const EpisodeTrace*>& traces,
                                              double baseline_value) {
    if (traces.empty()) throw std::invalid_argument("reinforce_gradients: no traces");
    const int devices = cluster.num_devices();
    const int dim = agent.embed.dim;

    ReinforceGradients out;
    out.embed = EmbeddingParams::zeros_like(agent.embed);
    out.policy = PolicyParams::zeros_like(agent.policy);

    for (const EpisodeTrace* trace_ptr : traces) {
        const EpisodeTrace& trace = *trace_ptr;
        const bool cached = trace.caches.size() == trace.steps.size();
        // Suffix returns.
        std::vector<double> returns(trace.steps.size());
        double acc = 0.0;
        for (std::size_t t = trace.steps.size(); t-- > 0;) {
            acc += trace.steps[t].reward;
            returns[t] = acc;
        }
        out.mean_return += trace.steps.empty() ? 0.0 : returns.front();

        Placement placement = trace.initial_placement;
        std::vector<char> placed(g.num_nodes(), 0);
        for (std::size_t t = 0; t < trace.steps.size(); ++t) {
            const StepRecord& step = trace.steps[t];
            const EpisodeTrace::StepCache* cache;
            EpisodeTrace::StepCache replayed;
            if (cached) {
                cache = &trace.caches[t];
            } else {
                replayed = detail::replay_step(g, agent, devices, placement, placed, step.node);
                cache = &replayed;
            }

            const double advantage = returns[t] - baseline_value;
            const Eigen::VectorXd dinput = policy_gradients_cached(agent.policy, cache->policy,
                                                                   step.action, advantage, out.policy);

            Eigen::MatrixXd up_nodes =
                Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(g.num_nodes()), dim);
            up_nodes.row(step.node) = dinput.head(dim).transpose();
            embedding_gradients_cached(g, agent.embed, cache->embed, up_nodes, dinput.tail(dim),
                                       out.embed);

            placement[step.node] = step.action;
            placed[static_cast<std::size_t>(step.node)] = 1;
        }
    }

    const double inv = 1.0 / static_cast<double>(traces.size());
    out.embed.for_each_block([&](auto& m) { m *= inv; });
    out.policy.for_each_block([&](auto& m) { m *= inv; });
    out.mean_return *= inv;
    return out;
}

// One ascent step: compute gradients against the pre-update baseline, clip
// the global norm, apply the learning rate, then fold each trace's return
// into the baseline.
inline UpdateDiagnostics reinforce_update(AgentParams& agent, const ComputationGraph& g,
                                          const ClusterSpec& cluster,
                                          const std::vector<const EpisodeTrace*>& traces,
                                          BaselineState& baseline, const UpdateConfig& cfg = {}) {
    ReinforceGradients grads = reinforce_gradients(agent, g, cluster, traces, baseline.value);

    UpdateDiagnostics diag;
    diag.mean_return = grads.mean_return;
    diag.grad_norm = std::sqrt(grads.embed.squared_norm() + grads.policy.squared_norm());
    double scale = cfg.learning_rate;
    if (cfg.grad_clip > 0.0 && diag.grad_norm > cfg.grad_clip) {
        scale *= cfg.grad_clip / diag.grad_norm;
        diag.clipped = true;
    }

    // Gradient ascent.
    agent.embed.w_in += scale * grads.embed.w_in;
    agent.embed.b_in += scale * grads.embed.b_in;
    for (int r = 0; r < agent.embed.rounds; ++r) {
        const auto ri = static_cast<std::size_t>(r);
        agent.embed.w_self[ri] += scale * grads.embed.w_self[ri];
        agent.embed.b_self[ri] += scale * grads.embed.b_self[ri];
        agent.embed.w_pred[ri] += scale * grads.embed.w_pred[ri];
        agent.embed.b_pred[ri] += scale * grads.embed.b_pred[ri];
        agent.embed.w_succ[ri] += scale * grads.embed.w_succ[ri];
        agent.embed.b_succ[ri] += scale * grads.embed.b_succ[ri];
    }
    agent.policy.w1 += scale * grads.policy.w1;
    agent.policy.b1 += scale * grads.policy.b1;
    agent.policy.w2 += scale * grads.policy.w2;
    agent.policy.b2 += scale * grads.policy.b2;

    for (const EpisodeTrace* trace : traces) {
        double total = 0.0;
        for (const StepRecord& s : trace->steps) total += s.reward;
        baseline.update(total);
    }
    return diag;
}

inline UpdateDiagnostics reinforce_update(AgentParams& agent, const ComputationGraph& g,
                                          const ClusterSpec& cluster,
                                          const std::vector<EpisodeTrace>& traces,
                                          BaselineState& baseline, const UpdateConfig& cfg = {}) {
    std::vector<const EpisodeTrace*> ptrs;
    ptrs.reserve(traces.size());
    for (const EpisodeTrace& t : traces) ptrs.push_back(&t);
    return reinforce_update(agent, g, cluster, ptrs, baseline, cfg);
}

inline UpdateDiagnostics reinforce_update(AgentParams& agent, const ComputationGraph& g,
                                          const ClusterSpec& cluster, const EpisodeTrace& trace,
                                          BaselineState& baseline, const UpdateConfig& cfg = {}) {
    return reinforce_update(agent, g, cluster, std::vector<const EpisodeTrace*>{&trace}, baseline, cfg);
}

struct TrainConfig {
    int episodes = 50;
    double learning_rate = 1e-2;
    int hidden = 32;
    int embed_dim = 16;
    int embed_rounds = 2;
    double memory_penalty = 1.0;
    double grad_clip = 5.0;
    double baseline_decay = 0.9;
    std::vector<int> checkpoints = {9, 19, 49};

    std::vector<std::string> validate() const {
        std::vector<std::string> out;
        if (episodes < 1) out.push_back("episodes must be >= 1");
        if (!(learning_rate > 0.0)) out.push_back("learning_rate must be > 0");
        if (hidden < 1) out.push_back("hidden must be >= 1");
        if (embed_dim < 1) out.push_back("embed_dim must be >= 1");
        if (embed_rounds < 0) out.push_back("embed_rounds must be >= 0");
        for (std::size_t i = 0; i < checkpoints.size(); ++i) {
            if (checkpoints[i] < 0 || checkpoints[i] >= episodes)
                out.push_back("checkpoint " + std::to_string(checkpoints[i]) +
                              " is outside 0..episodes-1");
            if (i > 0 && checkpoints[i] <= checkpoints[i - 1])
                out.push_back("checkpoints must be strictly increasing");
        }
        return out;
    }
};

struct EpisodePoint {
    int episode = 0;
    double makespan_us = 0.0;       // final makespan of this episode
    double best_feasible_us = 0.0;  // min over episodes so far; +inf until one is feasible
};

struct TrainingRecord {
    std::vector<EpisodePoint> episodes;
    std::vector<int> checkpoint_episodes;
    std::vector<double> checkpoint_best_us;  // best feasible makespan at each checkpoint
    double initial_makespan_us = 0.0;
    double time_scale_us = 0.0;
    double telescoping_max_abs_err = 0.0;  // max |sum(reward + penalty) - scaled improvement|
};

// Full training run on one graph: fresh agent, one episode per update, all
// episodes restarting from everything-on-device-0. Deterministic per seed.
inline TrainingRecord train(const ComputationGraph& g, TraversalKind order, const ClusterSpec& cluster,
                            const TrainConfig& cfg, std::uint64_t seed) {
    {
        auto bad = cfg.validate();
        if (!bad.empty()) throw std::invalid_argument("train: " + bad.front());
        auto cbad = cluster.validate();
        if (!cbad.empty()) throw std::invalid_argument("train: " + cbad.front());
    }
    Rng rng(seed);
    const std::vector<NodeId> node_order = traverse(g, order);
    const SimContext ctx = make_sim_context(g);
    AgentParams agent =
        AgentParams::init(cluster.num_devices(), cfg.embed_dim, cfg.embed_rounds, cfg.hidden, rng);
    BaselineState baseline{0.0, cfg.baseline_decay};

    const Placement initial = Placement::all_on(g, 0);
    TrainingRecord rec;
    rec.initial_makespan_us = simulate(g, initial, cluster, ctx).makespan_us;
    rec.time_scale_us = rec.initial_makespan_us;
    rec.checkpoint_episodes = cfg.checkpoints;

    RunEpisodeOptions opts;
    opts.time_scale_us = rec.time_scale_us;
    opts.memory_penalty = cfg.memory_penalty;
    opts.keep_caches = true;
    opts.sim = &ctx;

    UpdateConfig ucfg{cfg.learning_rate, cfg.grad_clip};
    double best = std::numeric_limits<double>::infinity();

    for (int ep = 0; ep < cfg.episodes; ++ep) {
        EpisodeTrace trace = run_episode(g, node_order, agent, cluster, initial, rng, opts);

        double unpenalized = 0.0;
        for (const StepRecord& s : trace.steps) unpenalized += s.reward + s.memory_penalty;
        const double telescoped =
            (trace.initial_makespan_us - trace.final_makespan_us) / trace.time_scale_us;
        rec.telescoping_max_abs_err =
            std::max(rec.telescoping_max_abs_err, std::abs(unpenalized - telescoped));

        const bool feasible = check_memory(g, trace.final_placement, cluster).empty();
        if (feasible) best = std::min(best, trace.final_makespan_us);

        reinforce_update(agent, g, cluster, trace, baseline, ucfg);
        rec.episodes.push_back({ep, trace.final_makespan_us, best});
    }

    for (int c : cfg.checkpoints)
        rec.checkpoint_best_us.push_back(rec.episodes[static_cast<std::size_t>(c)].best_feasible_us);
    return rec;
}

}  // namespace placelab
