#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "placelab/policy.hpp"
#include "test_util.hpp"

using namespace placelab;

namespace {

Eigen::VectorXd random_vec(Rng& rng, Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.uniform(-1.0, 1.0);
    return v;
}

// REINFORCE objective for a fixed trace, as a plain function of the flattened
// parameters. States are replayed from the recorded actions, so this is the
// exact function whose gradient reinforce_gradients claims to return.
double replay_objective(const ComputationGraph& g, const ClusterSpec& cluster, AgentParams agent,
                        const std::vector<double>& theta, const EpisodeTrace& trace,
                        double baseline) {
    agent.unflatten(theta);
    std::vector<double> returns(trace.steps.size());
    double acc = 0.0;
    for (std::size_t t = trace.steps.size(); t-- > 0;) {
        acc += trace.steps[t].reward;
        returns[t] = acc;
    }
    Placement placement = trace.initial_placement;
    std::vector<char> placed(g.num_nodes(), 0);
    double objective = 0.0;
    for (std::size_t t = 0; t < trace.steps.size(); ++t) {
        const StepRecord& step = trace.steps[t];
        const auto cache = detail::replay_step(g, agent, cluster.num_devices(), placement, placed,
                                               step.node);
        objective += (returns[t] - baseline) *
                     std::log(cache.policy.probs[static_cast<std::size_t>(step.action)]);
        placement[step.node] = step.action;
        placed[static_cast<std::size_t>(step.node)] = 1;
    }
    return objective;
}

}  // namespace

TEST_CASE("zero parameters give the uniform policy") {
    Rng rng(1);
    PolicyParams p = PolicyParams::zeros_like(PolicyParams::init(6, 8, 4, rng));
    const auto f = policy_forward(p, random_vec(rng, 6));
    for (double prob : f.probs) CHECK(prob == Catch::Approx(0.25).margin(1e-15));
}

TEST_CASE("softmax is shift invariant and survives large logits") {
    Rng rng(2);
    PolicyParams p = PolicyParams::init(6, 8, 3, rng);
    const auto in = random_vec(rng, 6);
    const auto base = policy_forward(p, in);
    PolicyParams shifted = p;
    shifted.b2.array() += 123.5;
    const auto moved = policy_forward(shifted, in);
    for (std::size_t i = 0; i < base.probs.size(); ++i)
        CHECK(moved.probs[i] == Catch::Approx(base.probs[i]).margin(1e-12));

    PolicyParams huge = p;
    huge.b2.array() += 5000.0;  // would overflow a naive exp
    const auto still = policy_forward(huge, in);
    double sum = 0.0;
    for (double prob : still.probs) {
        CHECK(std::isfinite(prob));
        sum += prob;
    }
    CHECK(sum == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("policy gradients match central differences", "[gradcheck]") {
    Rng rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        PolicyParams p = PolicyParams::init(6, 7, 3, rng);
        const auto in = random_vec(rng, 6);
        const int action = static_cast<int>(rng.uniform_int(0, 2));
        const double coef = rng.uniform(-2.0, 2.0);

        PolicyParams grads = PolicyParams::zeros_like(p);
        const auto f = policy_forward(p, in);
        const Eigen::VectorXd dinput = policy_gradients_cached(p, f, action, coef, grads);

        auto param_loss = [&](const std::vector<double>& theta) {
            PolicyParams q = p;
            q.unflatten(theta);
            return coef * std::log(policy_forward(q, in).probs[static_cast<std::size_t>(action)]);
        };
        CHECK(testutil::max_rel_err(grads.flatten(), testutil::finite_diff(param_loss, p.flatten())) <
              1e-5);

        auto input_loss = [&](const std::vector<double>& theta) {
            Eigen::VectorXd v(in.size());
            for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = theta[static_cast<std::size_t>(i)];
            return coef * std::log(policy_forward(p, v).probs[static_cast<std::size_t>(action)]);
        };
        std::vector<double> in_flat(in.data(), in.data() + in.size());
        std::vector<double> din_flat(dinput.data(), dinput.data() + dinput.size());
        CHECK(testutil::max_rel_err(din_flat, testutil::finite_diff(input_loss, in_flat)) < 1e-5);
    }
}

TEST_CASE("an episode visits each node once and its rewards telescope") {
    Rng rng(4);
    const auto g = testutil::random_dag(rng, 12, 0.2);
    const auto order = traverse(g, TraversalKind::kTopo);
    ClusterSpec cluster = make_uniform_cluster(2, 1'000'000'000, 1e6, 0.001);
    AgentParams agent = AgentParams::init(2, 6, 1, 8, rng);

    const auto trace = run_episode(g, order, agent, cluster, Placement::all_on(g, 0), rng);
    REQUIRE(trace.steps.size() == g.num_nodes());
    std::vector<char> seen(g.num_nodes(), 0);
    for (const StepRecord& s : trace.steps) {
        CHECK(!seen[static_cast<std::size_t>(s.node)]);
        seen[static_cast<std::size_t>(s.node)] = 1;
        CHECK(s.action >= 0);
        CHECK(s.action < 2);
        CHECK(s.log_prob <= 0.0);
        CHECK(s.memory_penalty >= 0.0);
    }

    // the placement at the end is the initial one overwritten by the actions
    Placement expected = trace.initial_placement;
    for (const StepRecord& s : trace.steps) expected[s.node] = s.action;
    CHECK(trace.final_placement.device_of == expected.device_of);
    CHECK(simulate(g, trace.final_placement, cluster).makespan_us == trace.final_makespan_us);

    double unpenalized = 0.0;
    for (const StepRecord& s : trace.steps) unpenalized += s.reward + s.memory_penalty;
    const double telescoped =
        (trace.initial_makespan_us - trace.final_makespan_us) / trace.time_scale_us;
    CHECK(unpenalized == Catch::Approx(telescoped).margin(1e-10));
}

TEST_CASE("episodes are reproducible from the generator state") {
    Rng rng(5);
    const auto g = testutil::random_dag(rng, 10, 0.2);
    const auto order = traverse(g, TraversalKind::kLexico);
    ClusterSpec cluster = make_uniform_cluster(2, 1'000'000'000);
    AgentParams agent = AgentParams::init(2, 6, 1, 8, rng);

    Rng a(123), b(123);
    const auto ta = run_episode(g, order, agent, cluster, Placement::all_on(g, 0), a);
    const auto tb = run_episode(g, order, agent, cluster, Placement::all_on(g, 0), b);
    REQUIRE(ta.steps.size() == tb.steps.size());
    for (std::size_t i = 0; i < ta.steps.size(); ++i) {
        CHECK(ta.steps[i].action == tb.steps[i].action);
        CHECK(ta.steps[i].reward == tb.steps[i].reward);
        CHECK(ta.steps[i].log_prob == tb.steps[i].log_prob);
    }
}

TEST_CASE("memory violations subtract from the reward") {
    // two nodes, each filling a whole device: any doubled-up placement violates
    const auto g = testutil::make_graph({"a", "b"}, {{0, 1}}, {100, 100}, {1, 1}, {100, 100});
    ClusterSpec cluster = make_uniform_cluster(2, 100);
    const auto order = traverse(g, TraversalKind::kTopo);
    Rng rng(6);
    AgentParams agent = AgentParams::init(2, 4, 1, 4, rng);
    RunEpisodeOptions opts;
    opts.memory_penalty = 7.25;

    // Both nodes start on device 0 (200 bytes in a 100-byte device), so every
    // step that leaves them together must carry the penalty.
    bool saw_violation = false;
    for (int i = 0; i < 20 && !saw_violation; ++i) {
        const auto trace = run_episode(g, order, agent, cluster, Placement::all_on(g, 0), rng, opts);
        for (const StepRecord& s : trace.steps)
            if (s.memory_penalty > 0.0) {
                saw_violation = true;
                CHECK(s.memory_penalty == Catch::Approx(7.25));  // one violated device
            }
    }
    CHECK(saw_violation);
}

TEST_CASE("baseline is an exponential moving average from zero") {
    BaselineState b;
    CHECK(b.value == 0.0);
    b.update(1.0);
    CHECK(b.value == Catch::Approx(0.1));
    b.update(-0.5);
    CHECK(b.value == Catch::Approx(0.9 * 0.1 + 0.1 * -0.5));
    BaselineState fast{0.0, 0.5};
    fast.update(4.0);
    CHECK(fast.value == Catch::Approx(2.0));
}

TEST_CASE("a rewarded action becomes more likely after one update") {
    const auto g = testutil::make_graph({"a"}, {});
    ClusterSpec cluster = make_uniform_cluster(2, 1'000'000);
    Rng rng(7);
    AgentParams agent = AgentParams::init(2, 4, 0, 6, rng);

    EpisodeTrace trace;
    trace.initial_placement = Placement::all_on(g, 0);
    trace.final_placement = trace.initial_placement;
    trace.final_placement[0] = 1;
    trace.steps.push_back({0, 1, std::log(0.5), 1.0, 0.0});

    auto prob_of_action1 = [&] {
        std::vector<char> placed(1, 0);
        return detail::replay_step(g, agent, 2, trace.initial_placement, placed, 0)
            .policy.probs[1];
    };
    const double before = prob_of_action1();
    BaselineState baseline;
    reinforce_update(agent, g, cluster, trace, baseline, UpdateConfig{0.05, 0.0});
    CHECK(prob_of_action1() > before);
    CHECK(baseline.value == Catch::Approx(0.1));  // 0.9 * 0 + 0.1 * 1.0
}

TEST_CASE("gradient clipping bounds the applied step") {
    Rng rng(8);
    const auto g = testutil::random_dag(rng, 8, 0.25);
    ClusterSpec cluster = make_uniform_cluster(2, 1'000'000'000);
    AgentParams agent = AgentParams::init(2, 6, 1, 8, rng);
    const auto order = traverse(g, TraversalKind::kTopo);
    auto trace = run_episode(g, order, agent, cluster, Placement::all_on(g, 0), rng);
    for (StepRecord& s : trace.steps) s.reward += 1000.0;  // force a huge gradient

    AgentParams clipped_agent = agent;
    BaselineState b1, b2;
    const double lr = 1e-3, clip = 0.5;
    const auto diag = reinforce_update(clipped_agent, g, cluster, trace, b1,
                                       UpdateConfig{lr, clip});
    REQUIRE(diag.clipped);
    CHECK(diag.grad_norm > clip);

    const auto before = agent.flatten();
    const auto after = clipped_agent.flatten();
    double step_norm_sq = 0.0;
    for (std::size_t i = 0; i < before.size(); ++i) {
        const double d = after[i] - before[i];
        step_norm_sq += d * d;
    }
    CHECK(std::sqrt(step_norm_sq) == Catch::Approx(lr * clip).epsilon(1e-9));

    AgentParams unclipped_agent = agent;
    const auto diag2 = reinforce_update(unclipped_agent, g, cluster, trace, b2,
                                        UpdateConfig{lr, 0.0});
    CHECK_FALSE(diag2.clipped);
}

TEST_CASE("reinforce gradients match central differences through the replay",
          "[gradcheck]") {
    Rng rng(9);
    const auto g = testutil::random_dag(rng, 5, 0.3);
    ClusterSpec cluster = make_uniform_cluster(2, 1'000'000'000, 1e6, 0.01);
    AgentParams agent = AgentParams::init(2, 4, 1, 5, rng);
    const auto order = traverse(g, TraversalKind::kTopo);
    const double baseline = 0.37;

    for (int trial = 0; trial < 3; ++trial) {
        const auto trace = run_episode(g, order, agent, cluster, Placement::all_on(g, 0), rng);
        const auto grads = reinforce_gradients(agent, g, cluster, {&trace}, baseline);
        std::vector<double> analytic = grads.embed.flatten();
        const auto pol = grads.policy.flatten();
        analytic.insert(analytic.end(), pol.begin(), pol.end());

        auto objective = [&](const std::vector<double>& theta) {
            return replay_objective(g, cluster, agent, theta, trace, baseline);
        };
        const auto numeric = testutil::finite_diff(objective, agent.flatten());
        INFO("trial " << trial);
        CHECK(testutil::max_rel_err(analytic, numeric) < 1e-4);
    }
}

TEST_CASE("cached and replayed gradients agree") {
    Rng rng(10);
    const auto g = testutil::random_dag(rng, 7, 0.25);
    ClusterSpec cluster = make_uniform_cluster(2, 1'000'000'000);
    AgentParams agent = AgentParams::init(2, 5, 1, 6, rng);
    const auto order = traverse(g, TraversalKind::kBfs);

    RunEpisodeOptions keep;
    keep.keep_caches = true;
    Rng ep_rng(11);
    const auto cached = run_episode(g, order, agent, cluster, Placement::all_on(g, 0), ep_rng, keep);
    EpisodeTrace stripped = cached;
    stripped.caches.clear();

    const auto ga = reinforce_gradients(agent, g, cluster, {&cached}, 0.1);
    const auto gb = reinforce_gradients(agent, g, cluster, {&stripped}, 0.1);
    CHECK(testutil::max_rel_err(ga.embed.flatten(), gb.embed.flatten()) < 1e-12);
    CHECK(testutil::max_rel_err(ga.policy.flatten(), gb.policy.flatten()) < 1e-12);
}

TEST_CASE("training records are deterministic and internally consistent") {
    Rng rng(12);
    const auto g = testutil::random_dag(rng, 10, 0.2);
    ClusterSpec cluster = make_uniform_cluster(2, 1'000'000'000, 1e6, 0.001);
    TrainConfig cfg;
    cfg.episodes = 12;
    cfg.embed_dim = 6;
    cfg.hidden = 8;
    cfg.checkpoints = {3, 7, 11};

    const auto rec = train(g, TraversalKind::kTopo, cluster, cfg, 42);
    REQUIRE(rec.episodes.size() == 12);
    CHECK(rec.initial_makespan_us > 0.0);
    CHECK(rec.time_scale_us == rec.initial_makespan_us);
    CHECK(rec.telescoping_max_abs_err <= 1e-8);

    for (std::size_t i = 0; i < rec.episodes.size(); ++i) {
        CHECK(rec.episodes[i].episode == static_cast<int>(i));
        if (i > 0)  // best-so-far only improves
            CHECK(rec.episodes[i].best_feasible_us <= rec.episodes[i - 1].best_feasible_us);
    }
    REQUIRE(rec.checkpoint_best_us.size() == 3);
    CHECK(rec.checkpoint_best_us[0] == rec.episodes[3].best_feasible_us);
    CHECK(rec.checkpoint_best_us[2] == rec.episodes[11].best_feasible_us);

    const auto again = train(g, TraversalKind::kTopo, cluster, cfg, 42);
    for (std::size_t i = 0; i < rec.episodes.size(); ++i) {
        CHECK(again.episodes[i].makespan_us == rec.episodes[i].makespan_us);
        CHECK(again.episodes[i].best_feasible_us == rec.episodes[i].best_feasible_us);
    }

    const auto other = train(g, TraversalKind::kTopo, cluster, cfg, 43);
    bool any_diff = false;
    for (std::size_t i = 0; i < rec.episodes.size(); ++i)
        any_diff = any_diff || other.episodes[i].makespan_us != rec.episodes[i].makespan_us;
    CHECK(any_diff);
}

TEST_CASE("a single-device cluster cannot beat its starting point") {
    Rng rng(13);
    const auto g = testutil::random_dag(rng, 8, 0.3);
    ClusterSpec cluster = make_uniform_cluster(1, 1'000'000'000);
    TrainConfig cfg;
    cfg.episodes = 3;
    cfg.embed_dim = 4;
    cfg.hidden = 4;
    cfg.checkpoints = {2};
    const auto rec = train(g, TraversalKind::kTopo, cluster, cfg, 1);
    for (const EpisodePoint& p : rec.episodes) {
        CHECK(p.makespan_us == rec.initial_makespan_us);
        CHECK(p.best_feasible_us == rec.initial_makespan_us);
    }
}

TEST_CASE("train rejects malformed configurations") {
    Rng rng(14);
    const auto g = testutil::random_dag(rng, 5, 0.3);
    ClusterSpec cluster = make_uniform_cluster(2, 1'000'000'000);
    TrainConfig cfg;
    cfg.episodes = 5;
    cfg.checkpoints = {3, 9};  // 9 is out of range
    CHECK_THROWS_AS(train(g, TraversalKind::kTopo, cluster, cfg, 1), std::invalid_argument);
    cfg.checkpoints = {3, 3};
    CHECK_THROWS_AS(train(g, TraversalKind::kTopo, cluster, cfg, 1), std::invalid_argument);
    cfg.checkpoints = {4};
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(train(g, TraversalKind::kTopo, cluster, cfg, 1), std::invalid_argument);
}
