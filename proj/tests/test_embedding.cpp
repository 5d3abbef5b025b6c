#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "placelab/embedding.hpp"
#include "test_util.hpp"

using namespace placelab;

namespace {

// Naive one-node-at-a-time forward pass, the oracle for the batched version.
Eigen::MatrixXd naive_forward(const ComputationGraph& g, const Eigen::MatrixXd& x,
                              const EmbeddingParams& p) {
    const auto n = static_cast<Eigen::Index>(g.num_nodes());
    std::vector<Eigen::VectorXd> h(static_cast<std::size_t>(n));
    for (Eigen::Index v = 0; v < n; ++v) h[static_cast<std::size_t>(v)] = p.w_in * x.row(v).transpose() + p.b_in;
    for (int r = 0; r < p.rounds; ++r) {
        const auto ri = static_cast<std::size_t>(r);
        std::vector<Eigen::VectorXd> next(static_cast<std::size_t>(n));
        for (NodeId v = 0; v < static_cast<NodeId>(n); ++v) {
            Eigen::VectorXd z = p.w_self[ri] * h[static_cast<std::size_t>(v)] + p.b_self[ri];
            for (NodeId u : g.predecessors(v)) z += p.w_pred[ri] * h[static_cast<std::size_t>(u)] + p.b_pred[ri];
            for (NodeId w : g.successors(v)) z += p.w_succ[ri] * h[static_cast<std::size_t>(w)] + p.b_succ[ri];
            next[static_cast<std::size_t>(v)] = z.cwiseMax(0.0);
        }
        h = std::move(next);
    }
    Eigen::MatrixXd out(n, p.dim);
    for (Eigen::Index v = 0; v < n; ++v) out.row(v) = h[static_cast<std::size_t>(v)].transpose();
    return out;
}

Eigen::MatrixXd random_features(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd x(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) x(i, j) = rng.uniform(-1.0, 1.0);
    return x;
}

}  // namespace

TEST_CASE("feature rows encode normalized sizes, flags and the device one-hot") {
    const auto g = testutil::make_graph({"a", "b", "c"}, {{0, 1}, {1, 2}}, {100, 50, 200},
                                        {10, 40, 20});
    Placement p{{0, 1, 0}};
    const std::vector<char> placed = {1, 0, 0};
    const auto x = build_features(g, p, placed, /*current=*/1, /*num_devices=*/2);
    REQUIRE(x.rows() == 3);
    REQUIRE(x.cols() == feature_dim(2));

    CHECK(x(0, kFeatComputeTime) == 0.5);    // 100 / 200
    CHECK(x(1, kFeatComputeTime) == 0.25);
    CHECK(x(2, kFeatComputeTime) == 1.0);
    CHECK(x(0, kFeatOutputBytes) == 0.25);   // 10 / 40
    CHECK(x(1, kFeatOutputBytes) == 1.0);
    CHECK(x(2, kFeatOutputBytes) == 0.5);
    CHECK(x(0, kFeatIsCurrent) == 0.0);
    CHECK(x(1, kFeatIsCurrent) == 1.0);
    CHECK(x(0, kFeatIsPlaced) == 1.0);
    CHECK(x(1, kFeatIsPlaced) == 0.0);
    CHECK(x(0, kFeatureBase + 0) == 1.0);
    CHECK(x(0, kFeatureBase + 1) == 0.0);
    CHECK(x(1, kFeatureBase + 1) == 1.0);
    CHECK(x(2, kFeatureBase + 0) == 1.0);
}

TEST_CASE("all-zero attributes do not divide by zero") {
    auto g = testutil::make_graph({"a", "b"}, {{0, 1}}, {1, 1}, {0, 0});
    const auto x = build_features(g, Placement::all_on(g, 0), {0, 0}, -1, 2);
    CHECK(x.allFinite());
    CHECK(x(0, kFeatOutputBytes) == 0.0);
}

TEST_CASE("batched forward matches the per-node reference", "[oracle]") {
    Rng rng(2024);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 3 + static_cast<int>(rng.uniform_int(0, 12));
        const auto g = testutil::random_dag(rng, n, rng.uniform(0.1, 0.4));
        EmbeddingParams p = EmbeddingParams::init(6, 5, 2, rng);
        const auto x = random_features(rng, n, 6);
        const auto got = message_pass(g, x, p);
        const auto want = naive_forward(g, x, p);
        CHECK((got.per_node - want).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((got.global_summary.transpose() - want.colwise().mean()).cwiseAbs().maxCoeff() <
              1e-12);
    }
}

TEST_CASE("analytic parameter gradients match central differences", "[gradcheck]") {
    Rng rng(77);
    for (int trial = 0; trial < 5; ++trial) {
        const int n = 4 + static_cast<int>(rng.uniform_int(0, 5));
        const auto g = testutil::random_dag(rng, n, 0.3);
        EmbeddingParams p = EmbeddingParams::init(6, 5, 2, rng);
        const auto x = random_features(rng, n, 6);
        const auto up_node = random_features(rng, n, 5);
        Eigen::VectorXd up_global(5);
        for (Eigen::Index i = 0; i < 5; ++i) up_global(i) = rng.uniform(-1.0, 1.0);

        const auto analytic = embedding_gradients(g, x, p, up_node, up_global).flatten();

        auto loss = [&](const std::vector<double>& theta) {
            EmbeddingParams q = p;
            q.unflatten(theta);
            const auto out = message_pass(g, x, q);
            return (up_node.cwiseProduct(out.per_node)).sum() +
                   up_global.dot(out.global_summary);
        };
        const auto numeric = testutil::finite_diff(loss, p.flatten());
        INFO("trial " << trial << " n=" << n);
        CHECK(testutil::max_rel_err(analytic, numeric) < 1e-5);
    }
}

TEST_CASE("embeddings depend on structure and features, not node numbering") {
    Rng rng(99);
    const auto g = testutil::random_dag(rng, 20, 0.15);
    EmbeddingParams p = EmbeddingParams::init(6, 8, 2, rng);
    const auto x = random_features(rng, 20, 6);
    const auto base = message_pass(g, x, p);

    const auto perm = testutil::random_perm(rng, 20);
    const auto h = testutil::relabel(g, perm);
    Eigen::MatrixXd xp(20, 6);
    for (int i = 0; i < 20; ++i) xp.row(perm[static_cast<std::size_t>(i)]) = x.row(i);
    const auto moved = message_pass(h, xp, p);

    CHECK((base.global_summary - moved.global_summary).cwiseAbs().maxCoeff() < 1e-9);
    for (int i = 0; i < 20; ++i)
        CHECK((base.per_node.row(i) - moved.per_node.row(perm[static_cast<std::size_t>(i)]))
                  .cwiseAbs()
                  .maxCoeff() < 1e-9);
}

TEST_CASE("parameter flattening round trips") {
    Rng rng(3);
    EmbeddingParams p = EmbeddingParams::init(7, 4, 3, rng);
    const auto flat = p.flatten();
    CHECK(flat.size() == p.param_count());
    CHECK(flat.size() == 7u * 4 + 4 + 3u * (3 * 16 + 3 * 4));
    EmbeddingParams q = EmbeddingParams::zeros_like(p);
    q.unflatten(flat);
    CHECK(q.flatten() == flat);
    CHECK(q.squared_norm() == Catch::Approx(p.squared_norm()));
    std::vector<double> wrong(flat.size() + 1, 0.0);
    CHECK_THROWS_AS(q.unflatten(wrong), std::invalid_argument);
}

TEST_CASE("overflowing activations raise an error that names the round") {
    Rng rng(4);
    const auto g = testutil::random_dag(rng, 6, 0.3);
    EmbeddingParams p = EmbeddingParams::init(6, 4, 3, rng);
    p.w_in.setZero();
    p.b_in.setConstant(1e200);        // h0 is uniformly 1e200
    p.w_self[0].setConstant(1e200);   // so round 0 squares it into infinity
    const auto x = random_features(rng, 6, 6);
    CHECK_THROWS_WITH(message_pass(g, x, p), Catch::Matchers::ContainsSubstring("round 0"));
}

TEST_CASE("forward rejects feature matrices of the wrong shape") {
    Rng rng(5);
    const auto g = testutil::random_dag(rng, 5, 0.3);
    EmbeddingParams p = EmbeddingParams::init(6, 4, 1, rng);
    CHECK_THROWS_AS(message_pass(g, random_features(rng, 5, 7), p), std::invalid_argument);
    CHECK_THROWS_AS(message_pass(g, random_features(rng, 4, 6), p), std::invalid_argument);
}
