#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "placelab/graph.hpp"
#include "placelab/graph_io.hpp"
#include "test_util.hpp"

using namespace placelab;

namespace {

std::filesystem::path temp_file(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "placelab_test_graph";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("valid graph passes validation") {
    const auto g = testutil::diamond();
    CHECK(g.validate().empty());
    CHECK(g.num_nodes() == 4);
    CHECK(g.num_edges() == 4);
}

TEST_CASE("sources and sinks are sorted by name") {
    // Two sources z/s2, a/s1 and two sinks named to force reordering.
    const auto g = testutil::make_graph({"z_src", "a_src", "mid", "z_sink", "a_sink"},
                                        {{0, 2}, {1, 2}, {2, 3}, {2, 4}});
    const auto sources = g.sources();
    REQUIRE(sources.size() == 2);
    CHECK(g.node(sources[0]).name == "a_src");
    CHECK(g.node(sources[1]).name == "z_src");
    const auto sinks = g.sinks();
    REQUIRE(sinks.size() == 2);
    CHECK(g.node(sinks[0]).name == "a_sink");
    CHECK(g.node(sinks[1]).name == "z_sink");
}

TEST_CASE("validation reports each violation with the node or edge involved") {
    SECTION("cycle") {
        const auto g = testutil::make_graph({"a", "b", "c"}, {{0, 1}, {1, 2}, {2, 1}});
        const auto v = g.validate();
        REQUIRE_FALSE(v.empty());
        bool mentions_cycle = false;
        for (const auto& msg : v) mentions_cycle = mentions_cycle || msg.find("cycle") != std::string::npos;
        CHECK(mentions_cycle);
    }
    SECTION("duplicate names") {
        const auto g = testutil::make_graph({"a", "a", "b"}, {{0, 1}, {1, 2}});
        const auto v = g.validate();
        REQUIRE(v.size() == 1);
        CHECK(v.front().find("duplicate node name 'a'") != std::string::npos);
    }
    SECTION("self loop") {
        const auto g = testutil::make_graph({"a", "b"}, {{0, 1}, {1, 1}});
        const auto v = g.validate();
        REQUIRE_FALSE(v.empty());
        CHECK(v.front().find("self-loop") != std::string::npos);
        CHECK(v.front().find("'b'") != std::string::npos);
    }
    SECTION("duplicate edge") {
        const auto g = testutil::make_graph({"a", "b"}, {{0, 1}, {0, 1}});
        const auto v = g.validate();
        REQUIRE_FALSE(v.empty());
        CHECK(v.front().find("duplicate edge") != std::string::npos);
    }
    SECTION("edge out of range") {
        const auto g = testutil::make_graph({"a", "b"}, {{0, 1}, {0, 7}});
        const auto v = g.validate();
        REQUIRE_FALSE(v.empty());
        CHECK(v.front().find("outside") != std::string::npos);
    }
    SECTION("non-positive compute time") {
        auto g = testutil::make_graph({"a", "b"}, {{0, 1}}, {0, 5});
        const auto v = g.validate();
        REQUIRE(v.size() == 1);
        CHECK(v.front().find("'a'") != std::string::npos);
        CHECK(v.front().find("compute_time_us") != std::string::npos);
    }
    SECTION("negative sizes") {
        auto g = testutil::make_graph({"a", "b"}, {{0, 1}}, {1, 1}, {-1, 0}, {0, -2});
        const auto v = g.validate();
        REQUIRE(v.size() == 2);
    }
    SECTION("disconnected") {
        const auto g = testutil::make_graph({"a", "b", "c", "d"}, {{0, 1}, {2, 3}});
        const auto v = g.validate();
        REQUIRE_FALSE(v.empty());
        bool named = false;
        for (const auto& msg : v) named = named || msg.find("disconnected") != std::string::npos;
        CHECK(named);
    }
    SECTION("id mismatch") {
        std::vector<OpNode> nodes;
        nodes.push_back({0, "a", 1, 0, 0});
        nodes.push_back({5, "b", 1, 0, 0});  // wrong id
        ComputationGraph g(std::move(nodes), {{0, 1}});
        const auto v = g.validate();
        REQUIRE_FALSE(v.empty());
        CHECK(v.front().find("contiguous") != std::string::npos);
    }
    SECTION("empty graph") {
        ComputationGraph g({}, {});
        CHECK_FALSE(g.validate().empty());
    }
}

TEST_CASE("stats on the diamond") {
    const auto g = testutil::diamond();
    const GraphStats s = g.stats();
    CHECK(s.num_nodes == 4);
    CHECK(s.num_edges == 4);
    CHECK(s.avg_degree == 1.0);
    CHECK(s.diameter == 2);  // a..d via either branch, direction ignored
    CHECK(s.num_sources == 1);
    CHECK(s.num_sinks == 1);
    CHECK(longest_directed_path_hops(g) == 2);
}

TEST_CASE("diameter ignores edge direction") {
    // a -> m <- b: directed paths never join the two sources, undirected hops do.
    const auto g = testutil::make_graph({"a", "b", "m"}, {{0, 2}, {1, 2}});
    CHECK(g.stats().diameter == 2);
    CHECK(longest_directed_path_hops(g) == 1);
}

TEST_CASE("chain stats") {
    std::vector<std::string> names;
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < 6; ++i) {
        names.push_back("n" + std::to_string(i));
        if (i > 0) edges.emplace_back(i - 1, i);
    }
    const auto g = testutil::make_graph(names, edges);
    CHECK(g.stats().diameter == 5);
    CHECK(longest_directed_path_hops(g) == 5);
    CHECK(g.stats().avg_degree == Catch::Approx(5.0 / 6.0));
}

TEST_CASE("json round trip preserves every field") {
    auto g = testutil::make_graph({"block_0/in", "block_0/branch_0/op_0", "block_0/concat"},
                                  {{0, 1}, {1, 2}, {0, 2}}, {123, 456, 789}, {10, 20, 30},
                                  {7, 8, 9});
    const auto path = temp_file("roundtrip.json");
    save_graph(g, path.string());
    const auto g2 = load_graph(path.string());
    CHECK(g2.nodes() == g.nodes());
    CHECK(g2.edges() == g.edges());

    // Saving the reloaded graph reproduces the file byte for byte.
    const auto path2 = temp_file("roundtrip2.json");
    save_graph(g2, path2.string());
    std::ifstream f1(path), f2(path2);
    const std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);
}

TEST_CASE("random graphs survive the json round trip") {
    Rng rng(99);
    for (int i = 0; i < 10; ++i) {
        const auto g = testutil::random_dag(rng, 30, 0.1);
        REQUIRE(g.validate().empty());
        const auto path = temp_file("rand.json");
        save_graph(g, path.string());
        const auto g2 = load_graph(path.string());
        CHECK(g2.nodes() == g.nodes());
        CHECK(g2.edges() == g.edges());
    }
}

TEST_CASE("loader reports malformed input precisely") {
    SECTION("missing file") {
        CHECK_THROWS_AS(load_graph("/no/such/file.json"), ParseError);
    }
    SECTION("bad json") {
        const auto path = temp_file("bad.json");
        std::ofstream(path) << "{nodes: [";
        CHECK_THROWS_AS(load_graph(path.string()), ParseError);
    }
    SECTION("missing field names the field") {
        const auto path = temp_file("field.json");
        std::ofstream(path) << R"({"nodes":[{"id":0,"name":"a","output_bytes":1,"memory_bytes":1}],"edges":[]})";
        try {
            load_graph(path.string());
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("compute_time_us") != std::string::npos);
        }
    }
    SECTION("wrong type names the field") {
        const auto path = temp_file("type.json");
        std::ofstream(path)
            << R"({"nodes":[{"id":0,"name":"a","compute_time_us":"fast","output_bytes":1,"memory_bytes":1}],"edges":[]})";
        try {
            load_graph(path.string());
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("compute_time_us") != std::string::npos);
        }
    }
    SECTION("edge referencing unknown node id") {
        const auto path = temp_file("edge.json");
        std::ofstream(path)
            << R"({"nodes":[{"id":0,"name":"a","compute_time_us":1,"output_bytes":1,"memory_bytes":1}],)"
            << R"("edges":[{"src":0,"dst":3}]})";
        try {
            load_graph(path.string());
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("unknown node id") != std::string::npos);
        }
    }
    SECTION("structurally invalid graph raises ValidationError with the full list") {
        const auto path = temp_file("invalid.json");
        std::ofstream(path)
            << R"({"nodes":[{"id":0,"name":"a","compute_time_us":1,"output_bytes":1,"memory_bytes":1},)"
            << R"({"id":1,"name":"a","compute_time_us":0,"output_bytes":1,"memory_bytes":1}],)"
            << R"("edges":[{"src":0,"dst":1}]})";
        try {
            load_graph(path.string());
            FAIL("expected ValidationError");
        } catch (const ValidationError& e) {
            CHECK(e.violations.size() == 2);  // duplicate name + zero compute time
        }
    }
}
