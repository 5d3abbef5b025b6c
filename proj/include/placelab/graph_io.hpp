#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "placelab/graph.hpp"

namespace placelab {

// Input file is malformed: bad JSON, wrong types, missing fields, ids out of
// range. The message names the offending field or edge.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input parsed fine but the graph breaks a structural invariant; carries the
// full violation list from ComputationGraph::validate().
struct ValidationError : std::runtime_error {
    ValidationError(std::string what, std::vector<std::string> violations_in)
        : std::runtime_error(std::move(what)), violations(std::move(violations_in)) {}
    std::vector<std::string> violations;
};

namespace detail {

inline std::int64_t require_int(const nlohmann::json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key))
        throw ParseError(where + ": missing field '" + key + "'");
    const auto& v = obj.at(key);
    if (!v.is_number_integer())
        throw ParseError(where + ": field '" + key + "' must be an integer");
    return v.get<std::int64_t>();
}

inline std::string require_string(const nlohmann::json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key))
        throw ParseError(where + ": missing field '" + key + "'");
    const auto& v = obj.at(key);
    if (!v.is_string())
        throw ParseError(where + ": field '" + key + "' must be a string");
    return v.get<std::string>();
}

}  // namespace detail

inline ComputationGraph graph_from_json(const nlohmann::json& j, const std::string& where = "graph") {
    if (!j.is_object()) throw ParseError(where + ": top level must be a JSON object");
    if (!j.contains("nodes") || !j.at("nodes").is_array())
        throw ParseError(where + ": missing 'nodes' array");
    if (!j.contains("edges") || !j.at("edges").is_array())
        throw ParseError(where + ": missing 'edges' array");

    std::vector<OpNode> nodes;
    nodes.reserve(j.at("nodes").size());
    std::size_t idx = 0;
    for (const auto& jn : j.at("nodes")) {
        const std::string at = where + ": nodes[" + std::to_string(idx) + "]";
        if (!jn.is_object()) throw ParseError(at + ": must be an object");
        OpNode op;
        op.id = static_cast<NodeId>(detail::require_int(jn, "id", at));
        op.name = detail::require_string(jn, "name", at);
        op.compute_time_us = detail::require_int(jn, "compute_time_us", at);
        op.output_bytes = detail::require_int(jn, "output_bytes", at);
        op.memory_bytes = detail::require_int(jn, "memory_bytes", at);
        nodes.push_back(std::move(op));
        ++idx;
    }

    const auto n = static_cast<std::int64_t>(nodes.size());
    std::vector<Edge> edges;
    edges.reserve(j.at("edges").size());
    idx = 0;
    for (const auto& je : j.at("edges")) {
        const std::string at = where + ": edges[" + std::to_string(idx) + "]";
        if (!je.is_object()) throw ParseError(at + ": must be an object");
        Edge e;
        const std::int64_t src = detail::require_int(je, "src", at);
        const std::int64_t dst = detail::require_int(je, "dst", at);
        if (src < 0 || src >= n || dst < 0 || dst >= n)
            throw ParseError(at + ": (" + std::to_string(src) + " -> " + std::to_string(dst) +
                             ") references an unknown node id");
        e.src = static_cast<NodeId>(src);
        e.dst = static_cast<NodeId>(dst);
        edges.push_back(e);
        ++idx;
    }

    ComputationGraph g(std::move(nodes), std::move(edges));
    auto violations = g.validate();
    if (!violations.empty()) {
        std::string msg = where + ": invalid graph:";
        for (const auto& v : violations) msg += "\n  - " + v;
        throw ValidationError(std::move(msg), std::move(violations));
    }
    return g;
}

inline nlohmann::ordered_json graph_to_json(const ComputationGraph& g) {
    nlohmann::ordered_json j;
    j["nodes"] = nlohmann::ordered_json::array();
    for (const OpNode& op : g.nodes()) {
        j["nodes"].push_back({{"id", op.id},
                              {"name", op.name},
                              {"compute_time_us", op.compute_time_us},
                              {"output_bytes", op.output_bytes},
                              {"memory_bytes", op.memory_bytes}});
    }
    j["edges"] = nlohmann::ordered_json::array();
    for (const Edge& e : g.edges()) j["edges"].push_back({{"src", e.src}, {"dst", e.dst}});
    return j;
}

inline ComputationGraph load_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open graph file '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("'" + path + "': " + e.what());
    }
    return graph_from_json(j, "'" + path + "'");
}

inline void save_graph(const ComputationGraph& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write graph file '" + path + "'");
    out << graph_to_json(g).dump(2) << '\n';
}

}  // namespace placelab
