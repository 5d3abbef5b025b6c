#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "placelab/graph.hpp"
#include "placelab/graph_io.hpp"

namespace placelab {

struct DeviceSpec {
    int id = 0;
    std::int64_t memory_capacity_bytes = 0;

    bool operator==(const DeviceSpec&) const = default;
};

// Homogeneous interconnect: every cross-device transfer pays the same latency
// and moves at the same bandwidth, over a dedicated non-blocking link.
struct ClusterSpec {
    std::vector<DeviceSpec> devices;
    double bandwidth_bytes_per_sec = 1e9;
    double transfer_latency_sec = 0.0;

    int num_devices() const { return static_cast<int>(devices.size()); }

    std::vector<std::string> validate() const {
        std::vector<std::string> out;
        if (devices.empty()) out.push_back("cluster has no devices");
        for (std::size_t i = 0; i < devices.size(); ++i) {
            if (devices[i].id != static_cast<int>(i))
                out.push_back("device at index " + std::to_string(i) + " has id " +
                              std::to_string(devices[i].id) + "; ids must be contiguous 0..D-1");
            if (devices[i].memory_capacity_bytes < 0)
                out.push_back("device " + std::to_string(devices[i].id) +
                              " has negative memory_capacity_bytes");
        }
        if (!(bandwidth_bytes_per_sec > 0.0)) out.push_back("bandwidth_bytes_per_sec must be > 0");
        if (!(transfer_latency_sec >= 0.0)) out.push_back("transfer_latency_sec must be >= 0");
        return out;
    }
};

inline ClusterSpec make_uniform_cluster(int num_devices, std::int64_t memory_capacity_bytes,
                                        double bandwidth_bytes_per_sec = 1e9,
                                        double transfer_latency_sec = 0.0) {
    ClusterSpec c;
    c.devices.resize(static_cast<std::size_t>(num_devices));
    for (int d = 0; d < num_devices; ++d) c.devices[static_cast<std::size_t>(d)] = {d, memory_capacity_bytes};
    c.bandwidth_bytes_per_sec = bandwidth_bytes_per_sec;
    c.transfer_latency_sec = transfer_latency_sec;
    return c;
}

// Total assignment of nodes to devices; indexed by NodeId.
struct Placement {
    std::vector<int> device_of;

    static Placement all_on(const ComputationGraph& g, int device) {
        Placement p;
        p.device_of.assign(g.num_nodes(), device);
        return p;
    }

    int operator[](NodeId v) const { return device_of[static_cast<std::size_t>(v)]; }
    int& operator[](NodeId v) { return device_of[static_cast<std::size_t>(v)]; }

    bool operator==(const Placement&) const = default;
};

inline std::vector<std::string> validate_placement(const Placement& p, const ComputationGraph& g,
                                                   const ClusterSpec& c) {
    std::vector<std::string> out;
    if (p.device_of.size() != g.num_nodes()) {
        out.push_back("placement covers " + std::to_string(p.device_of.size()) + " nodes, graph has " +
                      std::to_string(g.num_nodes()));
        return out;
    }
    for (NodeId v = 0; v < static_cast<NodeId>(g.num_nodes()); ++v) {
        const int d = p[v];
        if (d < 0 || d >= c.num_devices())
            out.push_back("node '" + g.node(v).name + "' is placed on unknown device " + std::to_string(d));
    }
    return out;
}

inline ClusterSpec cluster_from_json(const nlohmann::json& j, const std::string& where = "cluster") {
    if (!j.is_object()) throw ParseError(where + ": top level must be a JSON object");
    if (!j.contains("devices") || !j.at("devices").is_array())
        throw ParseError(where + ": missing 'devices' array");
    ClusterSpec c;
    std::size_t idx = 0;
    for (const auto& jd : j.at("devices")) {
        const std::string at = where + ": devices[" + std::to_string(idx) + "]";
        if (!jd.is_object()) throw ParseError(at + ": must be an object");
        DeviceSpec d;
        d.id = static_cast<int>(detail::require_int(jd, "id", at));
        d.memory_capacity_bytes = detail::require_int(jd, "memory_capacity_bytes", at);
        c.devices.push_back(d);
        ++idx;
    }
    if (!j.contains("bandwidth_bytes_per_sec") || !j.at("bandwidth_bytes_per_sec").is_number())
        throw ParseError(where + ": missing numeric 'bandwidth_bytes_per_sec'");
    if (!j.contains("transfer_latency_sec") || !j.at("transfer_latency_sec").is_number())
        throw ParseError(where + ": missing numeric 'transfer_latency_sec'");
    c.bandwidth_bytes_per_sec = j.at("bandwidth_bytes_per_sec").get<double>();
    c.transfer_latency_sec = j.at("transfer_latency_sec").get<double>();
    auto violations = c.validate();
    if (!violations.empty()) {
        std::string msg = where + ": invalid cluster:";
        for (const auto& v : violations) msg += "\n  - " + v;
        throw ValidationError(std::move(msg), std::move(violations));
    }
    return c;
}

inline nlohmann::ordered_json cluster_to_json(const ClusterSpec& c) {
    nlohmann::ordered_json j;
    j["devices"] = nlohmann::ordered_json::array();
    for (const DeviceSpec& d : c.devices)
        j["devices"].push_back({{"id", d.id}, {"memory_capacity_bytes", d.memory_capacity_bytes}});
    j["bandwidth_bytes_per_sec"] = c.bandwidth_bytes_per_sec;
    j["transfer_latency_sec"] = c.transfer_latency_sec;
    return j;
}

inline ClusterSpec load_cluster(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open cluster file '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("'" + path + "': " + e.what());
    }
    return cluster_from_json(j, "'" + path + "'");
}

inline void save_cluster(const ClusterSpec& c, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write cluster file '" + path + "'");
    out << cluster_to_json(c).dump(2) << '\n';
}

/// Placement files map node name -> device id, e.g. {"block_0/in": 1, ...}.
inline Placement load_placement(const std::string& path, const ComputationGraph& g) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open placement file '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("'" + path + "': " + e.what());
    }
    if (!j.is_object()) throw ParseError("'" + path + "': top level must be a JSON object");

    Placement p;
    p.device_of.assign(g.num_nodes(), -1);
    std::size_t assigned = 0;
    for (NodeId v = 0; v < static_cast<NodeId>(g.num_nodes()); ++v) {
        const std::string& name = g.node(v).name;
        if (!j.contains(name))
            throw ParseError("'" + path + "': no device for node '" + name + "' (placement must be total)");
        const auto& jv = j.at(name);
        if (!jv.is_number_integer())
            throw ParseError("'" + path + "': device for node '" + name + "' must be an integer");
        p[v] = jv.get<int>();
        ++assigned;
    }
    if (j.size() != assigned)
        throw ParseError("'" + path + "': placement names " + std::to_string(j.size()) +
                         " nodes, graph has " + std::to_string(assigned));
    return p;
}

inline void save_placement(const Placement& p, const ComputationGraph& g, const std::string& path) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (NodeId v = 0; v < static_cast<NodeId>(g.num_nodes()); ++v)
        j[g.node(v).name] = p[v];
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write placement file '" + path + "'");
    out << j.dump(2) << '\n';
}

}  // namespace placelab
