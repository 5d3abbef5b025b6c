// Command line front end: graph generation, traversal inspection, schedule
// simulation, policy training, and the experiment grid with its reports.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "placelab/cluster.hpp"
#include "placelab/generators.hpp"
#include "placelab/graph.hpp"
#include "placelab/graph_io.hpp"
#include "placelab/harness.hpp"
#include "placelab/policy.hpp"
#include "placelab/report.hpp"
#include "placelab/simulator.hpp"
#include "placelab/traversal.hpp"

namespace {

void print_graph_stats(const std::string& id, const placelab::ComputationGraph& g) {
    const placelab::GraphStats s = g.stats();
    std::cout << id << ": nodes=" << s.num_nodes << " edges=" << s.num_edges
              << " avg_degree=" << s.avg_degree << " diameter=" << s.diameter
              << " longest_directed_path=" << placelab::longest_directed_path_hops(g)
              << " sources=" << s.num_sources << " sinks=" << s.num_sinks << '\n';
}

placelab::ClusterSpec cluster_for(const std::string& cluster_file, int devices,
                                  std::int64_t memory_capacity, double bandwidth, double latency,
                                  const placelab::ComputationGraph& g) {
    if (!cluster_file.empty()) return placelab::load_cluster(cluster_file);
    std::int64_t capacity = memory_capacity;
    if (capacity <= 0)
        for (const placelab::OpNode& op : g.nodes()) capacity += op.memory_bytes;
    return placelab::make_uniform_cluster(devices, capacity, bandwidth, latency);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"computation graph placement toolkit"};
    app.require_subcommand(1);

    // ---- gen ----
    auto* gen = app.add_subcommand("gen", "generate a synthetic graph dataset");
    std::string gen_family = "cnn-like";
    int gen_nodes = 300, gen_count = 1;
    std::uint64_t gen_seed = 1;
    std::string gen_out_dir = ".";
    gen->add_option("--family", gen_family, "cnn-like, nmt-like or ptb-like")->required();
    gen->add_option("--nodes", gen_nodes, "approximate node count per graph");
    gen->add_option("--count", gen_count, "number of graphs");
    gen->add_option("--seed", gen_seed, "dataset seed");
    gen->add_option("--out-dir", gen_out_dir, "output directory");

    // ---- stats ----
    auto* stats = app.add_subcommand("stats", "print structural statistics of a graph file");
    std::string stats_graph;
    stats->add_option("--graph", stats_graph)->required();

    // ---- traverse ----
    auto* traverse_cmd = app.add_subcommand("traverse", "print a node traversal, one name per line");
    std::string tr_graph, tr_order = "topo";
    traverse_cmd->add_option("--graph", tr_graph)->required();
    traverse_cmd->add_option("--order", tr_order,
                             "topo, reversed-topo, dfs-preorder, dfs-postorder, bfs or lexico")
        ->required();

    // ---- simulate ----
    auto* sim = app.add_subcommand("simulate", "simulate one placement and print its schedule cost");
    std::string sim_graph, sim_placement, sim_cluster;
    sim->add_option("--graph", sim_graph)->required();
    sim->add_option("--placement", sim_placement, "JSON file mapping node name -> device id")->required();
    sim->add_option("--cluster", sim_cluster)->required();

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "train a placement policy on one graph");
    std::string train_graph, train_order = "topo", train_cluster_file, train_out;
    int train_devices = 2, train_episodes = 50;
    std::uint64_t train_seed = 1;
    double train_bandwidth = 1e9, train_latency = 5e-5;
    std::int64_t train_capacity = 0;
    std::vector<int> train_checkpoints;
    placelab::TrainConfig tc;
    train_cmd->add_option("--graph", train_graph)->required();
    train_cmd->add_option("--order", train_order, "traversal order for placement steps");
    train_cmd->add_option("--devices", train_devices, "device count (uniform cluster)");
    train_cmd->add_option("--cluster", train_cluster_file, "cluster file; overrides --devices");
    train_cmd->add_option("--episodes", train_episodes);
    train_cmd->add_option("--seed", train_seed);
    train_cmd->add_option("--out", train_out, "write per-episode record CSV here")->required();
    train_cmd->add_option("--learning-rate", tc.learning_rate);
    train_cmd->add_option("--hidden", tc.hidden);
    train_cmd->add_option("--embed-dim", tc.embed_dim);
    train_cmd->add_option("--embed-rounds", tc.embed_rounds);
    train_cmd->add_option("--memory-penalty", tc.memory_penalty);
    train_cmd->add_option("--grad-clip", tc.grad_clip);
    train_cmd->add_option("--baseline-decay", tc.baseline_decay);
    train_cmd->add_option("--checkpoints", train_checkpoints, "episode indices to report");
    train_cmd->add_option("--bandwidth", train_bandwidth, "bytes per second");
    train_cmd->add_option("--latency", train_latency, "transfer latency, seconds");
    train_cmd->add_option("--memory-capacity", train_capacity,
                          "per-device bytes; 0 = total graph memory");

    // ---- experiment ----
    auto* exp = app.add_subcommand("experiment", "run the full training grid from a config file");
    std::string exp_config;
    int exp_workers = -1;
    std::string exp_out;
    exp->add_option("--config", exp_config)->required();
    exp->add_option("--workers", exp_workers, "override config worker count");
    exp->add_option("--out", exp_out, "override config output directory");

    // ---- report ----
    auto* rep = app.add_subcommand("report", "build tables, phase summaries and plots from records");
    std::string rep_records, rep_curves, rep_out;
    bool rep_median = false;
    rep->add_option("--records", rep_records, "records.csv from an experiment run")->required();
    rep->add_option("--curves", rep_curves, "curves.csv (default: next to records)");
    rep->add_option("--out", rep_out, "output directory (default: directory of records)");
    rep->add_flag("--median", rep_median, "aggregate repeats by median instead of mean");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            placelab::FamilySpec base;
            base.family = placelab::family_from_string(gen_family);
            base.target_nodes = gen_nodes;
            base.seed = gen_seed;
            const auto graphs = placelab::gen_dataset(base, gen_count);
            std::filesystem::create_directories(gen_out_dir);
            for (int k = 0; k < gen_count; ++k) {
                char idx[16];
                std::snprintf(idx, sizeof idx, "%03d", k);
                const std::string id = gen_family + "_" + idx;
                const std::string path =
                    (std::filesystem::path(gen_out_dir) / (id + ".json")).string();
                placelab::save_graph(graphs[static_cast<std::size_t>(k)], path);
                print_graph_stats(id, graphs[static_cast<std::size_t>(k)]);
            }
        } else if (*stats) {
            const auto g = placelab::load_graph(stats_graph);
            print_graph_stats(stats_graph, g);
        } else if (*traverse_cmd) {
            const auto g = placelab::load_graph(tr_graph);
            const auto order = placelab::traverse(g, placelab::traversal_kind_from_string(tr_order));
            for (placelab::NodeId v : order) std::cout << g.node(v).name << '\n';
        } else if (*sim) {
            const auto g = placelab::load_graph(sim_graph);
            const auto cluster = placelab::load_cluster(sim_cluster);
            const auto placement = placelab::load_placement(sim_placement, g);
            {
                auto bad = placelab::validate_placement(placement, g, cluster);
                if (!bad.empty()) throw std::invalid_argument(bad.front());
            }
            const auto r = placelab::simulate(g, placement, cluster);
            std::cout << "makespan_sec=" << placelab::fmt_double(r.makespan_sec()) << '\n';
            const auto busy = r.device_busy_sec();
            for (std::size_t d = 0; d < busy.size(); ++d)
                std::cout << "device_" << d << "_busy_sec=" << placelab::fmt_double(busy[d])
                          << " utilization="
                          << placelab::fmt_double(r.makespan_us > 0 ? busy[d] / r.makespan_sec() : 0.0)
                          << '\n';
            std::cout << "cross_device_bytes=" << r.cross_device_bytes << '\n';
            for (const auto& v : r.memory_violations)
                std::cout << "memory_violation device=" << v.device << " used_bytes=" << v.used_bytes
                          << " capacity_bytes=" << v.capacity_bytes << '\n';
        } else if (*train_cmd) {
            const auto g = placelab::load_graph(train_graph);
            const auto cluster = cluster_for(train_cluster_file, train_devices, train_capacity,
                                             train_bandwidth, train_latency, g);
            tc.episodes = train_episodes;
            if (!train_checkpoints.empty()) {
                tc.checkpoints = train_checkpoints;
            } else {
                tc.checkpoints.clear();
                for (int c : {9, 19, 49})
                    if (c < tc.episodes) tc.checkpoints.push_back(c);
                if (tc.checkpoints.empty()) tc.checkpoints.push_back(tc.episodes - 1);
            }
            const auto kind = placelab::traversal_kind_from_string(train_order);
            const auto rec = placelab::train(g, kind, cluster, tc, train_seed);

            std::ofstream out(train_out);
            if (!out) throw std::runtime_error("cannot write '" + train_out + "'");
            out << "episode,makespan_us,best_feasible_us\n";
            for (const auto& p : rec.episodes)
                out << p.episode << ',' << placelab::fmt_double(p.makespan_us) << ','
                    << placelab::fmt_double(p.best_feasible_us) << '\n';

            std::cout << "initial_makespan_us=" << placelab::fmt_double(rec.initial_makespan_us)
                      << '\n';
            for (std::size_t i = 0; i < rec.checkpoint_episodes.size(); ++i)
                std::cout << "best_ep_" << rec.checkpoint_episodes[i] << "="
                          << placelab::fmt_double(rec.checkpoint_best_us[i]) << '\n';
            std::cout << "telescoping_max_abs_err="
                      << placelab::fmt_double(rec.telescoping_max_abs_err) << '\n';
        } else if (*exp) {
            auto config = placelab::load_experiment_config(exp_config);
            if (exp_workers >= 0) config.workers = exp_workers;
            if (!exp_out.empty()) config.out_dir = exp_out;
            const auto graphs = placelab::collect_graphs(config);
            std::cerr << "grid: " << graphs.size() << " graphs x " << config.device_counts.size()
                      << " device counts x " << config.orders.size() << " orders x "
                      << config.repeats << " repeats\n";
            const auto cells = placelab::run_grid(config, graphs);
            placelab::write_experiment_outputs(config, graphs, cells, config.out_dir);
            int failed = 0;
            for (const auto& c : cells)
                if (!c.error.empty()) {
                    ++failed;
                    std::cerr << "cell failed: " << c.graph_id << " devices=" << c.device_count
                              << " order=" << to_string(c.order) << " repeat=" << c.repeat << ": "
                              << c.error << '\n';
                }
            std::cout << "cells=" << cells.size() << " failed=" << failed << " out_dir="
                      << config.out_dir << '\n';
            if (failed > 0) return 1;
        } else if (*rep) {
            const auto rs = placelab::read_records_csv(rep_records);
            const std::filesystem::path rec_path(rep_records);
            std::string curves_path =
                rep_curves.empty() ? (rec_path.parent_path() / "curves.csv").string() : rep_curves;
            const auto curves = placelab::read_curves_csv(curves_path);
            const std::string out_dir =
                rep_out.empty() ? rec_path.parent_path().string() : rep_out;
            placelab::write_report_bundle(rs, curves, rep_median, out_dir.empty() ? "." : out_dir);
            std::cout << "report written to " << (out_dir.empty() ? "." : out_dir) << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
