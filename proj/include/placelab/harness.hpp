#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "placelab/cluster.hpp"
#include "placelab/generators.hpp"
#include "placelab/graph.hpp"
#include "placelab/graph_io.hpp"
#include "placelab/policy.hpp"
#include "placelab/random.hpp"
#include "placelab/traversal.hpp"

namespace placelab {

// Column order used by the result tables; also the tie-breaking precedence
// when two orders reach the same aggregate makespan.
inline constexpr TraversalKind kTableColumnOrder[] = {
    TraversalKind::kLexico,       TraversalKind::kTopo,          TraversalKind::kDfsPreorder,
    TraversalKind::kReversedTopo, TraversalKind::kDfsPostorder, TraversalKind::kBfs,
};

inline int table_column_rank(TraversalKind k) {
    for (int i = 0; i < 6; ++i)
        if (kTableColumnOrder[i] == k) return i;
    throw std::invalid_argument("unknown traversal kind");
}

struct FamilyCount {
    Family family = Family::kCnnLike;
    int target_nodes = 0;
    int count = 0;
};

// One experiment = the cross product of graphs x device counts x traversal
// orders x repeats, each cell a full training run with its own derived seed.
struct ExperimentConfig {
    std::string dataset_dir;           // directory of graph JSON files, or ...
    std::vector<FamilyCount> families;  // ... generated datasets (exactly one of the two)

    std::vector<int> device_counts{3, 5, 8};
    std::vector<TraversalKind> orders{kTableColumnOrder, kTableColumnOrder + 6};
    int repeats = 10;
    TrainConfig train;

    double bandwidth_bytes_per_sec = 1e9;
    double transfer_latency_sec = 5e-5;
    std::int64_t memory_capacity_bytes = 0;  // 0: per graph, total graph memory per device

    int workers = 0;  // 0: hardware concurrency
    std::uint64_t base_seed = 1;
    bool use_median = false;  // aggregate repeats by median instead of mean
    std::string out_dir = "experiment-out";

    std::vector<std::string> validate() const {
        std::vector<std::string> out;
        if (dataset_dir.empty() == families.empty())
            out.push_back("config must set exactly one of dataset_dir / families");
        for (const FamilyCount& fc : families) {
            if (fc.count < 1) out.push_back("family count must be >= 1");
            if (fc.target_nodes < 1) out.push_back("family target_nodes must be >= 1");
        }
        if (device_counts.empty()) out.push_back("device_counts must be non-empty");
        for (int d : device_counts)
            if (d < 1) out.push_back("device counts must be >= 1");
        if (orders.empty()) out.push_back("orders must be non-empty");
        if (repeats < 1) out.push_back("repeats must be >= 1");
        if (!(bandwidth_bytes_per_sec > 0.0)) out.push_back("bandwidth_bytes_per_sec must be > 0");
        if (!(transfer_latency_sec >= 0.0)) out.push_back("transfer_latency_sec must be >= 0");
        if (memory_capacity_bytes < 0) out.push_back("memory_capacity_bytes must be >= 0");
        if (workers < 0) out.push_back("workers must be >= 0");
        auto tbad = train.validate();
        out.insert(out.end(), tbad.begin(), tbad.end());
        return out;
    }
};

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j,
                                                    const std::string& where = "config") {
    if (!j.is_object()) throw ParseError(where + ": top level must be a JSON object");
    ExperimentConfig c;
    c.orders.clear();
    c.device_counts.clear();

    if (j.contains("dataset_dir")) c.dataset_dir = j.at("dataset_dir").get<std::string>();
    if (j.contains("families")) {
        for (const auto& jf : j.at("families")) {
            FamilyCount fc;
            fc.family = family_from_string(detail::require_string(jf, "family", where + ": families[]"));
            fc.target_nodes = static_cast<int>(detail::require_int(jf, "target_nodes", where + ": families[]"));
            fc.count = static_cast<int>(detail::require_int(jf, "count", where + ": families[]"));
            c.families.push_back(fc);
        }
    }
    if (j.contains("device_counts"))
        for (const auto& v : j.at("device_counts")) c.device_counts.push_back(v.get<int>());
    else
        c.device_counts = {3, 5, 8};
    if (j.contains("orders"))
        for (const auto& v : j.at("orders")) c.orders.push_back(traversal_kind_from_string(v.get<std::string>()));
    else
        c.orders.assign(kTableColumnOrder, kTableColumnOrder + 6);
    if (j.contains("repeats")) c.repeats = j.at("repeats").get<int>();

    if (j.contains("train")) {
        const auto& jt = j.at("train");
        if (jt.contains("episodes")) c.train.episodes = jt.at("episodes").get<int>();
        if (jt.contains("learning_rate")) c.train.learning_rate = jt.at("learning_rate").get<double>();
        if (jt.contains("hidden")) c.train.hidden = jt.at("hidden").get<int>();
        if (jt.contains("embed_dim")) c.train.embed_dim = jt.at("embed_dim").get<int>();
        if (jt.contains("embed_rounds")) c.train.embed_rounds = jt.at("embed_rounds").get<int>();
        if (jt.contains("memory_penalty")) c.train.memory_penalty = jt.at("memory_penalty").get<double>();
        if (jt.contains("grad_clip")) c.train.grad_clip = jt.at("grad_clip").get<double>();
        if (jt.contains("baseline_decay")) c.train.baseline_decay = jt.at("baseline_decay").get<double>();
        if (jt.contains("checkpoints")) {
            c.train.checkpoints.clear();
            for (const auto& v : jt.at("checkpoints")) c.train.checkpoints.push_back(v.get<int>());
        }
    }

    if (j.contains("bandwidth_bytes_per_sec"))
        c.bandwidth_bytes_per_sec = j.at("bandwidth_bytes_per_sec").get<double>();
    if (j.contains("transfer_latency_sec"))
        c.transfer_latency_sec = j.at("transfer_latency_sec").get<double>();
    if (j.contains("memory_capacity_bytes"))
        c.memory_capacity_bytes = j.at("memory_capacity_bytes").get<std::int64_t>();
    if (j.contains("workers")) c.workers = j.at("workers").get<int>();
    if (j.contains("base_seed")) c.base_seed = j.at("base_seed").get<std::uint64_t>();
    if (j.contains("use_median")) c.use_median = j.at("use_median").get<bool>();
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();

    auto bad = c.validate();
    if (!bad.empty()) {
        std::string msg = where + ": invalid experiment config:";
        for (const auto& v : bad) msg += "\n  - " + v;
        throw ValidationError(std::move(msg), std::move(bad));
    }
    return c;
}

inline nlohmann::ordered_json experiment_config_to_json(const ExperimentConfig& c) {
    nlohmann::ordered_json j;
    if (!c.dataset_dir.empty()) j["dataset_dir"] = c.dataset_dir;
    if (!c.families.empty()) {
        j["families"] = nlohmann::ordered_json::array();
        for (const FamilyCount& fc : c.families)
            j["families"].push_back({{"family", to_string(fc.family)},
                                     {"target_nodes", fc.target_nodes},
                                     {"count", fc.count}});
    }
    j["device_counts"] = c.device_counts;
    j["orders"] = nlohmann::ordered_json::array();
    for (TraversalKind k : c.orders) j["orders"].push_back(to_string(k));
    j["repeats"] = c.repeats;
    j["train"] = {{"episodes", c.train.episodes},
                  {"learning_rate", c.train.learning_rate},
                  {"hidden", c.train.hidden},
                  {"embed_dim", c.train.embed_dim},
                  {"embed_rounds", c.train.embed_rounds},
                  {"memory_penalty", c.train.memory_penalty},
                  {"grad_clip", c.train.grad_clip},
                  {"baseline_decay", c.train.baseline_decay},
                  {"checkpoints", c.train.checkpoints}};
    j["bandwidth_bytes_per_sec"] = c.bandwidth_bytes_per_sec;
    j["transfer_latency_sec"] = c.transfer_latency_sec;
    j["memory_capacity_bytes"] = c.memory_capacity_bytes;
    j["workers"] = c.workers;
    j["base_seed"] = c.base_seed;
    j["use_median"] = c.use_median;
    j["out_dir"] = c.out_dir;
    return j;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("'" + path + "': " + e.what());
    }
    return experiment_config_from_json(j, "'" + path + "'");
}

struct NamedGraph {
    std::string id;
    ComputationGraph graph;
};

// Graphs for a config: either every *.json in dataset_dir (sorted by name,
// id = file stem) or generated datasets (id = "<family>/<index>"). Dataset
// seeds derive from base_seed, so the whole grid is one function of config.
inline std::vector<NamedGraph> collect_graphs(const ExperimentConfig& c) {
    std::vector<NamedGraph> out;
    if (!c.dataset_dir.empty()) {
        std::vector<std::filesystem::path> paths;
        for (const auto& entry : std::filesystem::directory_iterator(c.dataset_dir))
            if (entry.is_regular_file() && entry.path().extension() == ".json")
                paths.push_back(entry.path());
        std::sort(paths.begin(), paths.end());
        if (paths.empty())
            throw std::invalid_argument("dataset_dir '" + c.dataset_dir + "' has no .json graphs");
        for (const auto& p : paths) out.push_back({p.stem().string(), load_graph(p.string())});
    } else {
        for (const FamilyCount& fc : c.families) {
            FamilySpec base;
            base.family = fc.family;
            base.target_nodes = fc.target_nodes;
            base.seed = derive_seed(c.base_seed, std::string_view("dataset"),
                                    std::string_view(to_string(fc.family)));
            auto graphs = gen_dataset(base, fc.count);
            for (int k = 0; k < fc.count; ++k) {
                char idx[16];
                std::snprintf(idx, sizeof idx, "%03d", k);
                out.push_back({std::string(to_string(fc.family)) + "/" + idx,
                               std::move(graphs[static_cast<std::size_t>(k)])});
            }
        }
    }
    return out;
}

inline std::uint64_t cell_seed(std::uint64_t base_seed, const std::string& graph_id,
                               int device_count, TraversalKind order, int repeat) {
    return derive_seed(base_seed, std::string_view("cell"), std::string_view(graph_id),
                       static_cast<std::uint64_t>(device_count), std::string_view(to_string(order)),
                       static_cast<std::uint64_t>(repeat));
}

struct CellResult {
    std::string graph_id;
    int device_count = 0;
    TraversalKind order = TraversalKind::kTopo;
    int repeat = 0;
    std::uint64_t seed = 0;
    TrainingRecord record;
    std::string error;       // empty on success
    double duration_ms = 0;  // wall clock; informational only
};

// Runs every cell of the grid. Work is distributed over a thread pool, but
// each cell is a pure function of (config, graph, seed) written to its own
// slot, so results do not depend on the worker count. Failures are recorded
// per cell and never abort the grid.
inline std::vector<CellResult> run_grid(const ExperimentConfig& config,
                                        const std::vector<NamedGraph>& graphs) {
    {
        auto bad = config.validate();
        if (!bad.empty()) throw std::invalid_argument("run_grid: " + bad.front());
    }
    struct Task {
        const NamedGraph* graph;
        int device_count;
        TraversalKind order;
        int repeat;
    };
    std::vector<Task> tasks;
    for (const NamedGraph& g : graphs)
        for (int dc : config.device_counts)
            for (TraversalKind order : config.orders)
                for (int r = 0; r < config.repeats; ++r) tasks.push_back({&g, dc, order, r});

    std::vector<CellResult> cells(tasks.size());
    std::atomic<std::size_t> next{0};
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t nworkers =
        std::min<std::size_t>(tasks.size(), config.workers > 0 ? static_cast<unsigned>(config.workers) : hw);

    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            const Task& t = tasks[i];
            CellResult& cell = cells[i];
            cell.graph_id = t.graph->id;
            cell.device_count = t.device_count;
            cell.order = t.order;
            cell.repeat = t.repeat;
            cell.seed = cell_seed(config.base_seed, t.graph->id, t.device_count, t.order, t.repeat);
            const auto t0 = std::chrono::steady_clock::now();
            try {
                std::int64_t capacity = config.memory_capacity_bytes;
                if (capacity == 0)
                    for (const OpNode& op : t.graph->graph.nodes()) capacity += op.memory_bytes;
                const ClusterSpec cluster =
                    make_uniform_cluster(t.device_count, capacity, config.bandwidth_bytes_per_sec,
                                         config.transfer_latency_sec);
                cell.record = train(t.graph->graph, t.order, cluster, config.train, cell.seed);
            } catch (const std::exception& e) {
                cell.error = e.what();
            }
            cell.duration_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        }
    };

    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < nworkers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    return cells;
}

// Flat view of one finished cell, as stored in records.csv; aggregation and
// reporting work from these so they can run off saved files as well.
struct SummaryRecord {
    std::string graph_id;
    int device_count = 0;
    TraversalKind order = TraversalKind::kTopo;
    int repeat = 0;
    std::uint64_t seed = 0;
    std::vector<double> checkpoint_best_us;
    double telescoping_max_abs_err = 0.0;
    std::string status;  // "ok" or the error message
};

struct RecordSet {
    std::vector<int> checkpoint_episodes;
    std::vector<SummaryRecord> records;
};

inline RecordSet to_record_set(const ExperimentConfig& config, const std::vector<CellResult>& cells) {
    RecordSet rs;
    rs.checkpoint_episodes = config.train.checkpoints;
    rs.records.reserve(cells.size());
    for (const CellResult& c : cells) {
        SummaryRecord r;
        r.graph_id = c.graph_id;
        r.device_count = c.device_count;
        r.order = c.order;
        r.repeat = c.repeat;
        r.seed = c.seed;
        r.checkpoint_best_us = c.record.checkpoint_best_us;
        r.telescoping_max_abs_err = c.record.telescoping_max_abs_err;
        r.status = c.error.empty() ? "ok" : c.error;
        rs.records.push_back(std::move(r));
    }
    return rs;
}

// Raised when aggregation is asked to summarize an incomplete grid.
struct MissingCellsError : std::runtime_error {
    explicit MissingCellsError(const std::string& what) : std::runtime_error(what) {}
};

struct BestOrderTable {
    std::vector<TraversalKind> columns;  // canonical table order
    struct Row {
        int device_count = 0;
        int checkpoint = 0;           // episode index
        std::vector<int> counts;      // graphs for which the column's order won
    };
    std::vector<Row> rows;            // sorted by (device_count, checkpoint)
    std::vector<std::string> ties;    // one note per tie that was broken by precedence
    int num_graphs = 0;
};

namespace detail {

inline double aggregate(std::vector<double> vals, bool use_median) {
    if (use_median) {
        std::sort(vals.begin(), vals.end());
        const std::size_t n = vals.size();
        return n % 2 == 1 ? vals[n / 2] : 0.5 * (vals[n / 2 - 1] + vals[n / 2]);
    }
    double s = 0.0;
    for (double v : vals) s += v;
    return s / static_cast<double>(vals.size());
}

}  // namespace detail

// For every (device count, checkpoint): on how many graphs did each traversal
// order achieve the lowest aggregated best-so-far makespan. Exact-equal
// aggregates are broken by table column precedence and logged. Requires the
// grid to be complete: every (graph, device count, order) must have one "ok"
// record per repeat index.
inline BestOrderTable best_order_counts(const RecordSet& rs, bool use_median = false) {
    BestOrderTable table;

    std::vector<std::string> graph_ids;
    std::vector<int> device_counts;
    std::vector<TraversalKind> orders;
    int max_repeat = -1;
    for (const SummaryRecord& r : rs.records) {
        if (std::find(graph_ids.begin(), graph_ids.end(), r.graph_id) == graph_ids.end())
            graph_ids.push_back(r.graph_id);
        if (std::find(device_counts.begin(), device_counts.end(), r.device_count) == device_counts.end())
            device_counts.push_back(r.device_count);
        if (std::find(orders.begin(), orders.end(), r.order) == orders.end()) orders.push_back(r.order);
        max_repeat = std::max(max_repeat, r.repeat);
    }
    if (rs.records.empty()) throw MissingCellsError("best_order_counts: no records");
    std::sort(device_counts.begin(), device_counts.end());
    std::sort(orders.begin(), orders.end(),
              [](TraversalKind a, TraversalKind b) { return table_column_rank(a) < table_column_rank(b); });
    const int repeats = max_repeat + 1;

    // Completeness check, with every hole named.
    std::map<std::tuple<std::string, int, TraversalKind, int>, const SummaryRecord*> index;
    for (const SummaryRecord& r : rs.records)
        index[{r.graph_id, r.device_count, r.order, r.repeat}] = &r;
    std::string missing;
    int missing_count = 0;
    for (const auto& gid : graph_ids)
        for (int dc : device_counts)
            for (TraversalKind o : orders)
                for (int rep = 0; rep < repeats; ++rep) {
                    auto it = index.find({gid, dc, o, rep});
                    const bool ok = it != index.end() && it->second->status == "ok";
                    if (!ok && missing_count < 20)
                        missing += "\n  - " + gid + " devices=" + std::to_string(dc) + " order=" +
                                   to_string(o) + " repeat=" + std::to_string(rep) +
                                   (it == index.end() ? " (absent)" : " (failed: " + it->second->status + ")");
                    if (!ok) ++missing_count;
                }
    if (missing_count > 0)
        throw MissingCellsError("best_order_counts: grid incomplete, " +
                                std::to_string(missing_count) + " cell(s) missing or failed:" + missing);

    table.columns = orders;
    table.num_graphs = static_cast<int>(graph_ids.size());

    for (int dc : device_counts) {
        for (std::size_t ci = 0; ci < rs.checkpoint_episodes.size(); ++ci) {
            BestOrderTable::Row row;
            row.device_count = dc;
            row.checkpoint = rs.checkpoint_episodes[ci];
            row.counts.assign(orders.size(), 0);
            for (const auto& gid : graph_ids) {
                double best_val = std::numeric_limits<double>::infinity();
                std::size_t best_col = 0;
                bool tie = false;
                for (std::size_t oi = 0; oi < orders.size(); ++oi) {
                    std::vector<double> vals;
                    vals.reserve(static_cast<std::size_t>(repeats));
                    for (int rep = 0; rep < repeats; ++rep) {
                        const SummaryRecord* r = index.at({gid, dc, orders[oi], rep});
                        vals.push_back(r->checkpoint_best_us.at(ci));
                    }
                    const double agg = detail::aggregate(std::move(vals), use_median);
                    if (agg < best_val) {
                        best_val = agg;
                        best_col = oi;
                        tie = false;
                    } else if (agg == best_val) {
                        tie = true;  // earlier column wins; orders[] is in precedence order
                    }
                }
                if (tie)
                    table.ties.push_back("graph " + gid + " devices=" + std::to_string(dc) +
                                         " checkpoint=" + std::to_string(row.checkpoint) +
                                         ": tie resolved to " + to_string(orders[best_col]));
                ++row.counts[best_col];
            }
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

// Per-episode series of one cell, as stored in curves.csv.
struct CurveRecord {
    std::string graph_id;
    int device_count = 0;
    TraversalKind order = TraversalKind::kTopo;
    int repeat = 0;
    std::vector<double> makespan_us;       // indexed by episode
    std::vector<double> best_feasible_us;  // best-so-far after each episode
};

struct PhaseReport {
    std::vector<std::pair<int, int>> phases;  // [start, end] episode indices of best-so-far
    std::vector<TraversalKind> orders;
    // mean_improvement[order][phase]: mean of (best[start]-best[end])/best[start]
    std::vector<std::vector<double>> mean_improvement;
    std::vector<int> cells_counted;  // per order
};

// Mean relative improvement of the best-so-far makespan inside each training
// phase; phase boundaries are the checkpoint episodes. With checkpoints
// {9, 19, 49} the phases are episodes 1-9, 10-19 and 20-49.
inline PhaseReport phase_report(const std::vector<CurveRecord>& curves,
                                const std::vector<int>& checkpoint_episodes) {
    if (checkpoint_episodes.empty()) throw std::invalid_argument("phase_report: no checkpoints");
    PhaseReport rep;
    int prev = 0;
    for (int c : checkpoint_episodes) {
        rep.phases.emplace_back(prev, c);
        prev = c;
    }
    for (const CurveRecord& c : curves)
        if (std::find(rep.orders.begin(), rep.orders.end(), c.order) == rep.orders.end())
            rep.orders.push_back(c.order);
    std::sort(rep.orders.begin(), rep.orders.end(),
              [](TraversalKind a, TraversalKind b) { return table_column_rank(a) < table_column_rank(b); });

    rep.mean_improvement.assign(rep.orders.size(), std::vector<double>(rep.phases.size(), 0.0));
    rep.cells_counted.assign(rep.orders.size(), 0);

    for (const CurveRecord& c : curves) {
        const auto oi = static_cast<std::size_t>(
            std::find(rep.orders.begin(), rep.orders.end(), c.order) - rep.orders.begin());
        bool usable = !c.best_feasible_us.empty();
        for (const auto& [s, e] : rep.phases)
            usable = usable && e < static_cast<int>(c.best_feasible_us.size()) &&
                     std::isfinite(c.best_feasible_us[static_cast<std::size_t>(s)]) &&
                     c.best_feasible_us[static_cast<std::size_t>(s)] > 0.0;
        if (!usable) continue;
        ++rep.cells_counted[oi];
        for (std::size_t pi = 0; pi < rep.phases.size(); ++pi) {
            const auto [s, e] = rep.phases[pi];
            const double b0 = c.best_feasible_us[static_cast<std::size_t>(s)];
            const double b1 = c.best_feasible_us[static_cast<std::size_t>(e)];
            rep.mean_improvement[oi][pi] += (b0 - b1) / b0;
        }
    }
    for (std::size_t oi = 0; oi < rep.orders.size(); ++oi)
        if (rep.cells_counted[oi] > 0)
            for (double& v : rep.mean_improvement[oi]) v /= rep.cells_counted[oi];
    return rep;
}

// ---- file output ----

// 17 significant digits: doubles survive the text round trip bit-exactly.
inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline std::string csv_safe(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    return s;
}

}  // namespace detail

inline void write_records_csv(const RecordSet& rs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "graph_id,device_count,order,repeat,seed";
    for (int c : rs.checkpoint_episodes) out << ",best_ep_" << c;
    out << ",telescoping_max_abs_err,status\n";
    for (const SummaryRecord& r : rs.records) {
        out << detail::csv_safe(r.graph_id) << ',' << r.device_count << ',' << to_string(r.order)
            << ',' << r.repeat << ',' << r.seed;
        for (std::size_t i = 0; i < rs.checkpoint_episodes.size(); ++i)
            out << ',' << (i < r.checkpoint_best_us.size() ? fmt_double(r.checkpoint_best_us[i]) : "");
        out << ',' << fmt_double(r.telescoping_max_abs_err) << ',' << detail::csv_safe(r.status)
            << '\n';
    }
}

inline void write_curves_csv(const std::vector<CellResult>& cells, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "graph_id,device_count,order,repeat,episode,makespan_us,best_feasible_us\n";
    for (const CellResult& c : cells) {
        if (!c.error.empty()) continue;
        for (const EpisodePoint& p : c.record.episodes)
            out << detail::csv_safe(c.graph_id) << ',' << c.device_count << ',' << to_string(c.order)
                << ',' << c.repeat << ',' << p.episode << ',' << fmt_double(p.makespan_us) << ','
                << fmt_double(p.best_feasible_us) << '\n';
    }
}

inline void write_timings_csv(const std::vector<CellResult>& cells, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "graph_id,device_count,order,repeat,duration_ms\n";
    for (const CellResult& c : cells)
        out << detail::csv_safe(c.graph_id) << ',' << c.device_count << ',' << to_string(c.order)
            << ',' << c.repeat << ',' << fmt_double(c.duration_ms) << '\n';
}

inline void write_manifest(const ExperimentConfig& config, const std::vector<NamedGraph>& graphs,
                           const std::vector<CellResult>& cells, const std::string& path) {
    nlohmann::ordered_json j;
    // Results are independent of the worker count and of where they are
    // written, so neither is part of the result identity: manifests from
    // reruns must compare equal byte for byte.
    ExperimentConfig echo = config;
    echo.workers = 0;
    echo.out_dir.clear();
    j["config"] = experiment_config_to_json(echo);
    j["graphs"] = nlohmann::ordered_json::array();
    for (const NamedGraph& g : graphs) {
        const GraphStats s = g.graph.stats();
        j["graphs"].push_back({{"id", g.id},
                               {"nodes", s.num_nodes},
                               {"edges", s.num_edges},
                               {"avg_degree", s.avg_degree},
                               {"diameter", s.diameter},
                               {"longest_directed_path", longest_directed_path_hops(g.graph)},
                               {"sources", s.num_sources},
                               {"sinks", s.num_sinks}});
    }
    int failed = 0;
    for (const CellResult& c : cells)
        if (!c.error.empty()) ++failed;
    j["cells"] = cells.size();
    j["failed_cells"] = failed;
    j["versions"] = {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                   std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                     {"compiler", __VERSION__}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
}

// Writes records.csv, curves.csv, timings.csv and manifest.json. Everything
// except timings.csv is a deterministic function of the config.
inline void write_experiment_outputs(const ExperimentConfig& config,
                                     const std::vector<NamedGraph>& graphs,
                                     const std::vector<CellResult>& cells,
                                     const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path base(out_dir);
    write_records_csv(to_record_set(config, cells), (base / "records.csv").string());
    write_curves_csv(cells, (base / "curves.csv").string());
    write_timings_csv(cells, (base / "timings.csv").string());
    write_manifest(config, graphs, cells, (base / "manifest.json").string());
}

// ---- file input (report path) ----

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace detail

inline RecordSet read_records_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open records file '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ParseError("'" + path + "': empty file");
    const auto header = detail::split_csv_line(line);
    RecordSet rs;
    std::vector<std::size_t> ckpt_cols;
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i].rfind("best_ep_", 0) == 0) {
            rs.checkpoint_episodes.push_back(std::stoi(header[i].substr(8)));
            ckpt_cols.push_back(i);
        }
    auto col = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw ParseError("'" + path + "': missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto c_graph = col("graph_id"), c_dev = col("device_count"), c_order = col("order"),
               c_rep = col("repeat"), c_seed = col("seed"), c_tel = col("telescoping_max_abs_err"),
               c_status = col("status");
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != header.size())
            throw ParseError("'" + path + "' line " + std::to_string(lineno) + ": expected " +
                             std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
        SummaryRecord r;
        r.graph_id = f[c_graph];
        r.device_count = std::stoi(f[c_dev]);
        r.order = traversal_kind_from_string(f[c_order]);
        r.repeat = std::stoi(f[c_rep]);
        r.seed = std::stoull(f[c_seed]);
        for (std::size_t ci : ckpt_cols) r.checkpoint_best_us.push_back(std::strtod(f[ci].c_str(), nullptr));
        r.telescoping_max_abs_err = std::strtod(f[c_tel].c_str(), nullptr);
        r.status = f[c_status];
        rs.records.push_back(std::move(r));
    }
    return rs;
}

inline std::vector<CurveRecord> read_curves_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open curves file '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ParseError("'" + path + "': empty file");
    const auto header = detail::split_csv_line(line);
    auto col = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw ParseError("'" + path + "': missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto c_graph = col("graph_id"), c_dev = col("device_count"), c_order = col("order"),
               c_rep = col("repeat"), c_ep = col("episode"), c_mk = col("makespan_us"),
               c_best = col("best_feasible_us");

    std::map<std::tuple<std::string, int, std::string, int>, CurveRecord> acc;
    std::vector<std::tuple<std::string, int, std::string, int>> insertion;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != header.size())
            throw ParseError("'" + path + "' line " + std::to_string(lineno) + ": bad field count");
        const std::tuple<std::string, int, std::string, int> key{f[c_graph], std::stoi(f[c_dev]),
                                                                 f[c_order], std::stoi(f[c_rep])};
        auto [it, inserted] = acc.try_emplace(key);
        if (inserted) {
            it->second.graph_id = f[c_graph];
            it->second.device_count = std::stoi(f[c_dev]);
            it->second.order = traversal_kind_from_string(f[c_order]);
            it->second.repeat = std::stoi(f[c_rep]);
            insertion.push_back(key);
        }
        const int ep = std::stoi(f[c_ep]);
        auto& cr = it->second;
        if (static_cast<int>(cr.makespan_us.size()) != ep)
            throw ParseError("'" + path + "' line " + std::to_string(lineno) +
                             ": episodes out of order for this cell");
        cr.makespan_us.push_back(std::strtod(f[c_mk].c_str(), nullptr));
        cr.best_feasible_us.push_back(std::strtod(f[c_best].c_str(), nullptr));
    }
    std::vector<CurveRecord> out;
    out.reserve(insertion.size());
    for (const auto& key : insertion) out.push_back(std::move(acc.at(key)));
    return out;
}

}  // namespace placelab
