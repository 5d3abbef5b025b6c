#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "placelab/harness.hpp"

namespace placelab {

namespace detail {

// Graph ids produced by generated datasets look like "<family>/<index>";
// anything without a slash falls into a single combined group.
inline std::string family_group(const std::string& graph_id) {
    const auto slash = graph_id.find('/');
    return slash == std::string::npos ? std::string("all") : graph_id.substr(0, slash);
}

inline std::string pad(const std::string& s, std::size_t w) {
    return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

}  // namespace detail

inline std::string render_best_order_table(const std::string& group, const BestOrderTable& t) {
    std::ostringstream out;
    out << "Best traversal order counts (" << group << ", " << t.num_graphs << " graphs)\n";
    out << detail::pad("devices", 9) << detail::pad("checkpoint", 12);
    for (TraversalKind k : t.columns) out << detail::pad(to_string(k), 15);
    out << '\n';
    for (const auto& row : t.rows) {
        out << detail::pad(std::to_string(row.device_count), 9)
            << detail::pad(std::to_string(row.checkpoint), 12);
        for (int c : row.counts) out << detail::pad(std::to_string(c), 15);
        out << '\n';
    }
    for (const auto& tie : t.ties) out << "tie: " << tie << '\n';
    return out.str();
}

// Short human-readable number for axis labels.
inline std::string fmt_sig(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

namespace detail {

inline constexpr const char* kPlotColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c",
                                              "#d62728", "#9467bd", "#8c564b"};

// Minimal line plot, one polyline per labeled series.
inline void write_svg_plot(const std::string& path, const std::string& title,
                           const std::vector<std::pair<std::string, std::vector<double>>>& series) {
    const double w = 720, h = 440, ml = 70, mr = 160, mt = 40, mb = 50;
    double ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
    std::size_t xmax = 1;
    for (const auto& [label, ys] : series) {
        xmax = std::max(xmax, ys.size());
        for (double y : ys)
            if (std::isfinite(y)) {
                ymin = std::min(ymin, y);
                ymax = std::max(ymax, y);
            }
    }
    if (!std::isfinite(ymin)) {
        ymin = 0;
        ymax = 1;
    }
    if (ymax == ymin) ymax = ymin + 1;
    const double px = (w - ml - mr) / static_cast<double>(std::max<std::size_t>(1, xmax - 1));
    const double py = (h - mt - mb) / (ymax - ymin);

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
    out << "<rect width='100%' height='100%' fill='white'/>\n";
    out << "<text x='" << ml << "' y='24' font-family='monospace' font-size='14'>" << title
        << "</text>\n";
    // Axes.
    out << "<line x1='" << ml << "' y1='" << h - mb << "' x2='" << w - mr << "' y2='" << h - mb
        << "' stroke='black'/>\n";
    out << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << h - mb
        << "' stroke='black'/>\n";
    out << "<text x='" << (w - mr + ml) / 2 << "' y='" << h - 14
        << "' font-family='monospace' font-size='12' text-anchor='middle'>episode</text>\n";
    for (int i = 0; i <= 4; ++i) {
        const double yv = ymin + (ymax - ymin) * i / 4.0;
        const double yc = h - mb - (yv - ymin) * py;
        out << "<text x='" << ml - 6 << "' y='" << yc + 4
            << "' font-family='monospace' font-size='11' text-anchor='end'>" << fmt_sig(yv)
            << "</text>\n";
        out << "<line x1='" << ml - 4 << "' y1='" << yc << "' x2='" << ml << "' y2='" << yc
            << "' stroke='black'/>\n";
    }
    std::size_t si = 0;
    for (const auto& [label, ys] : series) {
        const char* color = kPlotColors[si % 6];
        out << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
        for (std::size_t i = 0; i < ys.size(); ++i) {
            if (!std::isfinite(ys[i])) continue;
            out << ml + px * static_cast<double>(i) << ',' << h - mb - (ys[i] - ymin) * py << ' ';
        }
        out << "'/>\n";
        out << "<rect x='" << w - mr + 10 << "' y='" << mt + 18.0 * static_cast<double>(si)
            << "' width='12' height='12' fill='" << color << "'/>\n";
        out << "<text x='" << w - mr + 28 << "' y='" << mt + 18.0 * static_cast<double>(si) + 10
            << "' font-family='monospace' font-size='12'>" << label << "</text>\n";
        ++si;
    }
    out << "</svg>\n";
}

}  // namespace detail

// Builds the report bundle next to the experiment outputs:
//   tables.csv / tables.txt  best-order counts per family group
//   phases.csv               per-order improvement by training phase
//   plots/*.svg              mean best-so-far curves per graph and device count
inline void write_report_bundle(const RecordSet& rs, const std::vector<CurveRecord>& curves,
                                bool use_median, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path base(out_dir);

    // Group records by family.
    std::vector<std::string> groups;
    for (const SummaryRecord& r : rs.records) {
        const std::string g = detail::family_group(r.graph_id);
        if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
    }
    std::sort(groups.begin(), groups.end());

    std::ofstream tables_csv(base / "tables.csv");
    if (!tables_csv) throw std::runtime_error("cannot write tables.csv");
    std::ofstream tables_txt(base / "tables.txt");
    if (!tables_txt) throw std::runtime_error("cannot write tables.txt");

    bool header_done = false;
    for (const std::string& group : groups) {
        RecordSet sub;
        sub.checkpoint_episodes = rs.checkpoint_episodes;
        for (const SummaryRecord& r : rs.records)
            if (detail::family_group(r.graph_id) == group) sub.records.push_back(r);
        const BestOrderTable t = best_order_counts(sub, use_median);
        if (!header_done) {
            tables_csv << "group,device_count,checkpoint";
            for (TraversalKind k : t.columns) tables_csv << ',' << to_string(k);
            tables_csv << ",graphs\n";
            header_done = true;
        }
        for (const auto& row : t.rows) {
            tables_csv << group << ',' << row.device_count << ',' << row.checkpoint;
            for (int c : row.counts) tables_csv << ',' << c;
            tables_csv << ',' << t.num_graphs << '\n';
        }
        tables_txt << render_best_order_table(group, t) << '\n';
    }

    // Phase improvements per family group.
    std::ofstream phases(base / "phases.csv");
    if (!phases) throw std::runtime_error("cannot write phases.csv");
    phases << "group,order,phase_start,phase_end,mean_relative_improvement,cells\n";
    for (const std::string& group : groups) {
        std::vector<CurveRecord> sub;
        for (const CurveRecord& c : curves)
            if (detail::family_group(c.graph_id) == group) sub.push_back(c);
        if (sub.empty()) continue;
        const PhaseReport rep = phase_report(sub, rs.checkpoint_episodes);
        for (std::size_t oi = 0; oi < rep.orders.size(); ++oi)
            for (std::size_t pi = 0; pi < rep.phases.size(); ++pi)
                phases << group << ',' << to_string(rep.orders[oi]) << ',' << rep.phases[pi].first
                       << ',' << rep.phases[pi].second << ','
                       << fmt_double(rep.mean_improvement[oi][pi]) << ',' << rep.cells_counted[oi]
                       << '\n';
    }

    // Plots: one per (graph, device count), mean best-so-far per order.
    std::filesystem::create_directories(base / "plots");
    std::map<std::pair<std::string, int>, std::map<TraversalKind, std::vector<const CurveRecord*>>>
        by_plot;
    for (const CurveRecord& c : curves)
        by_plot[{c.graph_id, c.device_count}][c.order].push_back(&c);
    for (const auto& [key, per_order] : by_plot) {
        std::vector<std::pair<std::string, std::vector<double>>> series;
        for (const auto& [order, cells] : per_order) {
            std::size_t episodes = 0;
            for (const CurveRecord* c : cells) episodes = std::max(episodes, c->best_feasible_us.size());
            std::vector<double> mean(episodes, 0.0);
            for (std::size_t e = 0; e < episodes; ++e) {
                int n = 0;
                for (const CurveRecord* c : cells)
                    if (e < c->best_feasible_us.size()) {
                        mean[e] += c->best_feasible_us[e];
                        ++n;
                    }
                mean[e] = n > 0 ? mean[e] / n : std::numeric_limits<double>::quiet_NaN();
            }
            series.emplace_back(to_string(order), std::move(mean));
        }
        std::sort(series.begin(), series.end(), [](const auto& a, const auto& b) {
            return table_column_rank(traversal_kind_from_string(a.first)) <
                   table_column_rank(traversal_kind_from_string(b.first));
        });
        std::string fname = key.first;
        for (char& ch : fname)
            if (ch == '/' || ch == '\\') ch = '_';
        fname += "_d" + std::to_string(key.second) + ".svg";
        detail::write_svg_plot((base / "plots" / fname).string(),
                               key.first + " devices=" + std::to_string(key.second) +
                                   " mean best makespan (us)",
                               series);
    }
}

}  // namespace placelab
