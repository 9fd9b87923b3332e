#include "densitometer/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "densitometer/pruner.hpp"
#include "densitometer/run_grid.hpp"

namespace densitometer {

namespace fs = std::filesystem;

namespace {

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string lower(std::string s) {
    for (char& c : s) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return s;
}

struct GroupKey {
    std::string dataset;
    Family family;
    OptimizerKind optimizer;

    bool operator<(const GroupKey& o) const {
        return std::tie(dataset, family, optimizer) < std::tie(o.dataset, o.family, o.optimizer);
    }

    std::string slug() const {
        return lower(dataset) + "_" + lower(family_name(family)) + "_" + optimizer_name(optimizer);
    }
};

std::map<GroupKey, std::vector<const RunRecord*>> group_records(
    const std::vector<RunRecord>& records) {
    std::map<GroupKey, std::vector<const RunRecord*>> groups;
    for (const auto& r : records) {
        groups[{r.dataset, r.spec.family, r.optimizer}].push_back(&r);
    }
    return groups;
}

const RunRecord* find_counterpart_1x(const std::vector<const RunRecord*>& group,
                                     const RunRecord& target) {
    for (const RunRecord* r : group) {
        if (r->spec.size == 1.0 && r->init == target.init && r->init_seed == target.init_seed &&
            r->data_seed == target.data_seed) {
            return r;
        }
    }
    return nullptr;
}

}  // namespace

std::vector<GroupStats> compute_group_stats(const std::vector<RunRecord>& records) {
    std::vector<GroupStats> out;
    for (const auto& [key, group] : group_records(records)) {
        GroupStats gs;
        gs.dataset = key.dataset;
        gs.family = key.family;
        gs.optimizer = key.optimizer;

        std::map<double, std::vector<const RunRecord*>> by_size;
        for (const RunRecord* r : group) {
            by_size[r->spec.size].push_back(r);
        }

        std::vector<std::vector<double>> anova_groups;
        for (const auto& [size, runs] : by_size) {
            SizeStats ss;
            ss.size = size;
            ss.n = static_cast<int>(runs.size());
            std::vector<double> observed;
            std::vector<double> null_values;
            bool all_null = true;
            for (const RunRecord* r : runs) {
                observed.push_back(r->effective_density);
                const RunRecord* counterpart = find_counterpart_1x(group, *r);
                if (counterpart) {
                    null_values.push_back(null_hypothesis_density(*r, *counterpart));
                } else {
                    all_null = false;
                }
            }
            if (observed.size() >= 2) {
                const Summary s = summarize(observed);
                ss.observed_mean = s.mean;
                ss.observed_std = s.stddev;
                anova_groups.push_back(observed);
            } else {
                ss.observed_mean = observed.empty() ? 0.0 : observed[0];
                ss.observed_std = 0.0;
            }
            if (all_null && null_values.size() >= 2) {
                const Summary s = summarize(null_values);
                ss.has_null = true;
                ss.null_mean = s.mean;
                ss.null_std = s.stddev;
                // identical samples would make the pooled variance zero with
                // equal means, which t_test_unpaired handles as t=0, p=1
                ss.has_t = true;
                ss.t_vs_null = t_test_unpaired(observed, null_values);
            }
            gs.sizes.push_back(std::move(ss));
        }
        if (anova_groups.size() >= 2) {
            bool identical = true;
            const double first = anova_groups[0][0];
            for (const auto& g : anova_groups) {
                for (const double v : g) {
                    if (v != first) {
                        identical = false;
                    }
                }
            }
            if (!identical) {
                gs.has_anova = true;
                gs.anova = anova_oneway(anova_groups);
            }
        }
        out.push_back(std::move(gs));
    }
    return out;
}

void write_stats_json(const std::string& path, const std::vector<RunRecord>& records) {
    nlohmann::json root;
    root["groups"] = nlohmann::json::array();
    for (const GroupStats& gs : compute_group_stats(records)) {
        nlohmann::json gj;
        gj["dataset"] = gs.dataset;
        gj["family"] = family_name(gs.family);
        gj["optimizer"] = optimizer_name(gs.optimizer);
        if (gs.has_anova) {
            gj["anova"] = {{"F", gs.anova.statistic},
                           {"df1", gs.anova.df1},
                           {"df2", gs.anova.df2},
                           {"p", gs.anova.p},
                           {"p_display", gs.anova.p_display()}};
        } else {
            gj["anova"] = nullptr;
        }
        gj["sizes"] = nlohmann::json::array();
        for (const SizeStats& ss : gs.sizes) {
            nlohmann::json sj;
            sj["size"] = ss.size;
            sj["n"] = ss.n;
            sj["observed_mean"] = ss.observed_mean;
            sj["observed_std"] = ss.observed_std;
            if (ss.has_null) {
                sj["null_mean"] = ss.null_mean;
                sj["null_std"] = ss.null_std;
            } else {
                sj["null_mean"] = nullptr;
                sj["null_std"] = nullptr;
            }
            if (ss.has_t) {
                sj["t"] = ss.t_vs_null.statistic;
                sj["t_df"] = ss.t_vs_null.df1;
                sj["t_p"] = ss.t_vs_null.p;
                sj["t_p_display"] = ss.t_vs_null.p_display();
            } else {
                sj["t"] = nullptr;
            }
            gj["sizes"].push_back(std::move(sj));
        }
        root["groups"].push_back(std::move(gj));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("write_stats_json: cannot open " + path);
    }
    out << root.dump(2) << "\n";
}

std::vector<FigureTable> build_figures(const std::vector<RunRecord>& records,
                                       const std::string& output_dir) {
    if (records.empty()) {
        throw std::invalid_argument("build_figures: no records");
    }
    std::vector<FigureTable> figures;
    for (const auto& [key, group] : group_records(records)) {
        std::map<double, std::vector<const RunRecord*>> by_size;
        for (const RunRecord* r : group) {
            by_size[r->spec.size].push_back(r);
        }

        // pruning trajectories: mean accuracy +- std per cycle for each size
        FigureTable traj;
        traj.kind = "trajectory";
        traj.slug = key.slug();
        traj.columns = {"size", "cycle", "density", "mean_accuracy", "std_accuracy"};
        for (const auto& [size, runs] : by_size) {
            std::vector<PruneTrajectory> trajectories;
            for (const RunRecord* r : runs) {
                trajectories.push_back(
                    read_trajectory_csv((fs::path(output_dir) / r->trajectory_path).string()));
            }
            const std::size_t cycles = trajectories.front().cycles.size();
            for (std::size_t c = 0; c < cycles; ++c) {
                std::vector<double> accs;
                for (const auto& t : trajectories) {
                    accs.push_back(t.cycles[c].val_accuracy);
                }
                const double mean =
                    std::accumulate(accs.begin(), accs.end(), 0.0) / static_cast<double>(accs.size());
                double std_dev = 0.0;
                if (accs.size() >= 2) {
                    double ss = 0.0;
                    for (const double a : accs) {
                        ss += (a - mean) * (a - mean);
                    }
                    std_dev = std::sqrt(ss / static_cast<double>(accs.size() - 1));
                }
                traj.rows.push_back({format_double_compact(size), std::to_string(c),
                                     fmt6(trajectories.front().cycles[c].density), fmt6(mean),
                                     fmt6(std_dev)});
            }
        }
        figures.push_back(std::move(traj));

        // effective density distribution per size
        FigureTable kde_fig;
        kde_fig.kind = "kde";
        kde_fig.slug = key.slug();
        kde_fig.columns = {"size", "x", "density"};
        constexpr int kGrid = 129;
        std::vector<double> grid(kGrid);
        for (int i = 0; i < kGrid; ++i) {
            grid[static_cast<std::size_t>(i)] = static_cast<double>(i) / (kGrid - 1);
        }
        for (const auto& [size, runs] : by_size) {
            std::vector<double> samples;
            for (const RunRecord* r : runs) {
                samples.push_back(r->effective_density);
            }
            std::vector<double> dens;
            try {
                dens = kde(samples, grid);
            } catch (const std::invalid_argument&) {
                dens = kde(samples, grid, 0.02);  // degenerate spread: fixed narrow kernel
            }
            for (int i = 0; i < kGrid; ++i) {
                kde_fig.rows.push_back({format_double_compact(size),
                                        fmt6(grid[static_cast<std::size_t>(i)]),
                                        fmt6(dens[static_cast<std::size_t>(i)])});
            }
        }
        figures.push_back(std::move(kde_fig));

        // absolute parameter counts: architecture total vs unpruned remainder
        FigureTable abs_fig;
        abs_fig.kind = "absolute";
        abs_fig.slug = key.slug();
        abs_fig.columns = {"size", "arch_total", "unpruned_mean", "unpruned_std"};
        for (const auto& [size, runs] : by_size) {
            const std::int64_t total = count_prunable_weights(runs.front()->spec);
            std::vector<double> unpruned;
            for (const RunRecord* r : runs) {
                unpruned.push_back(static_cast<double>(r->unpruned_count));
            }
            const double mean = std::accumulate(unpruned.begin(), unpruned.end(), 0.0) /
                                static_cast<double>(unpruned.size());
            double std_dev = 0.0;
            if (unpruned.size() >= 2) {
                double ss = 0.0;
                for (const double u : unpruned) {
                    ss += (u - mean) * (u - mean);
                }
                std_dev = std::sqrt(ss / static_cast<double>(unpruned.size() - 1));
            }
            abs_fig.rows.push_back({format_double_compact(size), std::to_string(total), fmt6(mean),
                                    fmt6(std_dev)});
        }
        figures.push_back(std::move(abs_fig));

        // Glorot vs He effective densities per size
        FigureTable init_fig;
        init_fig.kind = "init-compare";
        init_fig.slug = key.slug();
        init_fig.columns = {"size", "init_scheme", "mean", "std"};
        std::map<std::pair<double, std::string>, std::vector<double>> by_size_init;
        for (const RunRecord* r : group) {
            by_size_init[{r->spec.size, init_name(r->init)}].push_back(r->effective_density);
        }
        for (const auto& [si, values] : by_size_init) {
            const double mean = std::accumulate(values.begin(), values.end(), 0.0) /
                                static_cast<double>(values.size());
            double std_dev = 0.0;
            if (values.size() >= 2) {
                double ss = 0.0;
                for (const double v : values) {
                    ss += (v - mean) * (v - mean);
                }
                std_dev = std::sqrt(ss / static_cast<double>(values.size() - 1));
            }
            init_fig.rows.push_back(
                {format_double_compact(si.first), si.second, fmt6(mean), fmt6(std_dev)});
        }
        figures.push_back(std::move(init_fig));
    }
    return figures;
}

void write_figure_csv(const std::string& path, const FigureTable& figure) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("write_figure_csv: cannot open " + path);
    }
    for (std::size_t i = 0; i < figure.columns.size(); ++i) {
        out << (i ? "," : "") << figure.columns[i];
    }
    out << "\n";
    for (const auto& row : figure.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            out << (i ? "," : "") << row[i];
        }
        out << "\n";
    }
}

FigureTable read_figure_csv(const std::string& path, const std::string& kind,
                            const std::string& slug) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("read_figure_csv: cannot open " + path);
    }
    FigureTable figure;
    figure.kind = kind;
    figure.slug = slug;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            cells.push_back(cell);
        }
        if (header) {
            figure.columns = std::move(cells);
            header = false;
        } else {
            figure.rows.push_back(std::move(cells));
        }
    }
    return figure;
}

// ---------------------------------------------------------------------------
// SVG rendering
// ---------------------------------------------------------------------------

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 64.0, kRight = 24.0, kTop = 36.0, kBottom = 48.0;

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

std::string fmt2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string fmt_tick(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

class SvgCanvas {
public:
    SvgCanvas(const std::string& title) {
        body_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
              << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
        body_ << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight
              << "\" fill=\"white\"/>\n";
        text(kWidth / 2, 20, title, 14, "middle");
    }

    void line(double x1, double y1, double x2, double y2, const std::string& stroke,
              double width = 1.0) {
        body_ << "<line x1=\"" << fmt2(x1) << "\" y1=\"" << fmt2(y1) << "\" x2=\"" << fmt2(x2)
              << "\" y2=\"" << fmt2(y2) << "\" stroke=\"" << stroke << "\" stroke-width=\""
              << fmt2(width) << "\"/>\n";
    }

    void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke) {
        body_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : pts) {
            body_ << fmt2(x) << "," << fmt2(y) << " ";
        }
        body_ << "\"/>\n";
    }

    void polygon(const std::vector<std::pair<double, double>>& pts, const std::string& fill) {
        body_ << "<polygon fill=\"" << fill << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
        for (const auto& [x, y] : pts) {
            body_ << fmt2(x) << "," << fmt2(y) << " ";
        }
        body_ << "\"/>\n";
    }

    void rect(double x, double y, double w, double h, const std::string& fill) {
        body_ << "<rect x=\"" << fmt2(x) << "\" y=\"" << fmt2(y) << "\" width=\"" << fmt2(w)
              << "\" height=\"" << fmt2(h) << "\" fill=\"" << fill << "\"/>\n";
    }

    void circle(double x, double y, double r, const std::string& fill) {
        body_ << "<circle cx=\"" << fmt2(x) << "\" cy=\"" << fmt2(y) << "\" r=\"" << fmt2(r)
              << "\" fill=\"" << fill << "\"/>\n";
    }

    void text(double x, double y, const std::string& s, int size = 11,
              const std::string& anchor = "start") {
        body_ << "<text x=\"" << fmt2(x) << "\" y=\"" << fmt2(y) << "\" font-family=\"sans-serif\""
              << " font-size=\"" << size << "\" text-anchor=\"" << anchor << "\">" << s
              << "</text>\n";
    }

    std::string finish() {
        body_ << "</svg>\n";
        return body_.str();
    }

private:
    std::ostringstream body_;
};

struct Axes {
    double x_min, x_max, y_min, y_max;

    double px(double x) const {
        return kLeft + (x - x_min) / (x_max - x_min) * (kWidth - kLeft - kRight);
    }
    double py(double y) const {
        return kHeight - kBottom - (y - y_min) / (y_max - y_min) * (kHeight - kTop - kBottom);
    }

    void draw(SvgCanvas& svg, const std::string& x_label, const std::string& y_label) const {
        svg.line(kLeft, kHeight - kBottom, kWidth - kRight, kHeight - kBottom, "#333333");
        svg.line(kLeft, kTop, kLeft, kHeight - kBottom, "#333333");
        for (int i = 0; i <= 5; ++i) {
            const double fx = x_min + (x_max - x_min) * i / 5.0;
            const double fy = y_min + (y_max - y_min) * i / 5.0;
            svg.line(px(fx), kHeight - kBottom, px(fx), kHeight - kBottom + 4, "#333333");
            svg.text(px(fx), kHeight - kBottom + 16, fmt_tick(fx), 10, "middle");
            svg.line(kLeft - 4, py(fy), kLeft, py(fy), "#333333");
            svg.text(kLeft - 8, py(fy) + 3, fmt_tick(fy), 10, "end");
        }
        svg.text((kLeft + kWidth - kRight) / 2, kHeight - 12, x_label, 12, "middle");
        svg.text(14, kTop - 10, y_label, 12, "start");
    }
};

// ordered distinct values of a column, preserving first appearance
std::vector<std::string> distinct(const FigureTable& f, std::size_t col) {
    std::vector<std::string> out;
    for (const auto& row : f.rows) {
        if (std::find(out.begin(), out.end(), row[col]) == out.end()) {
            out.push_back(row[col]);
        }
    }
    return out;
}

std::string render_trajectory(const FigureTable& f) {
    SvgCanvas svg("pruning trajectories: " + f.slug);
    Axes axes{0.0, 1.0, 0.0, 1.0};
    axes.draw(svg, "density", "validation accuracy");
    const auto sizes = distinct(f, 0);
    for (std::size_t si = 0; si < sizes.size(); ++si) {
        const std::string color = kPalette[si % 6];
        std::vector<std::pair<double, double>> mean_pts;
        std::vector<std::pair<double, double>> upper, lower;
        bool has_band = false;
        for (const auto& row : f.rows) {
            if (row[0] != sizes[si]) {
                continue;
            }
            const double density = std::stod(row[2]);
            const double mean = std::stod(row[3]);
            const double sd = std::stod(row[4]);
            mean_pts.emplace_back(axes.px(density), axes.py(mean));
            upper.emplace_back(axes.px(density), axes.py(std::min(1.0, mean + sd)));
            lower.emplace_back(axes.px(density), axes.py(std::max(0.0, mean - sd)));
            if (sd > 0.0) {
                has_band = true;
            }
        }
        if (has_band) {
            std::vector<std::pair<double, double>> band = upper;
            band.insert(band.end(), lower.rbegin(), lower.rend());
            svg.polygon(band, color);
        }
        svg.polyline(mean_pts, color);
        svg.text(kWidth - kRight - 90, kTop + 16 + 14 * static_cast<double>(si),
                 "size " + sizes[si], 11);
        svg.rect(kWidth - kRight - 104, kTop + 9 + 14 * static_cast<double>(si), 10, 4, color);
    }
    return svg.finish();
}

std::string render_kde(const FigureTable& f) {
    double y_max = 0.0;
    for (const auto& row : f.rows) {
        y_max = std::max(y_max, std::stod(row[2]));
    }
    if (y_max <= 0.0) {
        y_max = 1.0;
    }
    SvgCanvas svg("effective density distribution: " + f.slug);
    Axes axes{0.0, 1.0, 0.0, y_max * 1.05};
    axes.draw(svg, "effective density", "frequency");
    const auto sizes = distinct(f, 0);
    for (std::size_t si = 0; si < sizes.size(); ++si) {
        const std::string color = kPalette[si % 6];
        std::vector<std::pair<double, double>> pts;
        for (const auto& row : f.rows) {
            if (row[0] != sizes[si]) {
                continue;
            }
            pts.emplace_back(axes.px(std::stod(row[1])), axes.py(std::stod(row[2])));
        }
        svg.polyline(pts, color);
        svg.text(kWidth - kRight - 90, kTop + 16 + 14 * static_cast<double>(si),
                 "size " + sizes[si], 11);
        svg.rect(kWidth - kRight - 104, kTop + 9 + 14 * static_cast<double>(si), 10, 4, color);
    }
    return svg.finish();
}

std::string render_absolute(const FigureTable& f) {
    double y_max = 0.0;
    for (const auto& row : f.rows) {
        y_max = std::max(y_max, std::stod(row[1]));
        y_max = std::max(y_max, std::stod(row[2]) + std::stod(row[3]));
    }
    SvgCanvas svg("absolute parameters, total vs unpruned: " + f.slug);
    Axes axes{0.0, static_cast<double>(f.rows.size()), 0.0, y_max * 1.05};
    axes.draw(svg, "size", "parameters");
    for (std::size_t i = 0; i < f.rows.size(); ++i) {
        const auto& row = f.rows[i];
        const double x0 = axes.px(static_cast<double>(i) + 0.15);
        const double x1 = axes.px(static_cast<double>(i) + 0.5);
        const double bw = (axes.px(0.35) - axes.px(0.0));
        const double total = std::stod(row[1]);
        const double mean = std::stod(row[2]);
        const double sd = std::stod(row[3]);
        svg.rect(x0, axes.py(total), bw, axes.py(0.0) - axes.py(total), "#bbbbbb");
        svg.rect(x1, axes.py(mean), bw, axes.py(0.0) - axes.py(mean), kPalette[i % 6]);
        const double cx = x1 + bw / 2.0;
        svg.line(cx, axes.py(mean - sd), cx, axes.py(mean + sd), "#333333");
        svg.line(cx - 3, axes.py(mean - sd), cx + 3, axes.py(mean - sd), "#333333");
        svg.line(cx - 3, axes.py(mean + sd), cx + 3, axes.py(mean + sd), "#333333");
        svg.text(axes.px(static_cast<double>(i) + 0.4), kHeight - kBottom + 28, row[0], 10,
                 "middle");
    }
    svg.text(kWidth - kRight - 150, kTop + 16, "arch total (grey) vs unpruned", 11);
    return svg.finish();
}

std::string render_init_compare(const FigureTable& f) {
    double y_max = 0.0;
    for (const auto& row : f.rows) {
        y_max = std::max(y_max, std::stod(row[2]) + std::stod(row[3]));
    }
    const auto sizes = distinct(f, 0);
    const auto schemes = distinct(f, 1);
    SvgCanvas svg("effective density by init scheme: " + f.slug);
    Axes axes{-0.5, static_cast<double>(sizes.size()) - 0.5, 0.0, std::max(1e-6, y_max * 1.1)};
    axes.draw(svg, "size", "effective density");
    for (std::size_t sc = 0; sc < schemes.size(); ++sc) {
        const std::string color = kPalette[sc % 6];
        std::vector<std::pair<double, double>> pts;
        for (std::size_t si = 0; si < sizes.size(); ++si) {
            for (const auto& row : f.rows) {
                if (row[0] != sizes[si] || row[1] != schemes[sc]) {
                    continue;
                }
                const double x = static_cast<double>(si) + 0.12 * static_cast<double>(sc);
                const double mean = std::stod(row[2]);
                const double sd = std::stod(row[3]);
                pts.emplace_back(axes.px(x), axes.py(mean));
                svg.circle(axes.px(x), axes.py(mean), 3, color);
                svg.line(axes.px(x), axes.py(mean - sd), axes.px(x), axes.py(mean + sd), color);
            }
        }
        svg.polyline(pts, color);
        svg.text(kWidth - kRight - 90, kTop + 16 + 14 * static_cast<double>(sc), schemes[sc], 11);
        svg.rect(kWidth - kRight - 104, kTop + 9 + 14 * static_cast<double>(sc), 10, 4, color);
    }
    for (std::size_t si = 0; si < sizes.size(); ++si) {
        svg.text(axes.px(static_cast<double>(si)), kHeight - kBottom + 28, sizes[si], 10, "middle");
    }
    return svg.finish();
}

}  // namespace

std::string render_figure_svg(const FigureTable& figure) {
    if (figure.kind == "trajectory") {
        return render_trajectory(figure);
    }
    if (figure.kind == "kde") {
        return render_kde(figure);
    }
    if (figure.kind == "absolute") {
        return render_absolute(figure);
    }
    if (figure.kind == "init-compare") {
        return render_init_compare(figure);
    }
    throw std::invalid_argument("render_figure_svg: unknown figure kind '" + figure.kind + "'");
}

std::vector<std::string> emit_report(const std::vector<RunRecord>& records,
                                     const std::string& output_dir) {
    if (records.empty()) {
        throw std::invalid_argument("emit_report: no records");
    }
    std::vector<std::string> files;
    const fs::path out(output_dir);
    fs::create_directories(out);

    const std::string stats_path = (out / "stats.json").string();
    write_stats_json(stats_path, records);
    files.push_back(stats_path);

    for (const FigureTable& figure : build_figures(records, output_dir)) {
        const std::string base = "fig_" + figure.kind + "_" + figure.slug;
        const std::string csv_path = (out / (base + ".csv")).string();
        const std::string svg_path = (out / (base + ".svg")).string();
        write_figure_csv(csv_path, figure);
        std::ofstream svg(svg_path, std::ios::binary);
        if (!svg) {
            throw std::runtime_error("emit_report: cannot open " + svg_path);
        }
        svg << render_figure_svg(figure);
        files.push_back(csv_path);
        files.push_back(svg_path);
    }
    return files;
}

}  // namespace densitometer
