#pragma once

#include <string>
#include <vector>

#include "densitometer/run_record.hpp"
#include "densitometer/stats.hpp"

namespace densitometer {

// Per-(dataset, family, optimizer) statistics for stats.json.
struct SizeStats {
    double size = 0.0;
    int n = 0;
    double observed_mean = 0.0;
    double observed_std = 0.0;
    bool has_null = false;           // seed-matched 1x counterparts existed
    double null_mean = 0.0;
    double null_std = 0.0;
    bool has_t = false;
    TestResult t_vs_null;
};

struct GroupStats {
    std::string dataset;
    Family family = Family::MLP;
    OptimizerKind optimizer = OptimizerKind::SGD;
    InitKind init = InitKind::Glorot;
    bool has_anova = false;
    TestResult anova;
    std::vector<SizeStats> sizes;
};

std::vector<GroupStats> compute_group_stats(const std::vector<RunRecord>& records);
void write_stats_json(const std::string& path, const std::vector<RunRecord>& records);

// A figure is a table of preformatted cells: the sibling CSV is exactly these
// cells, and the SVG is rendered from them, so parsing the CSV back always
// regenerates the identical SVG.
struct FigureTable {
    std::string kind;  // trajectory | kde | absolute | init-compare
    std::string slug;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

std::vector<FigureTable> build_figures(const std::vector<RunRecord>& records,
                                       const std::string& output_dir);

std::string render_figure_svg(const FigureTable& figure);

void write_figure_csv(const std::string& path, const FigureTable& figure);
FigureTable read_figure_csv(const std::string& path, const std::string& kind,
                            const std::string& slug);

// stats.json + every figure (SVG with sibling CSV); returns the file paths.
std::vector<std::string> emit_report(const std::vector<RunRecord>& records,
                                     const std::string& output_dir);

}  // namespace densitometer
