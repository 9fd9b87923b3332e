#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>

#include "densitometer/analyze.hpp"
#include "densitometer/fetch.hpp"
#include "densitometer/pruner.hpp"
#include "densitometer/report.hpp"
#include "densitometer/run_grid.hpp"

using namespace densitometer;

namespace {

struct CliOptions {
    std::string config_path;
    std::string out_dir;
    std::string data_dir;
    std::string dataset;
    std::string seeds;
    std::string sizes;
    std::string threshold;
    int threads = 1;
    std::string analyze_what = "overlap,tsne,selectivity";
};

ExperimentConfig effective_config(const CliOptions& options) {
    ExperimentConfig config =
        options.config_path.empty() ? ExperimentConfig{} : parse_config_file(options.config_path);
    apply_env_overrides(config);
    if (!options.out_dir.empty()) {
        config.output_dir = options.out_dir;
    }
    if (!options.data_dir.empty()) {
        config.data_dir = options.data_dir;
    }
    if (!options.dataset.empty()) {
        config.dataset = options.dataset;
        config.dataset_display();  // validate
    }
    if (!options.seeds.empty()) {
        config.init_seeds = parse_seed_list(options.seeds);
    }
    if (!options.sizes.empty()) {
        config.sizes = parse_double_list(options.sizes);
    }
    if (!options.threshold.empty()) {
        config.threshold_pp = std::stod(options.threshold);
    }
    return config;
}

void ensure_data(const ExperimentConfig& config, bool allow_fetch) {
    if (dataset_present(config)) {
        return;
    }
    if (!allow_fetch) {
        throw std::runtime_error("dataset '" + config.dataset + "' not found under " +
                                 config.data_dir +
                                 " (run the fetch-data subcommand or set DENSITOMETER_DATA_DIR)");
    }
    fetch_dataset(config, std::cout);
}

int do_train(const ExperimentConfig& config, int threads) {
    const GridOutcome outcome = run_grid(config, threads, &std::cout);
    std::cout << "grid complete: " << outcome.records.size() << " runs ("
              << outcome.executed << " newly trained), " << outcome.errors.size() << " failed\n";
    std::cout << "wrote " << (std::filesystem::path(config.output_dir) / "runs.csv").string() << "\n";
    return outcome.records.empty() ? 2 : 0;
}

int do_prune(const ExperimentConfig& config) {
    namespace fs = std::filesystem;
    auto records = load_run_records(config.output_dir);
    for (RunRecord& record : records) {
        PruneTrajectory trajectory =
            read_trajectory_csv((fs::path(config.output_dir) / record.trajectory_path).string());
        // per-cycle counts are a pure function of the architecture's quotas,
        // so recompute them exactly instead of trusting rounded CSV densities
        const auto layer_counts = prunable_layer_counts(record.spec);
        const std::int64_t total = count_prunable_weights(record.spec);
        for (auto& point : trajectory.cycles) {
            std::int64_t masked = 0;
            for (const std::int64_t n : layer_counts) {
                masked += prune_quota(n, point.cycle);
            }
            point.unpruned_count = total - masked;
            point.density = static_cast<double>(point.unpruned_count) / static_cast<double>(total);
        }
        const EffectiveDensity ed = effective_density(trajectory, config.threshold_pp);
        record.effective_density = ed.fraction;
        record.unpruned_count = ed.unpruned_count;
        save_record_json(
            (fs::path(config.output_dir) / "runs" / record.run_id / "record.json").string(), record);
    }
    write_runs_csv((fs::path(config.output_dir) / "runs.csv").string(), records);
    std::cout << "recomputed effective densities at threshold " << config.threshold_pp
              << "pp for " << records.size() << " runs\n";
    return 0;
}

int do_stats(const ExperimentConfig& config) {
    const auto records = load_run_records(config.output_dir);
    const std::string path =
        (std::filesystem::path(config.output_dir) / "stats.json").string();
    write_stats_json(path, records);
    std::cout << "wrote " << path << "\n";
    return 0;
}

int do_report(const ExperimentConfig& config) {
    const auto records = load_run_records(config.output_dir);
    for (const std::string& file : emit_report(records, config.output_dir)) {
        std::cout << "wrote " << file << "\n";
    }
    return 0;
}

int do_analyze(const ExperimentConfig& config, const std::string& what) {
    AnalyzeSelection selection{false, false, false};
    std::stringstream ss(what);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "overlap") {
            selection.overlap = true;
        } else if (item == "tsne") {
            selection.tsne = true;
        } else if (item == "selectivity") {
            selection.selectivity = true;
        } else if (!item.empty()) {
            throw CLI::ValidationError("--what", "unknown analysis '" + item + "'");
        }
    }
    const auto records = load_run_records(config.output_dir);
    for (const std::string& file : run_analysis(config, records, selection, std::cout)) {
        std::cout << "wrote " << file << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"trains width-scaled feed-forward networks, prunes them by weight magnitude "
                 "without retraining, and measures how effective density varies with width"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    CliOptions options;
    app.add_option("--config", options.config_path, "experiment config file (key=value sections)");
    app.add_option("--out", options.out_dir, "output directory (overrides config)");
    app.add_option("--data", options.data_dir, "dataset directory (overrides config)");
    app.add_option("--threads", options.threads, "worker threads for grid execution")
        ->check(CLI::PositiveNumber);
    app.add_option("--seeds", options.seeds, "init seeds, e.g. 0,1,2 or 0..9 (overrides config)");
    app.add_option("--sizes", options.sizes, "width factors, e.g. 0.1,0.5,1 (overrides config)");
    app.add_option("--threshold", options.threshold, "accuracy-drop threshold in percentage points");

    auto* fetch_cmd = app.add_subcommand("fetch-data", "download the configured dataset and verify checksums");
    fetch_cmd->add_option("--dataset", options.dataset, "mnist | cifar10");
    auto* train_cmd = app.add_subcommand("train", "run the experiment grid: train, prune, measure");
    auto* prune_cmd = app.add_subcommand("prune", "recompute effective densities from stored trajectories");
    auto* analyze_cmd = app.add_subcommand("analyze", "overlap / t-SNE / selectivity probes over completed runs");
    analyze_cmd->add_option("--what", options.analyze_what, "comma list of overlap,tsne,selectivity");
    auto* stats_cmd = app.add_subcommand("stats", "write stats.json for a completed grid");
    auto* report_cmd = app.add_subcommand("report", "write stats.json and all figures (SVG + sibling CSVs)");
    auto* repro_cmd = app.add_subcommand("repro", "full pipeline: fetch if needed, grid, stats, report, analyze");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        const ExperimentConfig config = effective_config(options);
        if (fetch_cmd->parsed()) {
            fetch_dataset(config, std::cout);
            return 0;
        }
        if (train_cmd->parsed()) {
            ensure_data(config, false);
            return do_train(config, options.threads);
        }
        if (prune_cmd->parsed()) {
            return do_prune(config);
        }
        if (analyze_cmd->parsed()) {
            return do_analyze(config, options.analyze_what);
        }
        if (stats_cmd->parsed()) {
            return do_stats(config);
        }
        if (report_cmd->parsed()) {
            return do_report(config);
        }
        if (repro_cmd->parsed()) {
            ensure_data(config, true);
            const int rc = do_train(config, options.threads);
            if (rc != 0) {
                return rc;
            }
            do_report(config);
            const auto records = load_run_records(config.output_dir);
            run_analysis(config, records, AnalyzeSelection{}, std::cout);
            return 0;
        }
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
