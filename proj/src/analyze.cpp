#include "densitometer/analyze.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <tuple>

#include "densitometer/analysis.hpp"
#include "densitometer/checkpoint.hpp"
#include "densitometer/tsne.hpp"

namespace densitometer {

namespace fs = std::filesystem;

namespace {

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

Network load_trained(const ExperimentConfig& config, const RunRecord& record) {
    if (record.checkpoint_path.empty()) {
        throw std::runtime_error("run " + record.run_id + " has no checkpoint");
    }
    const fs::path path = fs::path(config.output_dir) / record.checkpoint_path;
    return load_checkpoint(path.string()).first;
}

// validation split for a given data seed, cached across runs
class ValCache {
public:
    explicit ValCache(const ExperimentConfig& config) : config_(config) {}

    const Dataset& get(std::uint64_t data_seed) {
        auto it = vals_.find(data_seed);
        if (it != vals_.end()) {
            return it->second;
        }
        if (!loaded_) {
            if (config_.dataset == "mnist") {
                base_ = load_mnist(config_.data_dir).first;
            } else if (config_.dataset == "cifar10") {
                base_ = load_cifar10(config_.data_dir).first;
            } else {
                RngStream stream("synthetic-data", 0, 0);
                base_ = synthetic_dataset(stream, config_.synthetic_items, {config_.synthetic_dim},
                                          config_.synthetic_classes);
            }
            loaded_ = true;
        }
        SplitSpec spec;
        spec.data_seed = data_seed;
        spec.validation_count = config_.validation_count;
        auto [train, val] = split_validation(base_, spec);
        return vals_.emplace(data_seed, std::move(val)).first->second;
    }

private:
    const ExperimentConfig& config_;
    bool loaded_ = false;
    Dataset base_;
    std::map<std::uint64_t, Dataset> vals_;
};

}  // namespace

std::vector<std::string> run_analysis(const ExperimentConfig& config,
                                      const std::vector<RunRecord>& records,
                                      const AnalyzeSelection& what, std::ostream& log) {
    if (records.empty()) {
        throw std::invalid_argument("run_analysis: no records");
    }
    std::vector<std::string> files;
    const fs::path out(config.output_dir);
    ValCache vals(config);

    if (what.overlap) {
        const std::string path = (out / "overlap.csv").string();
        std::ofstream csv(path, std::ios::binary);
        csv << "run_id,layer_name,overlap_pct,overlap_pct_subset\n";
        for (const RunRecord& record : records) {
            const Network trained = load_trained(config, record);
            RngStream init_stream("init", record.init_seed, 0);
            const Network init_net = build_model(record.spec, record.init, init_stream);
            const OverlapReport report = init_trained_overlap(init_net, trained, 0.4);
            for (const auto& layer : report.layers) {
                csv << record.run_id << "," << layer.layer << "," << fmt6(layer.overlap_pct) << ","
                    << fmt6(layer.overlap_pct_subset) << "\n";
            }
            log << "overlap " << record.run_id << " done\n";
        }
        files.push_back(path);
    }

    if (what.tsne) {
        const std::string path = (out / "embedding.csv").string();
        std::ofstream csv(path, std::ios::binary);
        csv << "run_id,x,y\n";
        // correctness vectors are comparable only within one validation split
        std::map<std::tuple<std::string, int, int, std::uint64_t>, std::vector<const RunRecord*>>
            groups;
        for (const RunRecord& record : records) {
            groups[{record.dataset, static_cast<int>(record.spec.family),
                    static_cast<int>(record.optimizer), record.data_seed}]
                .push_back(&record);
        }
        for (const auto& [key, members] : groups) {
            const int n = static_cast<int>(members.size());
            const double perplexity = std::min(30.0, std::floor((n - 1) / 3.0));
            if (n < 4 || perplexity < 2.0) {
                log << "tsne: skipping a group of " << n << " runs (too few for an embedding)\n";
                continue;
            }
            std::vector<std::vector<double>> vectors;
            for (const RunRecord* record : members) {
                Network net = load_trained(config, *record);
                const auto correct = correctness_vector(net, vals.get(record->data_seed));
                vectors.emplace_back(correct.begin(), correct.end());
            }
            TsneOptions options;
            options.perplexity = perplexity;
            RngStream stream("tsne", 0, std::get<3>(key));
            try {
                const TsneResult result = tsne(vectors, options, stream);
                for (int i = 0; i < n; ++i) {
                    csv << members[static_cast<std::size_t>(i)]->run_id << ","
                        << fmt6(result.embedding[2 * static_cast<std::size_t>(i)]) << ","
                        << fmt6(result.embedding[2 * static_cast<std::size_t>(i) + 1]) << "\n";
                }
                log << "tsne: embedded " << n << " runs (perplexity " << perplexity << ")\n";
            } catch (const std::invalid_argument& e) {
                // e.g. all runs classify the validation set identically
                log << "tsne: skipping a group of " << n << " runs: " << e.what() << "\n";
            }
        }
        files.push_back(path);
    }

    if (what.selectivity) {
        const std::string path = (out / "selectivity.csv").string();
        std::ofstream csv(path, std::ios::binary);
        csv << "run_id,layer,unit,hoyer,ccmas\n";
        for (const RunRecord& record : records) {
            Network net = load_trained(config, record);
            const auto profiles = unit_activation_profiles(net, vals.get(record.data_seed));
            for (const auto& profile : profiles) {
                const auto selectivity = class_selectivity(profile);
                for (std::size_t u = 0; u < selectivity.size(); ++u) {
                    csv << record.run_id << "," << profile.layer << "," << u << ","
                        << fmt6(profile.unit_hoyer(u)) << "," << fmt6(selectivity[u]) << "\n";
                }
            }
            log << "selectivity " << record.run_id << " done\n";
        }
        files.push_back(path);
    }

    return files;
}

}  // namespace densitometer
