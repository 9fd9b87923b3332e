#include "densitometer/run_grid.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include "densitometer/pruner.hpp"
#include "densitometer/sha256.hpp"

namespace densitometer {

namespace fs = std::filesystem;

ModelSpec spec_for(const ExperimentConfig& config, Family family, double size) {
    ModelSpec spec = default_spec(family, size);
    if (config.dataset == "synthetic") {
        if (family != Family::MLP) {
            throw std::invalid_argument(
                "synthetic grids support the MLP family only (conv families need image-shaped data)");
        }
        spec.input_shape = {config.synthetic_dim};
    }
    return spec;
}

std::string run_id_for(const ExperimentConfig& config, Family family, double size,
                       OptimizerKind optimizer, InitKind init, std::uint64_t init_seed,
                       std::uint64_t data_seed) {
    std::ostringstream coords;
    coords << "dataset=" << config.dataset;
    if (config.dataset == "synthetic") {
        coords << ";syn=" << config.synthetic_items << "x" << config.synthetic_dim << "x"
               << config.synthetic_classes;
    }
    coords << ";val_count=" << config.validation_count;
    coords << ";family=" << family_name(family);
    coords << ";size=" << format_double_compact(size);
    coords << ";optimizer=" << optimizer_name(optimizer);
    coords << ";init=" << init_name(init);
    coords << ";init_seed=" << init_seed;
    coords << ";data_seed=" << data_seed;
    coords << ";batch=" << config.batch_size;
    coords << ";threshold_pp=" << format_double_compact(config.threshold_pp);
    if (config.learning_rate.has_value()) {
        coords << ";lr=" << format_double_compact(*config.learning_rate);
    }
    if (config.rule.has_value()) {
        coords << (config.rule->kind == StoppingRule::Kind::loss_target
                       ? ";rule=loss_target:" + format_double_compact(config.rule->target)
                       : ";rule=val_min:" + std::to_string(config.rule->epoch_budget));
    }
    return sha256_hex(coords.str()).substr(0, 16);
}

namespace {

// Base dataset plus per-data-seed splits, loaded lazily and shared across
// workers. Datasets are immutable once constructed.
class SplitCache {
public:
    explicit SplitCache(const ExperimentConfig& config) : config_(config) {}

    std::shared_ptr<const std::pair<Dataset, Dataset>> get(std::uint64_t data_seed) {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = splits_.find(data_seed);
        if (it != splits_.end()) {
            return it->second;
        }
        if (!base_) {
            base_ = std::make_shared<Dataset>(load_base());
        }
        SplitSpec spec;
        spec.data_seed = data_seed;
        spec.validation_count = config_.validation_count;
        auto split = std::make_shared<std::pair<Dataset, Dataset>>(split_validation(*base_, spec));
        splits_.emplace(data_seed, split);
        return split;
    }

private:
    Dataset load_base() const {
        if (config_.dataset == "mnist") {
            return load_mnist(config_.data_dir).first;
        }
        if (config_.dataset == "cifar10") {
            return load_cifar10(config_.data_dir).first;
        }
        if (config_.dataset == "synthetic") {
            RngStream stream("synthetic-data", 0, 0);
            return synthetic_dataset(stream, config_.synthetic_items, {config_.synthetic_dim},
                                     config_.synthetic_classes);
        }
        throw std::invalid_argument("unknown dataset '" + config_.dataset + "'");
    }

    const ExperimentConfig& config_;
    std::mutex mu_;
    std::shared_ptr<Dataset> base_;
    std::map<std::uint64_t, std::shared_ptr<const std::pair<Dataset, Dataset>>> splits_;
};

struct Cell {
    Family family;
    double size;
    OptimizerKind optimizer;
    InitKind init;
    std::uint64_t init_seed;
    std::uint64_t data_seed;
    std::string run_id;
};

RunRecord execute_cell(const ExperimentConfig& config, const Cell& cell, SplitCache& cache,
                       bool* resumed) {
    const fs::path out_dir = fs::path(config.output_dir);
    const fs::path run_dir = out_dir / "runs" / cell.run_id;
    const fs::path record_path = run_dir / "record.json";
    if (fs::exists(record_path)) {
        *resumed = true;
        return load_record_json(record_path.string());
    }
    *resumed = false;
    fs::create_directories(run_dir);

    const ModelSpec spec = spec_for(config, cell.family, cell.size);
    const auto split = cache.get(cell.data_seed);
    const Dataset& train_set = split->first;
    const Dataset& val_set = split->second;

    RngStream init_stream("init", cell.init_seed, 0);
    Network net = build_model(spec, cell.init, init_stream);

    Recipe recipe;
    if (config.learning_rate.has_value() && config.rule.has_value()) {
        recipe = {*config.learning_rate, *config.rule};
    } else {
        recipe = default_recipe(cell.family, cell.optimizer, config.dataset_display());
        if (config.learning_rate.has_value()) {
            recipe.learning_rate = *config.learning_rate;
        }
        if (config.rule.has_value()) {
            recipe.rule = *config.rule;
        }
    }

    OptimizerState optimizer = OptimizerState::create(cell.optimizer, recipe.learning_rate, net);
    TrainOptions options;
    options.batch_size = config.batch_size;
    options.data_seed = cell.data_seed;
    options.checkpoint_dir = run_dir.string();

    CheckpointMeta meta;
    meta.spec = spec;
    meta.init = cell.init;
    meta.optimizer = cell.optimizer;

    auto [trained, history] =
        train(std::move(net), train_set, val_set, std::move(optimizer), recipe.rule, options, &meta);

    PruneTrajectory trajectory = pruning_trajectory(trained, val_set);
    trajectory.run_id = cell.run_id;
    const fs::path traj_path = run_dir / "trajectory.csv";
    write_trajectory_csv(traj_path.string(), trajectory);

    const EffectiveDensity ed = effective_density(trajectory, config.threshold_pp);

    RunRecord record;
    record.run_id = cell.run_id;
    record.spec = spec;
    record.dataset = config.dataset_display();
    record.optimizer = cell.optimizer;
    record.init = cell.init;
    record.init_seed = cell.init_seed;
    record.data_seed = cell.data_seed;
    record.stop_epoch = history.selected_epoch;
    record.baseline_val_accuracy = trajectory.baseline().val_accuracy;
    record.baseline_val_loss = trajectory.baseline().val_loss;
    record.effective_density = ed.fraction;
    record.unpruned_count = ed.unpruned_count;
    // paths are stored relative to the output dir so outputs are relocatable
    const std::string rel_run_dir = "runs/" + cell.run_id + "/";
    for (const auto& rec : history.epochs) {
        if (rec.epoch == history.selected_epoch && !rec.checkpoint_path.empty()) {
            record.checkpoint_path = rel_run_dir + fs::path(rec.checkpoint_path).filename().string();
        }
    }
    record.trajectory_path = rel_run_dir + "trajectory.csv";
    save_record_json(record_path.string(), record);
    return record;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"') {
            out += "\"\"";
        } else {
            out += c;
        }
    }
    out += "\"";
    return out;
}

}  // namespace

void sort_records(std::vector<RunRecord>& records) {
    std::sort(records.begin(), records.end(), [](const RunRecord& a, const RunRecord& b) {
        const auto key = [](const RunRecord& r) {
            return std::make_tuple(r.dataset, static_cast<int>(r.spec.family), r.spec.size,
                                   static_cast<int>(r.optimizer), static_cast<int>(r.init),
                                   r.init_seed, r.data_seed);
        };
        return key(a) < key(b);
    });
}

GridOutcome run_grid(const ExperimentConfig& config, int threads, std::ostream* log) {
    if (threads < 1) {
        threads = 1;
    }
    fs::create_directories(fs::path(config.output_dir) / "runs");

    std::vector<Cell> cells;
    for (const Family family : config.families) {
        for (const double size : config.sizes) {
            for (const OptimizerKind optimizer : config.optimizers) {
                for (const InitKind init : config.init_schemes) {
                    for (const std::uint64_t init_seed : config.init_seeds) {
                        for (const std::uint64_t data_seed : config.data_seeds) {
                            Cell cell{family, size, optimizer, init, init_seed, data_seed, ""};
                            cell.run_id = run_id_for(config, family, size, optimizer, init,
                                                     init_seed, data_seed);
                            cells.push_back(std::move(cell));
                        }
                    }
                }
            }
        }
    }

    SplitCache cache(config);
    std::vector<RunRecord> results(cells.size());
    std::vector<char> ok(cells.size(), 0);
    std::vector<std::string> errors(cells.size());
    std::atomic<std::size_t> next{0};
    std::atomic<int> executed{0};
    std::mutex log_mu;

    const auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) {
                return;
            }
            bool resumed = false;
            try {
                results[i] = execute_cell(config, cells[i], cache, &resumed);
                ok[i] = 1;
                if (!resumed) {
                    executed.fetch_add(1);
                }
                if (log) {
                    std::lock_guard<std::mutex> lock(log_mu);
                    *log << (resumed ? "resumed " : "trained ") << cells[i].run_id << " "
                         << family_name(cells[i].family) << " size "
                         << format_double_compact(cells[i].size) << " seeds ("
                         << cells[i].init_seed << "," << cells[i].data_seed
                         << ") ED=" << results[i].effective_density << "\n";
                }
            } catch (const std::exception& e) {
                errors[i] = e.what();
                if (log) {
                    std::lock_guard<std::mutex> lock(log_mu);
                    *log << "failed " << cells[i].run_id << ": " << e.what() << "\n";
                }
            }
        }
    };

    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) {
            t.join();
        }
    }

    GridOutcome outcome;
    outcome.executed = executed.load();
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (ok[i]) {
            outcome.records.push_back(std::move(results[i]));
        } else {
            outcome.errors.push_back({cells[i].run_id, errors[i]});
        }
    }
    sort_records(outcome.records);
    write_runs_csv((fs::path(config.output_dir) / "runs.csv").string(), outcome.records);
    if (!outcome.errors.empty()) {
        std::ofstream err((fs::path(config.output_dir) / "errors.csv").string(), std::ios::binary);
        err << "run_id,message\n";
        for (const auto& e : outcome.errors) {
            err << e.run_id << "," << csv_escape(e.message) << "\n";
        }
    }
    return outcome;
}

void write_runs_csv(const std::string& path, const std::vector<RunRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("write_runs_csv: cannot open " + path);
    }
    out << "run_id,dataset,family,size,optimizer,init_scheme,init_seed,data_seed,stop_epoch,"
           "baseline_val_accuracy,baseline_val_loss,effective_density,unpruned_count,"
           "checkpoint,trajectory\n";
    char line[512];
    for (const auto& r : records) {
        std::snprintf(line, sizeof(line), "%s,%s,%s,%s,%s,%s,%llu,%llu,%d,%.6f,%.6f,%.6f,%lld,%s,%s\n",
                      r.run_id.c_str(), r.dataset.c_str(), family_name(r.spec.family),
                      format_double_compact(r.spec.size).c_str(), optimizer_name(r.optimizer),
                      init_name(r.init), static_cast<unsigned long long>(r.init_seed),
                      static_cast<unsigned long long>(r.data_seed), r.stop_epoch,
                      r.baseline_val_accuracy, r.baseline_val_loss, r.effective_density,
                      static_cast<long long>(r.unpruned_count), r.checkpoint_path.c_str(),
                      r.trajectory_path.c_str());
        out << line;
    }
}

void save_record_json(const std::string& path, const RunRecord& record) {
    nlohmann::json j;
    j["run_id"] = record.run_id;
    j["dataset"] = record.dataset;
    j["model"] = {{"family", family_name(record.spec.family)},
                  {"size", record.spec.size},
                  {"input_shape", record.spec.input_shape},
                  {"class_count", record.spec.class_count}};
    j["optimizer"] = optimizer_name(record.optimizer);
    j["init_scheme"] = init_name(record.init);
    j["init_seed"] = record.init_seed;
    j["data_seed"] = record.data_seed;
    j["stop_epoch"] = record.stop_epoch;
    j["baseline_val_accuracy"] = record.baseline_val_accuracy;
    j["baseline_val_loss"] = record.baseline_val_loss;
    j["effective_density"] = record.effective_density;
    j["unpruned_count"] = record.unpruned_count;
    j["checkpoint"] = record.checkpoint_path;
    j["trajectory"] = record.trajectory_path;
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("save_record_json: cannot open " + path);
    }
    out << j.dump(2);
}

RunRecord load_record_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("load_record_json: cannot open " + path);
    }
    nlohmann::json j;
    in >> j;
    RunRecord r;
    r.run_id = j.at("run_id").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.spec.family = family_from_name(j.at("model").at("family").get<std::string>());
    r.spec.size = j.at("model").at("size").get<double>();
    r.spec.input_shape = j.at("model").at("input_shape").get<std::vector<int>>();
    r.spec.class_count = j.at("model").at("class_count").get<int>();
    r.optimizer = optimizer_from_name(j.at("optimizer").get<std::string>());
    r.init = init_from_name(j.at("init_scheme").get<std::string>());
    r.init_seed = j.at("init_seed").get<std::uint64_t>();
    r.data_seed = j.at("data_seed").get<std::uint64_t>();
    r.stop_epoch = j.at("stop_epoch").get<int>();
    r.baseline_val_accuracy = j.at("baseline_val_accuracy").get<double>();
    r.baseline_val_loss = j.at("baseline_val_loss").get<double>();
    r.effective_density = j.at("effective_density").get<double>();
    r.unpruned_count = j.at("unpruned_count").get<std::int64_t>();
    r.checkpoint_path = j.at("checkpoint").get<std::string>();
    r.trajectory_path = j.at("trajectory").get<std::string>();
    return r;
}

std::vector<RunRecord> load_run_records(const std::string& output_dir) {
    const fs::path csv = fs::path(output_dir) / "runs.csv";
    if (!fs::exists(csv)) {
        throw std::runtime_error("no runs.csv in " + output_dir +
                                 " (run the train or repro subcommand first)");
    }
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);  // header
    std::vector<RunRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const auto comma = line.find(',');
        const std::string run_id = line.substr(0, comma);
        records.push_back(
            load_record_json((fs::path(output_dir) / "runs" / run_id / "record.json").string()));
    }
    sort_records(records);
    return records;
}

}  // namespace densitometer
