#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "densitometer/model_zoo.hpp"
#include "densitometer/optimizer.hpp"
#include "densitometer/trainer.hpp"

namespace densitometer {

// Full experiment-grid description, parsed from a plain key=value file with
// [section] headers. See configs/ for annotated examples.
struct ExperimentConfig {
    // [data]
    std::string dataset = "mnist";  // mnist | cifar10 | synthetic
    std::string data_dir = "data/mnist";
    int validation_count = 5000;
    int synthetic_items = 3000;
    int synthetic_dim = 784;
    int synthetic_classes = 10;

    // [grid]
    std::vector<Family> families{Family::MLP};
    std::vector<double> sizes{0.1, 0.5, 1.0, 2.0};
    std::vector<OptimizerKind> optimizers{OptimizerKind::SGD};
    std::vector<InitKind> init_schemes{InitKind::Glorot};
    std::vector<std::uint64_t> init_seeds{0, 1, 2};
    std::vector<std::uint64_t> data_seeds{0, 1};

    // [train]
    int batch_size = 64;
    std::optional<double> learning_rate;   // bypasses default_recipe when set
    std::optional<StoppingRule> rule;      // ditto

    // [prune]
    double threshold_pp = 5.0;

    // [output]
    std::string output_dir = "out";

    // [fetch]
    std::string mnist_mirror = "https://ossci-datasets.s3.amazonaws.com/mnist";
    std::string cifar_mirror = "https://www.cs.toronto.edu/~kriz";
    std::map<std::string, std::string> checksums;  // filename -> sha256 (hex)

    // canonical dataset name as stored in Dataset::name / runs.csv
    std::string dataset_display() const;
};

ExperimentConfig parse_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);

// "0,1,2" or "0..4" (inclusive range)
std::vector<std::uint64_t> parse_seed_list(const std::string& text);
std::vector<double> parse_double_list(const std::string& text);

// Applies DENSITOMETER_DATA_DIR and DENSITOMETER_MIRROR when set.
void apply_env_overrides(ExperimentConfig& config);

std::string format_double_compact(double v);  // shortest %g form, stable

}  // namespace densitometer
