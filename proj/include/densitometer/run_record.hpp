#pragma once

#include <cstdint>
#include <string>

#include "densitometer/model_zoo.hpp"
#include "densitometer/optimizer.hpp"

namespace densitometer {

// One completed experiment cell: the coordinates that identify it plus the
// derived metrics and artifact paths.
struct RunRecord {
    std::string run_id;  // content hash of the coordinates
    ModelSpec spec;
    std::string dataset;  // MNIST | CIFAR10 | synthetic
    OptimizerKind optimizer = OptimizerKind::SGD;
    InitKind init = InitKind::Glorot;
    std::uint64_t init_seed = 0;
    std::uint64_t data_seed = 0;

    int stop_epoch = 0;
    double baseline_val_accuracy = 0.0;
    double baseline_val_loss = 0.0;
    double effective_density = 0.0;
    std::int64_t unpruned_count = 0;
    std::string checkpoint_path;
    std::string trajectory_path;
};

}  // namespace densitometer
