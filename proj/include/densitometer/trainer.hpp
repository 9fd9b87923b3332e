#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "densitometer/data_io.hpp"
#include "densitometer/model_zoo.hpp"
#include "densitometer/optimizer.hpp"

namespace densitometer {

// When to stop. loss_target stops at the first epoch whose mean training loss
// reaches the target; fixed_epochs_then_val_min trains the full budget and
// selects the epoch with minimum validation loss retrospectively.
struct StoppingRule {
    enum class Kind { loss_target, fixed_epochs_then_val_min };
    Kind kind = Kind::loss_target;
    double target = 0.2;
    int epoch_budget = 0;
    int guard_epochs = 1000;  // loss_target: abort if the target is never reached

    static StoppingRule loss_target(double target) {
        return {Kind::loss_target, target, 0, 1000};
    }
    static StoppingRule val_min(int epochs) {
        return {Kind::fixed_epochs_then_val_min, 0.0, epochs, 0};
    }
};

struct EpochRecord {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
    std::string checkpoint_path;  // empty when checkpoints stay in memory
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    int selected_epoch = 0;
};

struct TrainOptions {
    int batch_size = 64;
    std::uint64_t data_seed = 0;  // keys the per-epoch shuffle streams
    std::string checkpoint_dir;   // when set, one checkpoint file per epoch,
                                  // pruned to {selected, final} afterwards
    int eval_batch = 250;
};

struct EvalResult {
    double accuracy = 0.0;
    double mean_loss = 0.0;
};

// Eval-mode accuracy (argmax ties to the lowest class index) and mean loss.
EvalResult evaluate(Network& net, const Dataset& data, int eval_batch = 250);

// Context needed to stamp checkpoint files; optional.
struct CheckpointMeta {
    ModelSpec spec;
    InitKind init = InitKind::Glorot;
    OptimizerKind optimizer = OptimizerKind::SGD;
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
};

// Optimize `net` on the training set under the stopping rule, returning the
// network at the selected epoch and the full per-epoch history.
std::pair<Network, TrainHistory> train(Network net, const Dataset& train_set, const Dataset& val_set,
                                       OptimizerState optimizer, const StoppingRule& rule,
                                       const TrainOptions& options,
                                       const CheckpointMeta* meta = nullptr);

struct Recipe {
    double learning_rate = 0.0;
    StoppingRule rule;
};

// The trained combinations and their hyperparameters; anything else throws.
Recipe default_recipe(Family family, OptimizerKind optimizer, const std::string& dataset_name);

}  // namespace densitometer
