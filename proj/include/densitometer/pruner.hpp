#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "densitometer/data_io.hpp"
#include "densitometer/model_zoo.hpp"
#include "densitometer/trainer.hpp"

namespace densitometer {

constexpr int kPruneCycles = 50;

struct TrajectoryPoint {
    int cycle = 0;
    double density = 1.0;  // unpruned_count / total prunable weights
    double val_accuracy = 0.0;
    double val_loss = 0.0;
    std::int64_t unpruned_count = 0;
};

// Per-cycle evaluation of a trained network under cumulative layer-wise
// magnitude pruning, with no parameter updates anywhere in the sweep.
struct PruneTrajectory {
    std::string run_id;
    std::vector<TrajectoryPoint> cycles;  // 51 points: baseline (cycle 0) + 50 cycles

    const TrajectoryPoint& baseline() const { return cycles.front(); }
};

struct EffectiveDensity {
    double fraction = 0.0;       // |remaining| / |total| at the first failing cycle
    double threshold_pp = 5.0;   // accuracy-drop threshold, percentage points
    std::int64_t unpruned_count = 0;
    int cycle = -1;              // first failing cycle; -1 if never degraded
};

// Cumulative per-layer quota: after cycle k, floor(k*N/50) of the layer's N
// original weights are masked. Cycle 50 masks everything.
std::int64_t prune_quota(std::int64_t layer_weight_count, int cycle);

// Mask the still-unmasked weights of smallest magnitude (ties to the lowest
// flat index) in every weight-bearing layer until the cycle-k quota is met.
// Biases and batchnorm parameters are untouched.
void prune_step(Network& net, int cycle);

// 51-record sweep: baseline at cycle 0, then one evaluation per pruning cycle.
// Works on a copy with fresh all-ones masks; the input network is not modified.
PruneTrajectory pruning_trajectory(const Network& trained, const Dataset& val_set,
                                   int eval_batch = 250);

// Density at the first cycle whose accuracy drops more than threshold_pp
// percentage points below baseline; zero if no cycle degrades that far.
EffectiveDensity effective_density(const PruneTrajectory& trajectory, double threshold_pp = 5.0);

// round(fraction * count_prunable_weights(spec))
std::int64_t absolute_unpruned(const EffectiveDensity& ed, const ModelSpec& spec);

void write_trajectory_csv(const std::string& path, const PruneTrajectory& trajectory);
PruneTrajectory read_trajectory_csv(const std::string& path);

}  // namespace densitometer
