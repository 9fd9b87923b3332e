#include "densitometer/pruner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace densitometer {

std::int64_t prune_quota(std::int64_t layer_weight_count, int cycle) {
    return layer_weight_count * cycle / kPruneCycles;
}

void prune_step(Network& net, int cycle) {
    if (cycle < 1 || cycle > kPruneCycles) {
        throw std::invalid_argument("prune_step: cycle must be in [1," +
                                    std::to_string(kPruneCycles) + "], got " + std::to_string(cycle));
    }
    for (auto& layer : net.layers) {
        if (!layer.has_weights()) {
            continue;
        }
        const std::int64_t n = layer.weights.numel();
        if (!layer.has_mask()) {
            layer.mask = Tensor(layer.weights.shape, 1.0f);
        }
        std::int64_t masked = 0;
        for (const float m : layer.mask.data) {
            if (m == 0.0f) {
                ++masked;
            }
        }
        const std::int64_t quota = prune_quota(n, cycle);
        const std::int64_t to_mask = quota - masked;
        if (to_mask <= 0) {
            continue;
        }
        // candidates: still-unmasked entries ordered by (|w|, flat index)
        std::vector<std::int64_t> candidates;
        candidates.reserve(static_cast<std::size_t>(n - masked));
        for (std::int64_t i = 0; i < n; ++i) {
            if (layer.mask[i] != 0.0f) {
                candidates.push_back(i);
            }
        }
        const auto smaller = [&](std::int64_t a, std::int64_t b) {
            const float ma = std::abs(layer.weights[a]);
            const float mb = std::abs(layer.weights[b]);
            return ma != mb ? ma < mb : a < b;
        };
        std::nth_element(candidates.begin(), candidates.begin() + (to_mask - 1), candidates.end(),
                         smaller);
        for (std::int64_t i = 0; i < to_mask; ++i) {
            layer.mask[candidates[static_cast<std::size_t>(i)]] = 0.0f;
        }
    }
}

PruneTrajectory pruning_trajectory(const Network& trained, const Dataset& val_set, int eval_batch) {
    Network net = trained;
    std::int64_t total = 0;
    for (auto& layer : net.layers) {
        if (layer.has_weights()) {
            layer.mask = Tensor(layer.weights.shape, 1.0f);
            total += layer.weights.numel();
        }
    }
    if (total == 0) {
        throw std::invalid_argument("pruning_trajectory: network has no prunable weights");
    }

    PruneTrajectory trajectory;
    trajectory.cycles.reserve(kPruneCycles + 1);
    for (int k = 0; k <= kPruneCycles; ++k) {
        if (k > 0) {
            prune_step(net, k);
        }
        std::int64_t masked = 0;
        for (const auto& layer : net.layers) {
            if (layer.has_weights()) {
                masked += prune_quota(layer.weights.numel(), k);
            }
        }
        const EvalResult eval = evaluate(net, val_set, eval_batch);
        TrajectoryPoint point;
        point.cycle = k;
        point.unpruned_count = total - masked;
        point.density = static_cast<double>(point.unpruned_count) / static_cast<double>(total);
        point.val_accuracy = eval.accuracy;
        point.val_loss = eval.mean_loss;
        trajectory.cycles.push_back(point);
    }
    return trajectory;
}

EffectiveDensity effective_density(const PruneTrajectory& trajectory, double threshold_pp) {
    if (trajectory.cycles.empty()) {
        throw std::invalid_argument("effective_density: empty trajectory");
    }
    const double baseline = trajectory.baseline().val_accuracy;
    const double cutoff = baseline - threshold_pp / 100.0;
    EffectiveDensity ed;
    ed.threshold_pp = threshold_pp;
    for (const auto& point : trajectory.cycles) {
        if (point.cycle == 0) {
            continue;
        }
        if (point.val_accuracy < cutoff) {
            ed.fraction = point.density;
            ed.unpruned_count = point.unpruned_count;
            ed.cycle = point.cycle;
            return ed;
        }
    }
    return ed;  // never degraded past the threshold
}

std::int64_t absolute_unpruned(const EffectiveDensity& ed, const ModelSpec& spec) {
    return std::llround(ed.fraction * static_cast<double>(count_prunable_weights(spec)));
}

void write_trajectory_csv(const std::string& path, const PruneTrajectory& trajectory) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("write_trajectory_csv: cannot open " + path);
    }
    out << "run_id,cycle,density,val_accuracy,val_loss\n";
    char line[256];
    for (const auto& p : trajectory.cycles) {
        std::snprintf(line, sizeof(line), "%s,%d,%.6f,%.6f,%.6f\n", trajectory.run_id.c_str(),
                      p.cycle, p.density, p.val_accuracy, p.val_loss);
        out << line;
    }
}

PruneTrajectory read_trajectory_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("read_trajectory_csv: cannot open " + path);
    }
    PruneTrajectory trajectory;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::stringstream ss(line);
        std::string field;
        TrajectoryPoint p;
        std::getline(ss, field, ',');
        trajectory.run_id = field;
        std::getline(ss, field, ',');
        p.cycle = std::stoi(field);
        std::getline(ss, field, ',');
        p.density = std::stod(field);
        std::getline(ss, field, ',');
        p.val_accuracy = std::stod(field);
        std::getline(ss, field, ',');
        p.val_loss = std::stod(field);
        trajectory.cycles.push_back(p);
    }
    return trajectory;
}

}  // namespace densitometer
