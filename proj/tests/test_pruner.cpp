#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "densitometer/data_io.hpp"
#include "densitometer/pruner.hpp"

using namespace densitometer;

namespace {

Network dense_net(std::vector<float> weights, int n_in, int n_out) {
    Network net;
    net.input_shape = {n_in};
    LayerState fc;
    fc.kind = LayerKind::dense;
    fc.name = "fc";
    fc.weights = Tensor({n_out, n_in}, std::move(weights));
    fc.bias = Tensor({n_out});
    net.layers.push_back(fc);
    return net;
}

std::int64_t masked_count(const LayerState& layer) {
    std::int64_t n = 0;
    for (const float m : layer.mask.data) {
        if (m == 0.0f) {
            ++n;
        }
    }
    return n;
}

// synthetic trajectory with a prescribed accuracy curve
PruneTrajectory fake_trajectory(const std::vector<double>& accuracies, std::int64_t total = 1000) {
    PruneTrajectory t;
    for (int k = 0; k < static_cast<int>(accuracies.size()); ++k) {
        TrajectoryPoint p;
        p.cycle = k;
        p.unpruned_count = total - prune_quota(total, k);
        p.density = static_cast<double>(p.unpruned_count) / static_cast<double>(total);
        p.val_accuracy = accuracies[static_cast<std::size_t>(k)];
        p.val_loss = 1.0 - accuracies[static_cast<std::size_t>(k)];
        t.cycles.push_back(p);
    }
    return t;
}

}  // namespace

TEST_CASE("prune_quota: floor(k*N/50)") {
    CHECK(prune_quota(100, 1) == 2);
    CHECK(prune_quota(100, 50) == 100);
    CHECK(prune_quota(5, 10) == 1);
    CHECK(prune_quota(5, 9) == 0);
    CHECK(prune_quota(266200, 25) == 133100);
}

TEST_CASE("prune_step: layer quota and smallest-magnitude selection") {
    // N=100: cycle 1 masks the two smallest |w|
    std::vector<float> w(100);
    for (int i = 0; i < 100; ++i) {
        w[static_cast<std::size_t>(i)] = static_cast<float>(100 - i);  // values 100..1
    }
    Network net = dense_net(w, 10, 10);
    prune_step(net, 1);
    const auto& layer = net.layers[0];
    CHECK(masked_count(layer) == 2);
    CHECK(layer.mask[99] == 0.0f);  // |w| = 1
    CHECK(layer.mask[98] == 0.0f);  // |w| = 2
    CHECK(layer.mask[0] == 1.0f);
}

TEST_CASE("prune_step: cycle 50 empties every layer") {
    RngStream s("init", 1, 0);
    ModelSpec spec = default_spec(Family::MLP, 0.05);
    spec.input_shape = {12};
    Network net = build_model(spec, InitKind::Glorot, s);
    for (int k = 1; k <= 50; ++k) {
        prune_step(net, k);
    }
    for (const auto& layer : net.layers) {
        if (!layer.has_weights()) {
            continue;
        }
        CHECK(masked_count(layer) == layer.weights.numel());
    }
}

TEST_CASE("prune_step: magnitude ties break to the lowest flat index") {
    // N=5: first nonzero quota at k=10 (floor(10*5/50)=1)
    Network net = dense_net({0.1f, 0.1f, 0.2f, 0.3f, 0.4f}, 5, 1);
    for (int k = 1; k <= 10; ++k) {
        prune_step(net, k);
    }
    const auto& layer = net.layers[0];
    CHECK(masked_count(layer) == 1);
    CHECK(layer.mask[0] == 0.0f);  // tie with index 1 broken by index
    CHECK(layer.mask[1] == 1.0f);
}

TEST_CASE("prune_step: cycle out of range raises") {
    Network net = dense_net({1.0f, 2.0f}, 2, 1);
    CHECK_THROWS(prune_step(net, 0));
    CHECK_THROWS(prune_step(net, 51));
    CHECK_THROWS(prune_step(net, -3));
}

TEST_CASE("prune_step: biases and batchnorm parameters untouched") {
    ModelSpec spec = default_spec(Family::ResNetLite, 0.2);
    spec.input_shape = {3, 4, 4};
    RngStream s("init", 5, 0);
    Network net = build_model(spec, InitKind::Glorot, s);
    for (auto& layer : net.layers) {
        if (!layer.bias.data.empty()) {
            layer.bias.fill(0.25f);
        }
    }
    prune_step(net, 50);
    for (const auto& layer : net.layers) {
        for (const float b : layer.bias.data) {
            CHECK(b == 0.25f);
        }
        for (const float g : layer.bn_gamma.data) {
            CHECK(g == 1.0f);
        }
        if (layer.has_weights()) {
            CHECK(masked_count(layer) == layer.weights.numel());
        }
    }
}

TEST_CASE("pruning_trajectory: quota exactness, monotone masks, frozen weights") {
    RngStream s("init", 7, 0);
    ModelSpec spec = default_spec(Family::MLP, 0.1);
    spec.input_shape = {20};
    Network net = build_model(spec, InitKind::Glorot, s);

    RngStream ds("synth", 7, 0);
    const Dataset val = synthetic_dataset(ds, 60, {20}, 10);

    // replicate the sweep manually to observe masks cycle by cycle
    Network sweep = net;
    std::int64_t total = 0;
    for (auto& layer : sweep.layers) {
        if (layer.has_weights()) {
            layer.mask = Tensor(layer.weights.shape, 1.0f);
            total += layer.weights.numel();
        }
    }
    std::vector<Tensor> prev_masks;
    for (int k = 1; k <= 50; ++k) {
        prev_masks.clear();
        for (const auto& layer : sweep.layers) {
            prev_masks.push_back(layer.mask);
        }
        prune_step(sweep, k);
        for (std::size_t li = 0; li < sweep.layers.size(); ++li) {
            const auto& layer = sweep.layers[li];
            if (!layer.has_weights()) {
                continue;
            }
            CHECK(masked_count(layer) == prune_quota(layer.weights.numel(), k));
            // monotone: once pruned, always pruned
            for (std::int64_t i = 0; i < layer.mask.numel(); ++i) {
                CHECK(layer.mask[i] <= prev_masks[li][i]);
            }
            // unmasked weights bit-identical to the trained weights
            for (std::int64_t i = 0; i < layer.weights.numel(); ++i) {
                CHECK(layer.weights[i] == net.layers[li].weights[i]);
            }
        }
    }

    const PruneTrajectory trajectory = pruning_trajectory(net, val);
    REQUIRE(trajectory.cycles.size() == 51);
    CHECK(trajectory.cycles.front().cycle == 0);
    CHECK(trajectory.cycles.front().density == 1.0);
    CHECK(trajectory.cycles.back().unpruned_count == 0);
    CHECK(trajectory.cycles.back().density == 0.0);
    for (std::size_t i = 1; i < trajectory.cycles.size(); ++i) {
        CHECK(trajectory.cycles[i].density <= trajectory.cycles[i - 1].density);
    }
    // density at cycle k follows the quota formula
    for (const auto& p : trajectory.cycles) {
        std::int64_t masked = 0;
        for (const auto& layer : net.layers) {
            if (layer.has_weights()) {
                masked += prune_quota(layer.weights.numel(), p.cycle);
            }
        }
        CHECK(p.unpruned_count == total - masked);
        CHECK(p.density == doctest::Approx(1.0 - static_cast<double>(masked) / total).epsilon(1e-12));
    }
}

TEST_CASE("pruning_trajectory: all-equal weights degrade to chance by cycle 50") {
    Network net;
    net.input_shape = {8};
    LayerState fc;
    fc.kind = LayerKind::dense;
    fc.name = "fc";
    fc.weights = Tensor({10, 8}, 0.5f);
    fc.bias = Tensor({10});
    net.layers.push_back(fc);

    RngStream ds("synth", 9, 0);
    Dataset val = synthetic_dataset(ds, 100, {8}, 10);
    const PruneTrajectory trajectory = pruning_trajectory(net, val);
    // empty net predicts class 0; labels cycle so exactly 10% are class 0
    CHECK(trajectory.cycles.back().val_accuracy == doctest::Approx(0.1));
}

TEST_CASE("effective_density: first threshold crossing") {
    std::vector<double> acc(51, 0.97);
    for (int k = 31; k <= 50; ++k) {
        acc[static_cast<std::size_t>(k)] = 0.915;  // first drop below 0.92 at cycle 31
    }
    const PruneTrajectory t = fake_trajectory(acc);
    const EffectiveDensity ed = effective_density(t, 5.0);
    CHECK(ed.cycle == 31);
    CHECK(ed.fraction == doctest::Approx(1.0 - 31.0 * 0.02).epsilon(1e-12));

    // degradation already at cycle 1
    std::vector<double> acc2(51, 0.5);
    acc2[0] = 0.97;
    const EffectiveDensity ed2 = effective_density(fake_trajectory(acc2), 5.0);
    CHECK(ed2.cycle == 1);
    CHECK(ed2.fraction == doctest::Approx(0.98).epsilon(1e-12));

    // no degradation anywhere -> 0
    const EffectiveDensity ed3 = effective_density(fake_trajectory(std::vector<double>(51, 0.9)), 5.0);
    CHECK(ed3.fraction == 0.0);
    CHECK(ed3.cycle == -1);

    CHECK_THROWS(effective_density(PruneTrajectory{}, 5.0));
}

TEST_CASE("effective_density: monotone in the threshold") {
    RngStream s("traj", 1, 0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> acc(51);
        acc[0] = 0.6 + 0.4 * s.next_double();
        for (int k = 1; k <= 50; ++k) {
            // random non-increasing-ish curve with noise
            acc[static_cast<std::size_t>(k)] =
                std::max(0.0, acc[static_cast<std::size_t>(k - 1)] - 0.05 * s.next_double() +
                                  0.01 * s.next_double());
        }
        const PruneTrajectory t = fake_trajectory(acc);
        const EffectiveDensity e5 = effective_density(t, 5.0);
        const EffectiveDensity e10 = effective_density(t, 10.0);
        CHECK(e5.fraction >= e10.fraction);
    }
}

TEST_CASE("absolute_unpruned: spec anchor values") {
    EffectiveDensity ed;
    ed.fraction = 0.433;
    CHECK(absolute_unpruned(ed, default_spec(Family::MLP, 1.0)) == 115265);
    ed.fraction = 1.0;
    CHECK(absolute_unpruned(ed, default_spec(Family::MLP, 0.1)) == 23920);
    ed.fraction = 0.322;
    const std::int64_t big = absolute_unpruned(ed, default_spec(Family::MLP, 5.0));
    CHECK(big == 621782);
    CHECK(big > 266200);  // pruned 5x is bigger than the unpruned 1x
}

TEST_CASE("trajectory csv: write/read round-trip") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "densitometer_test_traj";
    fs::create_directories(dir);
    const std::string path = (dir / "trajectory.csv").string();

    PruneTrajectory t = fake_trajectory({0.9, 0.85, 0.2});
    t.run_id = "abc123";
    write_trajectory_csv(path, t);
    const PruneTrajectory r = read_trajectory_csv(path);
    CHECK(r.run_id == "abc123");
    REQUIRE(r.cycles.size() == 3);
    CHECK(r.cycles[1].val_accuracy == doctest::Approx(0.85).epsilon(1e-9));
    CHECK(r.cycles[2].cycle == 2);
    fs::remove_all(dir);
}
