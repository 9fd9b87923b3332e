#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "densitometer/model_zoo.hpp"

using namespace densitometer;

TEST_CASE("scaled_width: round-half-up with floor 1") {
    CHECK(scaled_width(300, 0.1) == 30);
    CHECK(scaled_width(64, 1.0) == 64);
    CHECK(scaled_width(64, 0.1) == 6);
    CHECK(scaled_width(100, 0.005) == 1);  // floored
    CHECK(scaled_width(3, 0.5) == 2);      // 1.5 rounds half-up
    CHECK_THROWS(scaled_width(300, 0.0));
    CHECK_THROWS(scaled_width(300, -1.0));
}

TEST_CASE("build_model: MLP dims at sizes 1.0 and 0.1") {
    RngStream s1("init", 0, 0);
    const Network full = build_model(default_spec(Family::MLP, 1.0), InitKind::Glorot, s1);
    REQUIRE(full.layers.size() == 5);
    CHECK(full.layers[0].weights.shape == std::vector<int>{300, 784});
    CHECK(full.layers[2].weights.shape == std::vector<int>{100, 300});
    CHECK(full.layers[4].weights.shape == std::vector<int>{10, 100});

    RngStream s2("init", 0, 0);
    const Network small = build_model(default_spec(Family::MLP, 0.1), InitKind::Glorot, s2);
    CHECK(small.layers[0].weights.shape == std::vector<int>{30, 784});
    CHECK(small.layers[2].weights.shape == std::vector<int>{10, 30});
    CHECK(small.layers[4].weights.shape == std::vector<int>{10, 10});
}

TEST_CASE("build_model: Conv2 fc1 input is pooled spatial dims times filters") {
    RngStream s("init", 1, 0);
    const Network net = build_model(default_spec(Family::Conv2, 1.0), InitKind::Glorot, s);
    // conv1, relu, conv2, relu, pool, flatten, fc1, ...
    CHECK(net.layers[6].weights.shape == std::vector<int>{256, 16 * 16 * 64});
}

TEST_CASE("build_model: ResNetLite structure") {
    RngStream s("init", 2, 0);
    const Network net = build_model(default_spec(Family::ResNetLite, 1.0), InitKind::Glorot, s);
    // conv0,bn,relu + 3 blocks of (conv,bn,relu,conv,bn,add,relu) + gap + proj
    REQUIRE(net.layers.size() == 3 + 3 * 7 + 2);
    CHECK(net.layers[0].weights.shape == std::vector<int>{16, 3, 3, 3});
    int adds = 0;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const auto& l = net.layers[i];
        if (l.kind == LayerKind::residual_add) {
            ++adds;
            REQUIRE(l.skip_from >= 0);
            CHECK(net.layers[static_cast<std::size_t>(l.skip_from)].kind == LayerKind::relu);
        }
    }
    CHECK(adds == 3);
    CHECK(net.layers.back().weights.shape == std::vector<int>{10, 16});
}

TEST_CASE("count_prunable_weights: MLP column is exact for all listed sizes") {
    CHECK(count_prunable_weights(default_spec(Family::MLP, 0.1)) == 23920);
    CHECK(count_prunable_weights(default_spec(Family::MLP, 0.5)) == 125600);
    CHECK(count_prunable_weights(default_spec(Family::MLP, 1.0)) == 266200);
    CHECK(count_prunable_weights(default_spec(Family::MLP, 2.0)) == 592400);
    CHECK(count_prunable_weights(default_spec(Family::MLP, 5.0)) == 1931000);
    CHECK(1931000.0 / 23920.0 == doctest::Approx(80.73).epsilon(1e-3));
}

TEST_CASE("count_prunable_weights: agrees with built weight tensors") {
    for (const Family fam : {Family::MLP, Family::Conv2, Family::ResNetLite}) {
        for (const double size : {0.1, 0.37, 1.0}) {
            const ModelSpec spec = default_spec(fam, size);
            RngStream s("init", 0, 0);
            const Network net = build_model(spec, InitKind::He, s);
            std::int64_t built = 0;
            for (const auto& layer : net.layers) {
                built += layer.weights.numel();
            }
            CHECK(built == count_prunable_weights(spec));
        }
    }
}

TEST_CASE("init_bound: closed-form values") {
    CHECK(init_bound(InitKind::Glorot, 784, 300) == doctest::Approx(std::sqrt(6.0 / 1084.0)).epsilon(1e-12));
    CHECK(init_bound(InitKind::Glorot, 784, 300) == doctest::Approx(0.074399).epsilon(1e-4));
    CHECK(init_bound(InitKind::He, 784, 300) == doctest::Approx(std::sqrt(6.0 / 784.0)).epsilon(1e-12));
    CHECK(init_bound(InitKind::He, 784, 99999) == doctest::Approx(0.087482).epsilon(1e-4));
    CHECK(init_bound(InitKind::Glorot, 3, 3) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("init: conv fan-in is in_channels*k*k") {
    RngStream s("init", 4, 0);
    const Network net = build_model(default_spec(Family::Conv2, 1.0), InitKind::He, s);
    const double bound = std::sqrt(6.0 / 27.0);  // 3 channels * 3 * 3
    float max_abs = 0.0f;
    for (const float w : net.layers[0].weights.data) {
        max_abs = std::max(max_abs, std::abs(w));
    }
    CHECK(max_abs <= bound);
    CHECK(max_abs > 0.9 * bound);  // 576 samples should get close to the bound
}

TEST_CASE("init: samples respect bounds with variance near bound^2/3") {
    const ModelSpec spec = default_spec(Family::MLP, 1.0);
    RngStream s("init", 7, 0);
    const Network net = build_model(spec, InitKind::Glorot, s);
    const auto& w = net.layers[0].weights;  // 235,200 samples
    const double bound = init_bound(InitKind::Glorot, 784, 300);
    double sum = 0.0, sumsq = 0.0;
    for (const float v : w.data) {
        CHECK(std::abs(v) <= bound);
        sum += v;
        sumsq += static_cast<double>(v) * v;
    }
    const double n = static_cast<double>(w.numel());
    const double var = sumsq / n - (sum / n) * (sum / n);
    CHECK(var == doctest::Approx(bound * bound / 3.0).epsilon(0.05));
}

TEST_CASE("build_model: deterministic per stream key") {
    const ModelSpec spec = default_spec(Family::MLP, 0.1);
    RngStream s1("init", 42, 0);
    RngStream s2("init", 42, 0);
    const Network a = build_model(spec, InitKind::Glorot, s1);
    const Network b = build_model(spec, InitKind::Glorot, s2);
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        CHECK(a.layers[i].weights.data == b.layers[i].weights.data);
    }
}

TEST_CASE("family and init names round-trip") {
    for (const Family f : {Family::MLP, Family::Conv2, Family::ResNetLite}) {
        CHECK(family_from_name(family_name(f)) == f);
    }
    for (const InitKind k : {InitKind::Glorot, InitKind::He}) {
        CHECK(init_from_name(init_name(k)) == k);
    }
    CHECK_THROWS(family_from_name("VGG"));
    CHECK_THROWS(init_from_name("orthogonal"));
}
