#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "densitometer/analysis.hpp"
#include "densitometer/data_io.hpp"
#include "densitometer/model_zoo.hpp"
#include "densitometer/trainer.hpp"
#include "densitometer/tsne.hpp"

using namespace densitometer;

TEST_CASE("bottom_q_mask: marks floor(q*N) smallest magnitudes") {
    const Tensor w({5}, {{5.0f, 1.0f, 4.0f, 2.0f, 3.0f}});
    const Tensor mask = bottom_q_mask(w, 0.4);
    CHECK(mask.data == std::vector<float>{0, 1, 0, 1, 0});

    // exactly 2 marks regardless of values
    const Tensor w2({5}, {{-9.0f, 9.0f, -9.0f, 9.0f, 0.5f}});
    const Tensor mask2 = bottom_q_mask(w2, 0.4);
    int marks = 0;
    for (const float m : mask2.data) {
        marks += m != 0.0f ? 1 : 0;
    }
    CHECK(marks == 2);

    // all-equal weights: lowest flat indices win
    const Tensor w3({5}, 1.0f);
    const Tensor mask3 = bottom_q_mask(w3, 0.4);
    CHECK(mask3.data == std::vector<float>{1, 1, 0, 0, 0});

    CHECK_THROWS(bottom_q_mask(w, 0.0));
    CHECK_THROWS(bottom_q_mask(w, 1.0));
}

TEST_CASE("init_trained_overlap: identity, reversal, and error cases") {
    ModelSpec spec = default_spec(Family::MLP, 0.1);
    spec.input_shape = {20};
    RngStream s("init", 1, 0);
    const Network init_net = build_model(spec, InitKind::Glorot, s);

    // trained == init: overlap is the full 40%
    const OverlapReport same = init_trained_overlap(init_net, init_net, 0.4);
    REQUIRE(same.layers.size() == 3);
    for (const auto& l : same.layers) {
        CHECK(l.overlap_pct == doctest::Approx(40.0).epsilon(2e-3));
        CHECK(l.overlap_pct_subset == doctest::Approx(100.0));
    }

    // reversed magnitude ranking: bottom-q sets are disjoint for q = 0.4
    Network reversed = init_net;
    for (auto& layer : reversed.layers) {
        if (!layer.has_weights()) {
            continue;
        }
        std::vector<std::int64_t> order(static_cast<std::size_t>(layer.weights.numel()));
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
            const float ma = std::abs(layer.weights[a]);
            const float mb = std::abs(layer.weights[b]);
            return ma != mb ? ma < mb : a < b;
        });
        Tensor flipped = layer.weights;
        for (std::size_t r = 0; r < order.size(); ++r) {
            // smallest-magnitude slot gets the largest magnitude
            flipped[order[r]] = layer.weights[order[order.size() - 1 - r]];
        }
        layer.weights = flipped;
    }
    const OverlapReport flipped = init_trained_overlap(init_net, reversed, 0.4);
    for (const auto& l : flipped.layers) {
        CHECK(l.overlap_pct == doctest::Approx(0.0));
    }

    RngStream s2("init", 2, 0);
    const Network other = build_model(default_spec(Family::MLP, 0.2), InitKind::Glorot, s2);
    CHECK_THROWS(init_trained_overlap(init_net, other));
}

TEST_CASE("init_trained_overlap: independent random masks average 16%") {
    // Monte Carlo over random weight pairs; chance overlap for q=0.4 is 16%
    RngStream s("overlap-mc", 0, 0);
    const int n = 1000;
    const int trials = 10000;
    double total = 0.0;
    for (int t = 0; t < trials; ++t) {
        Tensor a({n}), b({n});
        for (int i = 0; i < n; ++i) {
            a[i] = static_cast<float>(s.uniform(-1.0, 1.0));
            b[i] = static_cast<float>(s.uniform(-1.0, 1.0));
        }
        const Tensor ma = bottom_q_mask(a, 0.4);
        const Tensor mb = bottom_q_mask(b, 0.4);
        int both = 0;
        for (int i = 0; i < n; ++i) {
            if (ma[i] != 0.0f && mb[i] != 0.0f) {
                ++both;
            }
        }
        total += 100.0 * both / n;
    }
    CHECK(total / trials == doctest::Approx(16.0).epsilon(0.5 / 16.0));
}

TEST_CASE("correctness_vector: mean equals evaluate accuracy exactly") {
    RngStream ds("synth", 3, 0);
    const Dataset data = synthetic_dataset(ds, 150, {12}, 10);
    ModelSpec spec = default_spec(Family::MLP, 0.1);
    spec.input_shape = {12};
    RngStream is("init", 3, 0);
    Network net = build_model(spec, InitKind::He, is);

    const auto vec = correctness_vector(net, data, 64);
    REQUIRE(vec.size() == 150);
    double mean = 0.0;
    for (const auto v : vec) {
        mean += v;
    }
    mean /= static_cast<double>(vec.size());
    const EvalResult eval = evaluate(net, data);
    CHECK(mean == eval.accuracy);
}

TEST_CASE("correctness_vector: all-zero network ties to class 0") {
    RngStream ds("synth", 4, 0);
    Dataset data = synthetic_dataset(ds, 100, {6}, 10);
    for (int i = 0; i < 100; ++i) {
        data.labels[static_cast<std::size_t>(i)] = i < 10 ? 0 : 1 + (i % 9);
    }
    Network net;
    net.input_shape = {6};
    LayerState fc;
    fc.kind = LayerKind::dense;
    fc.weights = Tensor({10, 6}, 0.0f);
    fc.bias = Tensor({10});
    net.layers.push_back(fc);
    const auto vec = correctness_vector(net, data);
    double mean = 0.0;
    for (const auto v : vec) {
        mean += v;
    }
    CHECK(mean / 100.0 == doctest::Approx(0.1));
}

TEST_CASE("hoyer_sparsity: closed-form anchors and invariance") {
    std::vector<double> onehot(8, 0.0);
    onehot[3] = 2.5;
    CHECK(hoyer_sparsity(onehot) == doctest::Approx(1.0).epsilon(1e-12));

    const std::vector<double> constant(7, 0.3);
    CHECK(hoyer_sparsity(constant) == doctest::Approx(0.0).epsilon(1e-9));

    const std::vector<double> v34 = {3.0, 4.0};
    const double expected = (std::sqrt(2.0) - 7.0 / 5.0) / (std::sqrt(2.0) - 1.0);
    CHECK(hoyer_sparsity(v34) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(hoyer_sparsity(v34) == doctest::Approx(0.0343146).epsilon(1e-4));

    // scale invariance
    RngStream s("hoyer", 1, 0);
    std::vector<double> v(20);
    for (auto& x : v) {
        x = s.uniform(-2.0, 2.0);
    }
    const double base = hoyer_sparsity(v);
    for (const double c : {0.001, 7.3, 1e6}) {
        std::vector<double> scaled = v;
        for (auto& x : scaled) {
            x *= c;
        }
        CHECK(hoyer_sparsity(scaled) == doctest::Approx(base).epsilon(1e-6));
    }

    const std::vector<double> zero(5, 0.0);
    CHECK_THROWS(hoyer_sparsity(zero));
    const std::vector<double> single = {1.0};
    CHECK_THROWS(hoyer_sparsity(single));
}

TEST_CASE("ccmas_selectivity: closed-form anchors, range, and invariance") {
    std::vector<double> onehot(10, 0.0);
    onehot[0] = 1.0;
    CHECK(ccmas_selectivity(onehot) == doctest::Approx(1.0).epsilon(1e-9));

    const std::vector<double> uniform(10, 0.7);
    CHECK(ccmas_selectivity(uniform) == doctest::Approx(0.0).epsilon(1e-9));

    std::vector<double> spread(10, 0.2);
    spread[4] = 0.8;
    CHECK(ccmas_selectivity(spread) == doctest::Approx(0.6).epsilon(1e-9));

    const std::vector<double> zeros(10, 0.0);
    CHECK(ccmas_selectivity(zeros) == doctest::Approx(0.0));  // epsilon guard

    RngStream s("ccmas", 1, 0);
    std::vector<double> v(10);
    for (auto& x : v) {
        x = s.uniform(0.0, 1.0);
    }
    const double base = ccmas_selectivity(v);
    CHECK(base >= 0.0);
    CHECK(base <= 1.0);
    std::vector<double> scaled = v;
    for (auto& x : scaled) {
        x *= 42.0;
    }
    CHECK(ccmas_selectivity(scaled) == doctest::Approx(base).epsilon(1e-6));

    CHECK_THROWS(ccmas_selectivity(std::vector<double>{1.0}));
    CHECK_THROWS(ccmas_selectivity(std::vector<double>{1.0, -0.5}));
}

TEST_CASE("unit_activation_profiles: nonnegative means, plausible shapes") {
    RngStream ds("synth", 5, 0);
    const Dataset data = synthetic_dataset(ds, 80, {10}, 10);
    ModelSpec spec = default_spec(Family::MLP, 0.1);
    spec.input_shape = {10};
    RngStream is("init", 5, 0);
    Network net = build_model(spec, InitKind::Glorot, is);

    const auto profiles = unit_activation_profiles(net, data, 32);
    REQUIRE(profiles.size() == 2);  // two hidden ReLUs
    CHECK(profiles[0].class_means.size() == 30);
    CHECK(profiles[1].class_means.size() == 10);
    for (const auto& profile : profiles) {
        for (const auto& unit : profile.class_means) {
            REQUIRE(unit.size() == 10);
            for (const double m : unit) {
                CHECK(m >= 0.0);  // post-ReLU
            }
        }
        const auto sel = class_selectivity(profile);
        CHECK(sel.size() == profile.class_means.size());
        for (std::size_t u = 0; u < sel.size(); ++u) {
            CHECK(sel[u] >= 0.0);
            CHECK(sel[u] <= 1.0);
            const double h = profile.unit_hoyer(u);
            CHECK(h >= 0.0);
            CHECK(h <= 1.0);
        }
    }
}

TEST_CASE("tsne: output shape and bandwidth entropy contract") {
    RngStream gen("tsne-data", 1, 0);
    const int n = 40;
    std::vector<std::vector<double>> vectors(n, std::vector<double>(8));
    for (auto& v : vectors) {
        for (auto& x : v) {
            x = gen.uniform(0.0, 1.0);
        }
    }

    TsneOptions options;
    options.perplexity = 10.0;
    options.iterations = 300;
    options.exaggeration_iters = 100;
    options.momentum_switch_iter = 100;
    RngStream stream("tsne", 1, 0);
    const TsneResult result = tsne(vectors, options, stream);
    CHECK(result.embedding.size() == static_cast<std::size_t>(n) * 2);
    for (const double v : result.embedding) {
        CHECK(std::isfinite(v));
    }

    // entropy of every affinity row equals log(perplexity) within 1e-5
    std::vector<double> rows(static_cast<std::size_t>(n) * 8);
    for (int i = 0; i < n; ++i) {
        std::copy(vectors[static_cast<std::size_t>(i)].begin(),
                  vectors[static_cast<std::size_t>(i)].end(),
                  rows.begin() + static_cast<std::size_t>(i) * 8);
    }
    const auto dist = squared_distance_matrix(rows, n, 8);
    const auto p = gaussian_affinities(dist, n, options.perplexity, 1e-5);
    for (int i = 0; i < n; ++i) {
        double entropy = 0.0;
        for (int j = 0; j < n; ++j) {
            const double pij = p[static_cast<std::size_t>(i) * n + j];
            if (pij > 0.0) {
                entropy -= pij * std::log(pij);
            }
        }
        CHECK(entropy == doctest::Approx(std::log(options.perplexity)).epsilon(2e-5));
    }
}

TEST_CASE("tsne: final KL does not exceed the post-exaggeration KL") {
    RngStream gen("tsne-kl", 2, 0);
    std::vector<std::vector<double>> vectors(30, std::vector<double>(5));
    for (auto& v : vectors) {
        for (auto& x : v) {
            x = gen.next_gauss();
        }
    }
    TsneOptions options;
    options.perplexity = 8.0;
    options.iterations = 400;
    options.exaggeration_iters = 120;
    options.momentum_switch_iter = 120;
    RngStream stream("tsne", 2, 0);
    const TsneResult result = tsne(vectors, options, stream);
    CHECK(result.final_kl <= result.initial_kl);
    CHECK(result.final_kl >= 0.0);
}

TEST_CASE("tsne: two tight clusters stay separated in the embedding") {
    RngStream gen("tsne-clusters", 3, 0);
    const int per_cluster = 20;
    std::vector<std::vector<double>> vectors;
    for (int c = 0; c < 2; ++c) {
        for (int i = 0; i < per_cluster; ++i) {
            std::vector<double> v(6);
            for (auto& x : v) {
                x = c * 50.0 + 0.1 * gen.next_gauss();
            }
            vectors.push_back(std::move(v));
        }
    }
    TsneOptions options;
    options.perplexity = 8.0;
    options.iterations = 500;
    options.exaggeration_iters = 150;
    options.momentum_switch_iter = 150;
    RngStream stream("tsne", 3, 0);
    const TsneResult result = tsne(vectors, options, stream);

    const auto dist2 = [&](int i, int j) {
        const double dx = result.embedding[2 * static_cast<std::size_t>(i)] -
                          result.embedding[2 * static_cast<std::size_t>(j)];
        const double dy = result.embedding[2 * static_cast<std::size_t>(i) + 1] -
                          result.embedding[2 * static_cast<std::size_t>(j) + 1];
        return std::sqrt(dx * dx + dy * dy);
    };
    double within = 0.0, between = 0.0;
    int nw = 0, nb = 0;
    const int n = 2 * per_cluster;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if ((i < per_cluster) == (j < per_cluster)) {
                within += dist2(i, j);
                ++nw;
            } else {
                between += dist2(i, j);
                ++nb;
            }
        }
    }
    CHECK(within / nw < between / nb);
}

TEST_CASE("tsne: degenerate inputs raise") {
    const std::vector<std::vector<double>> three(3, std::vector<double>(4, 0.5));
    TsneOptions options;
    options.perplexity = 2.0;
    RngStream stream("tsne", 4, 0);
    CHECK_THROWS(tsne(three, options, stream));

    const std::vector<std::vector<double>> identical(20, std::vector<double>(4, 0.5));
    CHECK_THROWS(tsne(identical, options, stream));

    std::vector<std::vector<double>> ok(20, std::vector<double>(4, 0.5));
    for (std::size_t i = 0; i < ok.size(); ++i) {
        ok[i][0] = static_cast<double>(i);
    }
    TsneOptions big;
    big.perplexity = 30.0;  // needs at least 91 points
    CHECK_THROWS(tsne(ok, big, stream));
}
