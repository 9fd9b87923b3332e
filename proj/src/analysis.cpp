#include "densitometer/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace densitometer {

Tensor bottom_q_mask(const Tensor& weights, double q) {
    if (!(q > 0.0) || !(q < 1.0)) {
        throw std::invalid_argument("bottom_q_mask: q must be in (0,1)");
    }
    const std::int64_t n = weights.numel();
    const auto count = static_cast<std::int64_t>(q * static_cast<double>(n));
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    const auto smaller = [&](std::int64_t a, std::int64_t b) {
        const float ma = std::abs(weights[a]);
        const float mb = std::abs(weights[b]);
        return ma != mb ? ma < mb : a < b;
    };
    if (count > 0) {
        std::nth_element(order.begin(), order.begin() + (count - 1), order.end(), smaller);
    }
    Tensor mask(weights.shape, 0.0f);
    for (std::int64_t i = 0; i < count; ++i) {
        mask[order[static_cast<std::size_t>(i)]] = 1.0f;
    }
    return mask;
}

OverlapReport init_trained_overlap(const Network& init_net, const Network& trained_net, double q) {
    if (init_net.layers.size() != trained_net.layers.size()) {
        throw std::invalid_argument("init_trained_overlap: layer counts differ");
    }
    OverlapReport report;
    report.q = q;
    for (std::size_t li = 0; li < init_net.layers.size(); ++li) {
        const auto& a = init_net.layers[li];
        const auto& b = trained_net.layers[li];
        if (a.kind != b.kind || !a.weights.same_shape(b.weights)) {
            throw std::invalid_argument("init_trained_overlap: architecture mismatch at layer " +
                                        std::to_string(li));
        }
        if (!a.has_weights()) {
            continue;
        }
        const Tensor mask_init = bottom_q_mask(a.weights, q);
        const Tensor mask_trained = bottom_q_mask(b.weights, q);
        std::int64_t both = 0;
        for (std::int64_t i = 0; i < mask_init.numel(); ++i) {
            if (mask_init[i] != 0.0f && mask_trained[i] != 0.0f) {
                ++both;
            }
        }
        const auto n = static_cast<double>(a.weights.numel());
        const auto subset = static_cast<double>(static_cast<std::int64_t>(q * n));
        LayerOverlap overlap;
        overlap.layer = a.name;
        overlap.overlap_pct = 100.0 * static_cast<double>(both) / n;
        overlap.overlap_pct_subset = subset > 0 ? 100.0 * static_cast<double>(both) / subset : 0.0;
        report.layers.push_back(std::move(overlap));
    }
    return report;
}

std::vector<std::uint8_t> correctness_vector(Network& net, const Dataset& val_set, int eval_batch) {
    const int n = val_set.size();
    std::vector<std::uint8_t> out(static_cast<std::size_t>(n));
    std::vector<int> indices;
    for (int start = 0; start < n; start += eval_batch) {
        const int count = std::min(eval_batch, n - start);
        indices.resize(static_cast<std::size_t>(count));
        std::iota(indices.begin(), indices.end(), start);
        const Tensor batch = val_set.gather(indices);
        auto [logits, cache] = forward(net, batch, Mode::eval);
        const auto preds = argmax_rows(logits);
        for (int i = 0; i < count; ++i) {
            out[static_cast<std::size_t>(start + i)] =
                preds[static_cast<std::size_t>(i)] == val_set.labels[static_cast<std::size_t>(start + i)]
                    ? 1
                    : 0;
        }
    }
    return out;
}

namespace {

double hoyer_from_norms(double l1, double l2, double n) {
    const double sqrt_n = std::sqrt(n);
    return (sqrt_n - l1 / l2) / (sqrt_n - 1.0);
}

}  // namespace

double hoyer_sparsity(std::span<const double> v) {
    if (v.size() < 2) {
        throw std::invalid_argument("hoyer_sparsity: need at least 2 entries");
    }
    double l1 = 0.0, l2sq = 0.0;
    for (const double x : v) {
        l1 += std::abs(x);
        l2sq += x * x;
    }
    if (l2sq == 0.0) {
        throw std::invalid_argument("hoyer_sparsity: zero vector");
    }
    return hoyer_from_norms(l1, std::sqrt(l2sq), static_cast<double>(v.size()));
}

double UnitActivationProfile::unit_hoyer(std::size_t unit) const {
    if (l2[unit] == 0.0) {
        return 0.0;  // dead unit
    }
    return hoyer_from_norms(l1[unit], l2[unit], static_cast<double>(samples_per_unit));
}

std::vector<UnitActivationProfile> unit_activation_profiles(Network& net, const Dataset& val_set,
                                                            int eval_batch) {
    const int n = val_set.size();
    if (n < 2) {
        throw std::invalid_argument("unit_activation_profiles: validation set too small");
    }
    int classes = net.class_count;

    struct Accum {
        std::size_t layer_index = 0;
        std::vector<std::vector<double>> class_sums;  // [unit][class]
        std::vector<double> l1;
        std::vector<double> l2sq;
    };
    std::vector<Accum> accums;
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        if (net.layers[li].kind == LayerKind::relu) {
            accums.push_back({li, {}, {}, {}});
        }
    }

    std::vector<int> class_counts(static_cast<std::size_t>(classes), 0);
    std::vector<int> indices;
    for (int start = 0; start < n; start += eval_batch) {
        const int count = std::min(eval_batch, n - start);
        indices.resize(static_cast<std::size_t>(count));
        std::iota(indices.begin(), indices.end(), start);
        const Tensor batch = val_set.gather(indices);
        auto [logits, cache] = forward(net, batch, Mode::eval, /*record_activations=*/true);
        for (int i = 0; i < count; ++i) {
            ++class_counts[static_cast<std::size_t>(val_set.labels[static_cast<std::size_t>(start + i)])];
        }
        for (auto& acc : accums) {
            const Tensor& out = cache.outputs[acc.layer_index];
            // unit = feature for 2-d activations, channel (spatially averaged) for 4-d
            const int units = out.shape[1];
            const std::int64_t spatial =
                out.shape.size() == 4 ? static_cast<std::int64_t>(out.shape[2]) * out.shape[3] : 1;
            if (acc.class_sums.empty()) {
                acc.class_sums.assign(static_cast<std::size_t>(units),
                                      std::vector<double>(static_cast<std::size_t>(classes), 0.0));
                acc.l1.assign(static_cast<std::size_t>(units), 0.0);
                acc.l2sq.assign(static_cast<std::size_t>(units), 0.0);
            }
            for (int i = 0; i < count; ++i) {
                const int label = val_set.labels[static_cast<std::size_t>(start + i)];
                for (int u = 0; u < units; ++u) {
                    const float* uc =
                        out.data.data() + (static_cast<std::size_t>(i) * units + u) * spatial;
                    double v = 0.0;
                    for (std::int64_t s = 0; s < spatial; ++s) {
                        v += static_cast<double>(uc[s]);
                    }
                    v /= static_cast<double>(spatial);
                    acc.class_sums[static_cast<std::size_t>(u)][static_cast<std::size_t>(label)] += v;
                    acc.l1[static_cast<std::size_t>(u)] += std::abs(v);
                    acc.l2sq[static_cast<std::size_t>(u)] += v * v;
                }
            }
        }
    }

    std::vector<UnitActivationProfile> profiles;
    for (auto& acc : accums) {
        UnitActivationProfile p;
        p.layer = "relu" + std::to_string(acc.layer_index);
        p.samples_per_unit = n;
        p.class_means = std::move(acc.class_sums);
        for (auto& per_class : p.class_means) {
            for (int c = 0; c < classes; ++c) {
                const int cc = class_counts[static_cast<std::size_t>(c)];
                if (cc > 0) {
                    per_class[static_cast<std::size_t>(c)] /= static_cast<double>(cc);
                }
            }
        }
        p.l1 = std::move(acc.l1);
        p.l2.reserve(acc.l2sq.size());
        for (const double s : acc.l2sq) {
            p.l2.push_back(std::sqrt(s));
        }
        profiles.push_back(std::move(p));
    }
    return profiles;
}

double ccmas_selectivity(std::span<const double> class_means) {
    if (class_means.size() < 2) {
        throw std::invalid_argument("ccmas_selectivity: need at least 2 classes");
    }
    for (const double m : class_means) {
        if (m < 0.0) {
            throw std::invalid_argument("ccmas_selectivity: class means must be nonnegative");
        }
    }
    std::size_t max_idx = 0;
    for (std::size_t c = 1; c < class_means.size(); ++c) {
        if (class_means[c] > class_means[max_idx]) {
            max_idx = c;
        }
    }
    const double mu_max = class_means[max_idx];
    double rest = 0.0;
    for (std::size_t c = 0; c < class_means.size(); ++c) {
        if (c != max_idx) {
            rest += class_means[c];
        }
    }
    const double mu_rest = rest / static_cast<double>(class_means.size() - 1);
    return (mu_max - mu_rest) / (mu_max + mu_rest + 1e-12);
}

std::vector<double> class_selectivity(const UnitActivationProfile& profile) {
    std::vector<double> out;
    out.reserve(profile.class_means.size());
    for (const auto& means : profile.class_means) {
        out.push_back(ccmas_selectivity(means));
    }
    return out;
}

}  // namespace densitometer
