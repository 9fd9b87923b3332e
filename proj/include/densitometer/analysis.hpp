#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "densitometer/data_io.hpp"
#include "densitometer/network.hpp"

namespace densitometer {

// Binary tensor marking exactly floor(q*N) entries of smallest magnitude,
// ties resolved to the lowest flat index.
Tensor bottom_q_mask(const Tensor& weights, double q);

struct LayerOverlap {
    std::string layer;
    double overlap_pct = 0.0;         // |A ∩ B| / N * 100; maximum is 100*q
    double overlap_pct_subset = 0.0;  // |A ∩ B| / floor(q*N) * 100; maximum 100
};

// Per-layer overlap between the bottom-q magnitude sets at initialization and
// after training. Chance level for independent sets is q^2 (16% at q = 0.4)
// in the overlap_pct normalization.
struct OverlapReport {
    std::string run_id;
    double q = 0.4;
    std::vector<LayerOverlap> layers;
};

OverlapReport init_trained_overlap(const Network& init_net, const Network& trained_net,
                                   double q = 0.4);

// One entry per validation item: 1 iff the eval-mode argmax prediction equals
// the label. The mean equals the evaluate() accuracy exactly.
std::vector<std::uint8_t> correctness_vector(Network& net, const Dataset& val_set,
                                             int eval_batch = 250);

// (sqrt(n) - |v|_1/|v|_2) / (sqrt(n) - 1), in [0,1]. Errors on the zero
// vector and on n == 1.
double hoyer_sparsity(std::span<const double> v);

// Per-unit, per-class mean activation at one ReLU output over a validation
// set. For 4-d activations a unit is a channel, averaged over its spatial
// positions. l1/l2/count accumulate each unit's activation stream so Hoyer
// sparsity over the whole set never needs the full vector.
struct UnitActivationProfile {
    std::string layer;
    std::vector<std::vector<double>> class_means;  // [unit][class]
    std::vector<double> l1;                        // per unit
    std::vector<double> l2;                        // per unit, sqrt of sum of squares
    std::int64_t samples_per_unit = 0;

    double unit_hoyer(std::size_t unit) const;  // 0 for units that never fire
};

std::vector<UnitActivationProfile> unit_activation_profiles(Network& net, const Dataset& val_set,
                                                            int eval_batch = 100);

// CCMAS selectivity of one unit: (mu_max - mu_rest) / (mu_max + mu_rest + 1e-12)
// where mu_rest is the mean of the other classes' means; all-zero profiles map
// to 0 by the epsilon guard.
double ccmas_selectivity(std::span<const double> class_means);

// Selectivity of every unit in a profile.
std::vector<double> class_selectivity(const UnitActivationProfile& profile);

}  // namespace densitometer
