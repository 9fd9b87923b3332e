#pragma once

#include <string>
#include <vector>

#include "densitometer/network.hpp"

namespace densitometer {

enum class OptimizerKind { SGD, Adam, Adagrad };

const char* optimizer_name(OptimizerKind k);
OptimizerKind optimizer_from_name(const std::string& s);

// Per-parameter accumulator state. Adam keeps first and second moments plus a
// step count; Adagrad keeps squared-gradient sums (in the `v` slots); SGD
// keeps nothing. No weight decay anywhere.
struct OptimizerState {
    OptimizerKind kind = OptimizerKind::SGD;
    double learning_rate = 1e-3;
    long step_count = 0;

    struct Slot {
        Tensor m;
        Tensor v;
    };
    // indexed by layer: [0] weights, [1] bias, [2] bn_gamma, [3] bn_beta
    std::vector<Slot> slots[4];

    static OptimizerState create(OptimizerKind kind, double learning_rate, const Network& net);
};

// One update of every trainable parameter in `net` from `grads`.
// SGD: w -= lr*g. Adam: bias-corrected moments (beta1=0.9, beta2=0.999,
// eps=1e-8). Adagrad: w -= lr*g/(sqrt(sum g^2)+1e-10).
void optimizer_step(OptimizerState& state, Network& net, const Gradients& grads);

}  // namespace densitometer
