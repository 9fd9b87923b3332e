#include "densitometer/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace densitometer {

const char* optimizer_name(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::SGD: return "sgd";
        case OptimizerKind::Adam: return "adam";
        case OptimizerKind::Adagrad: return "adagrad";
    }
    return "?";
}

OptimizerKind optimizer_from_name(const std::string& s) {
    if (s == "sgd") return OptimizerKind::SGD;
    if (s == "adam") return OptimizerKind::Adam;
    if (s == "adagrad") return OptimizerKind::Adagrad;
    throw std::invalid_argument("unknown optimizer '" + s + "' (expected sgd|adam|adagrad)");
}

OptimizerState OptimizerState::create(OptimizerKind kind, double learning_rate, const Network& net) {
    OptimizerState state;
    state.kind = kind;
    state.learning_rate = learning_rate;
    const std::size_t n = net.layers.size();
    for (auto& group : state.slots) {
        group.resize(n);
    }
    if (kind == OptimizerKind::SGD) {
        return state;
    }
    for (std::size_t li = 0; li < n; ++li) {
        const auto& layer = net.layers[li];
        const Tensor* params[4] = {&layer.weights, &layer.bias, &layer.bn_gamma, &layer.bn_beta};
        for (int g = 0; g < 4; ++g) {
            if (params[g]->data.empty()) {
                continue;
            }
            if (kind == OptimizerKind::Adam) {
                state.slots[g][li].m = Tensor(params[g]->shape);
            }
            state.slots[g][li].v = Tensor(params[g]->shape);
        }
    }
    return state;
}

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr double kAdagradEps = 1e-10;

void check_finite(const Tensor& grad, const std::string& layer_name, const char* param) {
    for (const float g : grad.data) {
        if (!std::isfinite(g)) {
            throw std::runtime_error("optimizer_step: non-finite gradient in layer '" + layer_name +
                                     "' (" + param + ")");
        }
    }
}

}  // namespace

void optimizer_step(OptimizerState& state, Network& net, const Gradients& grads) {
    if (grads.d_weights.size() != net.layers.size()) {
        throw std::invalid_argument("optimizer_step: gradients do not match network layer count");
    }
    state.step_count += 1;
    const double lr = state.learning_rate;
    const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step_count));

    static const char* kParamNames[4] = {"weights", "bias", "bn_gamma", "bn_beta"};
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        auto& layer = net.layers[li];
        Tensor* params[4] = {&layer.weights, &layer.bias, &layer.bn_gamma, &layer.bn_beta};
        const Tensor* gs[4] = {&grads.d_weights[li], &grads.d_bias[li], &grads.d_gamma[li],
                               &grads.d_beta[li]};
        for (int g = 0; g < 4; ++g) {
            Tensor& p = *params[g];
            const Tensor& grad = *gs[g];
            if (p.data.empty()) {
                continue;
            }
            if (grad.data.empty() || !grad.same_shape(p)) {
                throw std::invalid_argument("optimizer_step: gradient for layer '" + layer.name +
                                            "' (" + kParamNames[g] + ") is missing or misshapen");
            }
            check_finite(grad, layer.name, kParamNames[g]);
            switch (state.kind) {
                case OptimizerKind::SGD: {
                    for (std::size_t i = 0; i < p.data.size(); ++i) {
                        p.data[i] = static_cast<float>(static_cast<double>(p.data[i]) -
                                                       lr * static_cast<double>(grad.data[i]));
                    }
                    break;
                }
                case OptimizerKind::Adam: {
                    auto& slot = state.slots[g][li];
                    for (std::size_t i = 0; i < p.data.size(); ++i) {
                        const double gi = static_cast<double>(grad.data[i]);
                        const double m = kAdamBeta1 * static_cast<double>(slot.m.data[i]) +
                                         (1.0 - kAdamBeta1) * gi;
                        const double v = kAdamBeta2 * static_cast<double>(slot.v.data[i]) +
                                         (1.0 - kAdamBeta2) * gi * gi;
                        slot.m.data[i] = static_cast<float>(m);
                        slot.v.data[i] = static_cast<float>(v);
                        const double m_hat = m / bc1;
                        const double v_hat = v / bc2;
                        p.data[i] = static_cast<float>(static_cast<double>(p.data[i]) -
                                                       lr * m_hat / (std::sqrt(v_hat) + kAdamEps));
                    }
                    break;
                }
                case OptimizerKind::Adagrad: {
                    auto& slot = state.slots[g][li];
                    for (std::size_t i = 0; i < p.data.size(); ++i) {
                        const double gi = static_cast<double>(grad.data[i]);
                        const double acc = static_cast<double>(slot.v.data[i]) + gi * gi;
                        slot.v.data[i] = static_cast<float>(acc);
                        p.data[i] = static_cast<float>(static_cast<double>(p.data[i]) -
                                                       lr * gi / (std::sqrt(acc) + kAdagradEps));
                    }
                    break;
                }
            }
        }
    }
}

}  // namespace densitometer
