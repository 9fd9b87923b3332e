#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "densitometer/network.hpp"
#include "densitometer/rng.hpp"

namespace densitometer {

enum class Family { MLP, Conv2, ResNetLite };
enum class InitKind { Glorot, He };

const char* family_name(Family f);
Family family_from_name(const std::string& s);
const char* init_name(InitKind k);
InitKind init_from_name(const std::string& s);

// Architecture family plus the width scaling factor applied to every default
// layer width / filter count.
struct ModelSpec {
    Family family = Family::MLP;
    double size = 1.0;
    std::vector<int> input_shape;  // {784} for MLP, {3,32,32} for the conv families
    int class_count = 10;
};

ModelSpec default_spec(Family family, double size);

// Default width scaled by `size`, rounded half-up and floored at 1.
int scaled_width(int default_width, double size);

// Half-width of the uniform init interval. Glorot: sqrt(6/(n_in+n_out));
// He: sqrt(6/n_in). Conv layers pass fan counts of in_ch*k*k / out_ch*k*k.
double init_bound(InitKind scheme, int n_in, int n_out);

// Element count of all dense/conv weight tensors; biases and batchnorm
// parameters are excluded (they are never pruned).
std::int64_t count_prunable_weights(const ModelSpec& spec);

// Per-layer weight counts in network order, for exact per-cycle quota math.
std::vector<std::int64_t> prunable_layer_counts(const ModelSpec& spec);

namespace detail {

struct LayerPlan {
    LayerKind kind;
    std::string name;
    int in_units = 0;   // dense: n_in;  conv2d: in channels;  batchnorm: channels
    int out_units = 0;  // dense: n_out; conv2d: filters
    int skip_from = -1;
};

std::vector<LayerPlan> architecture_plan(const ModelSpec& spec);

}  // namespace detail

// Realize a ModelSpec: weights drawn uniformly from [-bound, bound) via the
// given stream, biases zero, batchnorm at gamma=1, beta=0, running stats (0,1).
template <class Real>
NetworkT<Real> build_model(const ModelSpec& spec, InitKind init, RngStream& stream) {
    const auto plan = detail::architecture_plan(spec);
    NetworkT<Real> net;
    net.input_shape = spec.input_shape;
    net.class_count = spec.class_count;
    net.layers.reserve(plan.size());
    for (const auto& p : plan) {
        LayerStateT<Real> layer;
        layer.kind = p.kind;
        layer.name = p.name;
        layer.skip_from = p.skip_from;
        switch (p.kind) {
            case LayerKind::dense: {
                const double bound = init_bound(init, p.in_units, p.out_units);
                layer.weights = rng_uniform<Real>(stream, -bound, bound, {p.out_units, p.in_units});
                layer.bias = TensorT<Real>({p.out_units});
                break;
            }
            case LayerKind::conv2d: {
                const double bound = init_bound(init, p.in_units * 9, p.out_units * 9);
                layer.weights = rng_uniform<Real>(stream, -bound, bound, {p.out_units, p.in_units, 3, 3});
                layer.bias = TensorT<Real>({p.out_units});
                break;
            }
            case LayerKind::batchnorm: {
                layer.bn_gamma = TensorT<Real>({p.in_units}, Real(1));
                layer.bn_beta = TensorT<Real>({p.in_units});
                layer.bn_running_mean = TensorT<Real>({p.in_units});
                layer.bn_running_var = TensorT<Real>({p.in_units}, Real(1));
                break;
            }
            default:
                break;
        }
        net.layers.push_back(std::move(layer));
    }
    return net;
}

inline Network build_model(const ModelSpec& spec, InitKind init, RngStream& stream) {
    return build_model<float>(spec, init, stream);
}

}  // namespace densitometer
