#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "densitometer/tensor.hpp"

namespace densitometer {

enum class LayerKind {
    dense,
    conv2d,
    maxpool2x2,
    avgpool_global,
    batchnorm,
    relu,
    flatten,
    residual_add,
};

inline const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::dense: return "dense";
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::maxpool2x2: return "maxpool2x2";
        case LayerKind::avgpool_global: return "avgpool-global";
        case LayerKind::batchnorm: return "batchnorm";
        case LayerKind::relu: return "relu";
        case LayerKind::flatten: return "flatten";
        case LayerKind::residual_add: return "residual-add";
    }
    return "?";
}

inline LayerKind layer_kind_from_name(const std::string& s) {
    for (const LayerKind k : {LayerKind::dense, LayerKind::conv2d, LayerKind::maxpool2x2,
                              LayerKind::avgpool_global, LayerKind::batchnorm, LayerKind::relu,
                              LayerKind::flatten, LayerKind::residual_add}) {
        if (s == layer_kind_name(k)) {
            return k;
        }
    }
    throw std::invalid_argument("unknown layer kind '" + s + "'");
}

// One layer of a feed-forward network. weights/bias are present for dense and
// conv2d, bn_* for batchnorm. mask, when non-empty, has the weight tensor's
// shape with entries in {0,1}; weights at mask==0 positions contribute exactly
// zero to evaluation.
template <class Real>
struct LayerStateT {
    LayerKind kind = LayerKind::relu;
    std::string name;

    TensorT<Real> weights;  // dense: (n_out, n_in); conv2d: (filters, in_ch, 3, 3)
    TensorT<Real> bias;     // (n_out) / (filters)
    TensorT<Real> mask;     // empty or congruent to weights

    TensorT<Real> bn_gamma;
    TensorT<Real> bn_beta;
    TensorT<Real> bn_running_mean;
    TensorT<Real> bn_running_var;

    int skip_from = -1;  // residual_add: layer index whose output is added

    bool has_weights() const { return !weights.data.empty(); }
    bool has_mask() const { return !mask.data.empty(); }
};

using LayerState = LayerStateT<float>;

// Shape mismatch diagnostic carrying the layer it occurred at.
class ShapeError : public std::runtime_error {
public:
    ShapeError(int layer_index, const std::string& layer_name, const std::string& expected,
               const std::string& got)
        : std::runtime_error("shape mismatch at layer " + std::to_string(layer_index) + " (" +
                             layer_name + "): expected " + expected + ", got " + got),
          layer_index(layer_index) {}

    int layer_index;
};

namespace detail {

// Dot product accumulated in 64-bit using a fixed 8-bank interleave. The
// bank structure and combine order are fixed in source, so results are
// bit-identical across runs and platforms regardless of optimization level.
template <class Real>
inline double dot_acc(const Real* a, const Real* b, std::int64_t n) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, s5 = 0, s6 = 0, s7 = 0;
    std::int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        s0 += static_cast<double>(a[i + 0]) * static_cast<double>(b[i + 0]);
        s1 += static_cast<double>(a[i + 1]) * static_cast<double>(b[i + 1]);
        s2 += static_cast<double>(a[i + 2]) * static_cast<double>(b[i + 2]);
        s3 += static_cast<double>(a[i + 3]) * static_cast<double>(b[i + 3]);
        s4 += static_cast<double>(a[i + 4]) * static_cast<double>(b[i + 4]);
        s5 += static_cast<double>(a[i + 5]) * static_cast<double>(b[i + 5]);
        s6 += static_cast<double>(a[i + 6]) * static_cast<double>(b[i + 6]);
        s7 += static_cast<double>(a[i + 7]) * static_cast<double>(b[i + 7]);
    }
    for (; i < n; ++i) {
        s0 += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    }
    return ((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7));
}

// Sum accumulated in 64-bit, strictly left to right.
template <class Real>
inline double sum_acc(const Real* a, std::int64_t n) {
    double s = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        s += static_cast<double>(a[i]);
    }
    return s;
}

}  // namespace detail

}  // namespace densitometer
