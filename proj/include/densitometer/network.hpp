#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "densitometer/layers.hpp"
#include "densitometer/tensor.hpp"

namespace densitometer {

enum class Mode { train, eval };

template <class Real>
struct NetworkT {
    std::vector<int> input_shape;  // per-item shape, e.g. {784} or {3,32,32}
    int class_count = 10;
    std::vector<LayerStateT<Real>> layers;
};

using Network = NetworkT<float>;

// Activation record produced by forward. In train mode every layer output is
// kept for backward; in eval mode only outputs feeding residual skips are.
template <class Real>
struct ForwardCacheT {
    const NetworkT<Real>* network = nullptr;
    bool train_mode = false;
    TensorT<Real> input;
    std::vector<TensorT<Real>> outputs;
    std::vector<std::vector<std::int32_t>> pool_src;  // maxpool: source flat index per output
    std::vector<std::vector<double>> bn_mean;
    std::vector<std::vector<double>> bn_inv_std;
};

using ForwardCache = ForwardCacheT<float>;

// Per-layer gradient tensors, congruent to the parameters they correspond to;
// empty tensors for layers without that parameter.
template <class Real>
struct GradientsT {
    std::vector<TensorT<Real>> d_weights;
    std::vector<TensorT<Real>> d_bias;
    std::vector<TensorT<Real>> d_gamma;
    std::vector<TensorT<Real>> d_beta;
};

using Gradients = GradientsT<float>;

namespace detail {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;

template <class Real>
TensorT<Real> masked_weights(const LayerStateT<Real>& layer) {
    TensorT<Real> wm = layer.weights;
    for (std::size_t i = 0; i < wm.data.size(); ++i) {
        wm.data[i] *= layer.mask.data[i];
    }
    return wm;
}

template <class Real>
void dense_forward(const TensorT<Real>& x, const TensorT<Real>& w, const TensorT<Real>& b,
                   TensorT<Real>& y) {
    const int batch = x.shape[0];
    const int n_in = x.shape[1];
    const int n_out = w.shape[0];
    for (int i = 0; i < batch; ++i) {
        const Real* xr = x.data.data() + static_cast<std::size_t>(i) * n_in;
        Real* yr = y.data.data() + static_cast<std::size_t>(i) * n_out;
        for (int o = 0; o < n_out; ++o) {
            const Real* wr = w.data.data() + static_cast<std::size_t>(o) * n_in;
            yr[o] = static_cast<Real>(dot_acc(xr, wr, n_in) + static_cast<double>(b[o]));
        }
    }
}

template <class Real>
void conv2d_forward(const TensorT<Real>& x, const TensorT<Real>& w, const TensorT<Real>& b,
                    TensorT<Real>& y) {
    // 3x3 kernel, stride 1, zero padding 1: output spatial dims equal input's
    const int batch = x.shape[0], in_ch = x.shape[1], h = x.shape[2], wd = x.shape[3];
    const int filters = w.shape[0];
    for (int n = 0; n < batch; ++n) {
        for (int f = 0; f < filters; ++f) {
            const Real* wf = w.data.data() + static_cast<std::size_t>(f) * in_ch * 9;
            for (int oy = 0; oy < h; ++oy) {
                for (int ox = 0; ox < wd; ++ox) {
                    double acc = static_cast<double>(b[f]);
                    for (int c = 0; c < in_ch; ++c) {
                        const Real* xc =
                            x.data.data() + ((static_cast<std::size_t>(n) * in_ch + c) * h) * wd;
                        const Real* wc = wf + static_cast<std::size_t>(c) * 9;
                        for (int ky = 0; ky < 3; ++ky) {
                            const int iy = oy + ky - 1;
                            if (iy < 0 || iy >= h) {
                                continue;
                            }
                            for (int kx = 0; kx < 3; ++kx) {
                                const int ix = ox + kx - 1;
                                if (ix < 0 || ix >= wd) {
                                    continue;
                                }
                                acc += static_cast<double>(xc[static_cast<std::size_t>(iy) * wd + ix]) *
                                       static_cast<double>(wc[ky * 3 + kx]);
                            }
                        }
                    }
                    y.data[((static_cast<std::size_t>(n) * filters + f) * h + oy) * wd + ox] =
                        static_cast<Real>(acc);
                }
            }
        }
    }
}

}  // namespace detail

// Output shape of one layer applied to the given input shape (batch excluded).
template <class Real>
std::vector<int> layer_output_shape(const LayerStateT<Real>& layer, int layer_index,
                                    const std::vector<int>& in) {
    const auto fail = [&](const std::string& expected) {
        throw ShapeError(layer_index, layer.name.empty() ? layer_kind_name(layer.kind) : layer.name,
                         expected, Tensor::shape_string(in));
    };
    switch (layer.kind) {
        case LayerKind::dense:
            if (in.size() != 1 || in[0] != layer.weights.shape[1]) {
                fail("(" + std::to_string(layer.weights.shape[1]) + ")");
            }
            return {layer.weights.shape[0]};
        case LayerKind::conv2d:
            if (in.size() != 3 || in[0] != layer.weights.shape[1]) {
                fail("(" + std::to_string(layer.weights.shape[1]) + ",H,W)");
            }
            return {layer.weights.shape[0], in[1], in[2]};
        case LayerKind::maxpool2x2:
            if (in.size() != 3 || in[1] % 2 != 0 || in[2] % 2 != 0) {
                fail("(C,even H,even W)");
            }
            return {in[0], in[1] / 2, in[2] / 2};
        case LayerKind::avgpool_global:
            if (in.size() != 3) {
                fail("(C,H,W)");
            }
            return {in[0]};
        case LayerKind::batchnorm:
            if (in.empty() || in[0] != layer.bn_gamma.shape[0]) {
                fail("(" + std::to_string(layer.bn_gamma.shape[0]) + ",...)");
            }
            return in;
        case LayerKind::relu:
        case LayerKind::residual_add:
            return in;
        case LayerKind::flatten: {
            int n = 1;
            for (const int d : in) {
                n *= d;
            }
            return {n};
        }
    }
    fail("valid layer input");
    return {};
}

// Forward pass. In train mode batchnorm uses batch statistics and updates the
// running ones; in eval mode it reads the running statistics and the cache
// omits activations not needed later unless record_activations is set.
template <class Real>
std::pair<TensorT<Real>, ForwardCacheT<Real>> forward(NetworkT<Real>& net, const TensorT<Real>& batch,
                                                      Mode mode, bool record_activations = false) {
    using detail::kBnEps;
    using detail::kBnMomentum;
    const bool train = mode == Mode::train;
    const bool keep_all = train || record_activations;

    if (batch.shape.size() != net.input_shape.size() + 1 ||
        !std::equal(net.input_shape.begin(), net.input_shape.end(), batch.shape.begin() + 1)) {
        throw ShapeError(-1, "input", "(batch," + Tensor::shape_string(net.input_shape).substr(1),
                         batch.shape_string());
    }
    const int batch_n = batch.shape[0];

    const std::size_t n_layers = net.layers.size();
    std::vector<bool> keep(n_layers, keep_all);
    for (const auto& layer : net.layers) {
        if (layer.kind == LayerKind::residual_add) {
            if (layer.skip_from < 0 || layer.skip_from >= static_cast<int>(n_layers)) {
                throw std::logic_error("residual-add layer has invalid skip_from");
            }
            keep[static_cast<std::size_t>(layer.skip_from)] = true;
        }
    }

    ForwardCacheT<Real> cache;
    cache.network = &net;
    cache.train_mode = train;
    cache.outputs.resize(n_layers);
    cache.pool_src.resize(n_layers);
    cache.bn_mean.resize(n_layers);
    cache.bn_inv_std.resize(n_layers);
    if (train) {
        cache.input = batch;
    }

    TensorT<Real> scratch;
    const TensorT<Real>* cur = &batch;
    std::vector<int> cur_shape = net.input_shape;

    for (std::size_t li = 0; li < n_layers; ++li) {
        auto& layer = net.layers[li];
        std::vector<int> out_shape = layer_output_shape(layer, static_cast<int>(li), cur_shape);
        std::vector<int> full_shape = out_shape;
        full_shape.insert(full_shape.begin(), batch_n);
        TensorT<Real> out(full_shape);

        switch (layer.kind) {
            case LayerKind::dense: {
                if (layer.has_mask()) {
                    const TensorT<Real> wm = detail::masked_weights(layer);
                    detail::dense_forward(*cur, wm, layer.bias, out);
                } else {
                    detail::dense_forward(*cur, layer.weights, layer.bias, out);
                }
                break;
            }
            case LayerKind::conv2d: {
                if (layer.has_mask()) {
                    const TensorT<Real> wm = detail::masked_weights(layer);
                    detail::conv2d_forward(*cur, wm, layer.bias, out);
                } else {
                    detail::conv2d_forward(*cur, layer.weights, layer.bias, out);
                }
                break;
            }
            case LayerKind::maxpool2x2: {
                const int ch = cur_shape[0], h = cur_shape[1], w = cur_shape[2];
                const int oh = h / 2, ow = w / 2;
                auto& src = cache.pool_src[li];
                src.assign(static_cast<std::size_t>(batch_n) * ch * oh * ow, 0);
                for (int n = 0; n < batch_n; ++n) {
                    for (int c = 0; c < ch; ++c) {
                        const std::size_t base = (static_cast<std::size_t>(n) * ch + c) * h * w;
                        const std::size_t obase = (static_cast<std::size_t>(n) * ch + c) * oh * ow;
                        for (int oy = 0; oy < oh; ++oy) {
                            for (int ox = 0; ox < ow; ++ox) {
                                // first-of-max in (0,0),(0,1),(1,0),(1,1) scan order
                                std::size_t best = base + (2 * oy) * static_cast<std::size_t>(w) + 2 * ox;
                                Real bv = cur->data[best];
                                for (int dy = 0; dy < 2; ++dy) {
                                    for (int dx = 0; dx < 2; ++dx) {
                                        const std::size_t idx =
                                            base + (2 * oy + dy) * static_cast<std::size_t>(w) + 2 * ox + dx;
                                        if (cur->data[idx] > bv) {
                                            bv = cur->data[idx];
                                            best = idx;
                                        }
                                    }
                                }
                                out.data[obase + static_cast<std::size_t>(oy) * ow + ox] = bv;
                                src[obase + static_cast<std::size_t>(oy) * ow + ox] =
                                    static_cast<std::int32_t>(best - base);
                            }
                        }
                    }
                }
                break;
            }
            case LayerKind::avgpool_global: {
                const int ch = cur_shape[0], h = cur_shape[1], w = cur_shape[2];
                const double inv = 1.0 / (static_cast<double>(h) * w);
                for (int n = 0; n < batch_n; ++n) {
                    for (int c = 0; c < ch; ++c) {
                        const Real* xc = cur->data.data() + (static_cast<std::size_t>(n) * ch + c) * h * w;
                        out.data[static_cast<std::size_t>(n) * ch + c] =
                            static_cast<Real>(detail::sum_acc(xc, static_cast<std::int64_t>(h) * w) * inv);
                    }
                }
                break;
            }
            case LayerKind::batchnorm: {
                const int ch = cur_shape[0];
                const std::int64_t spatial =
                    cur_shape.size() == 3 ? static_cast<std::int64_t>(cur_shape[1]) * cur_shape[2] : 1;
                const std::int64_t per_item = static_cast<std::int64_t>(ch) * spatial;
                std::vector<double> mean(ch), inv_std(ch);
                if (train) {
                    const double n_stat = static_cast<double>(batch_n) * static_cast<double>(spatial);
                    for (int c = 0; c < ch; ++c) {
                        double s = 0.0;
                        for (int n = 0; n < batch_n; ++n) {
                            const Real* xc = cur->data.data() + n * per_item + c * spatial;
                            s += detail::sum_acc(xc, spatial);
                        }
                        const double mu = s / n_stat;
                        double v = 0.0;
                        for (int n = 0; n < batch_n; ++n) {
                            const Real* xc = cur->data.data() + n * per_item + c * spatial;
                            for (std::int64_t i = 0; i < spatial; ++i) {
                                const double d = static_cast<double>(xc[i]) - mu;
                                v += d * d;
                            }
                        }
                        v /= n_stat;
                        mean[c] = mu;
                        inv_std[c] = 1.0 / std::sqrt(v + kBnEps);
                        layer.bn_running_mean[c] = static_cast<Real>(
                            (1.0 - kBnMomentum) * static_cast<double>(layer.bn_running_mean[c]) +
                            kBnMomentum * mu);
                        layer.bn_running_var[c] = static_cast<Real>(
                            (1.0 - kBnMomentum) * static_cast<double>(layer.bn_running_var[c]) +
                            kBnMomentum * v);
                    }
                } else {
                    for (int c = 0; c < ch; ++c) {
                        mean[c] = static_cast<double>(layer.bn_running_mean[c]);
                        inv_std[c] = 1.0 / std::sqrt(static_cast<double>(layer.bn_running_var[c]) + kBnEps);
                    }
                }
                for (int n = 0; n < batch_n; ++n) {
                    for (int c = 0; c < ch; ++c) {
                        const Real* xc = cur->data.data() + n * per_item + c * spatial;
                        Real* yc = out.data.data() + n * per_item + c * spatial;
                        const double g = static_cast<double>(layer.bn_gamma[c]);
                        const double b = static_cast<double>(layer.bn_beta[c]);
                        for (std::int64_t i = 0; i < spatial; ++i) {
                            yc[i] = static_cast<Real>(
                                g * ((static_cast<double>(xc[i]) - mean[c]) * inv_std[c]) + b);
                        }
                    }
                }
                if (train) {
                    cache.bn_mean[li] = std::move(mean);
                    cache.bn_inv_std[li] = std::move(inv_std);
                }
                break;
            }
            case LayerKind::relu: {
                for (std::size_t i = 0; i < out.data.size(); ++i) {
                    const Real v = cur->data[i];
                    out.data[i] = v > Real(0) ? v : Real(0);
                }
                break;
            }
            case LayerKind::flatten: {
                out.data = cur->data;
                break;
            }
            case LayerKind::residual_add: {
                const auto& skip = cache.outputs[static_cast<std::size_t>(layer.skip_from)];
                if (!skip.same_shape(*cur)) {
                    throw ShapeError(static_cast<int>(li), layer.name, skip.shape_string(),
                                     cur->shape_string());
                }
                for (std::size_t i = 0; i < out.data.size(); ++i) {
                    out.data[i] = cur->data[i] + skip.data[i];
                }
                break;
            }
        }

        if (keep[li]) {
            cache.outputs[li] = std::move(out);
            cur = &cache.outputs[li];
        } else {
            scratch = std::move(out);
            cur = &scratch;
        }
        cur_shape = std::move(out_shape);
    }

    return {*cur, std::move(cache)};
}

// Mean cross-entropy of softmax(logits) against integer labels, with the exact
// gradient wrt logits. Per-row log-sum-exp is accumulated in 64-bit.
template <class Real>
std::pair<double, TensorT<Real>> cross_entropy_loss(const TensorT<Real>& logits,
                                                    const std::vector<int>& labels) {
    if (logits.shape.size() != 2 || static_cast<std::size_t>(logits.shape[0]) != labels.size()) {
        throw std::invalid_argument("cross_entropy_loss: logits must be (batch, classes) with one label per row");
    }
    const int batch = logits.shape[0];
    const int classes = logits.shape[1];
    TensorT<Real> dlogits(logits.shape);
    double total = 0.0;
    const double inv_batch = 1.0 / batch;
    for (int b = 0; b < batch; ++b) {
        const int label = labels[static_cast<std::size_t>(b)];
        if (label < 0 || label >= classes) {
            throw std::out_of_range("cross_entropy_loss: label " + std::to_string(label) +
                                    " out of range [0," + std::to_string(classes) + ") at row " +
                                    std::to_string(b));
        }
        const Real* row = logits.data.data() + static_cast<std::size_t>(b) * classes;
        double maxv = static_cast<double>(row[0]);
        for (int c = 1; c < classes; ++c) {
            maxv = std::max(maxv, static_cast<double>(row[c]));
        }
        double sum_exp = 0.0;
        for (int c = 0; c < classes; ++c) {
            sum_exp += std::exp(static_cast<double>(row[c]) - maxv);
        }
        total += std::log(sum_exp) - (static_cast<double>(row[label]) - maxv);
        Real* drow = dlogits.data.data() + static_cast<std::size_t>(b) * classes;
        for (int c = 0; c < classes; ++c) {
            const double p = std::exp(static_cast<double>(row[c]) - maxv) / sum_exp;
            drow[c] = static_cast<Real>((p - (c == label ? 1.0 : 0.0)) * inv_batch);
        }
    }
    return {total * inv_batch, std::move(dlogits)};
}

// Backward pass through the cached forward computation. Gradient tensors are
// congruent to the parameters; gradients of masked-out weights are zero.
template <class Real>
GradientsT<Real> backward(NetworkT<Real>& net, const ForwardCacheT<Real>& cache,
                          const TensorT<Real>& dlogits) {
    if (cache.network != &net) {
        throw std::invalid_argument("backward: cache was produced by a different network");
    }
    if (!cache.train_mode) {
        throw std::invalid_argument("backward: cache must come from a train-mode forward pass");
    }
    const std::size_t n_layers = net.layers.size();
    if (cache.outputs.size() != n_layers) {
        throw std::invalid_argument("backward: cache layer count does not match network");
    }

    GradientsT<Real> grads;
    grads.d_weights.resize(n_layers);
    grads.d_bias.resize(n_layers);
    grads.d_gamma.resize(n_layers);
    grads.d_beta.resize(n_layers);

    std::vector<TensorT<Real>> grad_out(n_layers);
    if (!dlogits.same_shape(cache.outputs.back())) {
        throw ShapeError(static_cast<int>(n_layers) - 1, "dlogits",
                         cache.outputs.back().shape_string(), dlogits.shape_string());
    }
    grad_out[n_layers - 1] = dlogits;

    const auto add_into = [](TensorT<Real>& dst, const TensorT<Real>& src) {
        if (dst.data.empty()) {
            dst = src;
            return;
        }
        for (std::size_t i = 0; i < dst.data.size(); ++i) {
            dst.data[i] += src.data[i];
        }
    };

    for (std::size_t li = n_layers; li-- > 0;) {
        auto& layer = net.layers[li];
        const TensorT<Real>& dy = grad_out[li];
        if (dy.data.empty()) {
            throw std::logic_error("backward: missing upstream gradient at layer " + std::to_string(li));
        }
        const TensorT<Real>& x = li == 0 ? cache.input : cache.outputs[li - 1];
        const int batch_n = x.shape[0];
        TensorT<Real> dx(x.shape);

        switch (layer.kind) {
            case LayerKind::dense: {
                const int n_in = x.shape[1];
                const int n_out = layer.weights.shape[0];
                const TensorT<Real> wm =
                    layer.has_mask() ? detail::masked_weights(layer) : layer.weights;

                std::vector<double> dwbuf(static_cast<std::size_t>(n_out) * n_in, 0.0);
                for (int b = 0; b < batch_n; ++b) {
                    const Real* xr = x.data.data() + static_cast<std::size_t>(b) * n_in;
                    const Real* dyr = dy.data.data() + static_cast<std::size_t>(b) * n_out;
                    for (int o = 0; o < n_out; ++o) {
                        const double c = static_cast<double>(dyr[o]);
                        double* dwr = dwbuf.data() + static_cast<std::size_t>(o) * n_in;
                        for (int i = 0; i < n_in; ++i) {
                            dwr[i] += c * static_cast<double>(xr[i]);
                        }
                    }
                }
                grads.d_weights[li] = TensorT<Real>(layer.weights.shape);
                for (std::size_t i = 0; i < dwbuf.size(); ++i) {
                    grads.d_weights[li].data[i] = static_cast<Real>(dwbuf[i]);
                }
                if (layer.has_mask()) {
                    for (std::size_t i = 0; i < dwbuf.size(); ++i) {
                        grads.d_weights[li].data[i] *= layer.mask.data[i];
                    }
                }

                grads.d_bias[li] = TensorT<Real>(layer.bias.shape);
                for (int o = 0; o < n_out; ++o) {
                    double acc = 0.0;
                    for (int b = 0; b < batch_n; ++b) {
                        acc += static_cast<double>(dy.data[static_cast<std::size_t>(b) * n_out + o]);
                    }
                    grads.d_bias[li][o] = static_cast<Real>(acc);
                }

                if (li == 0) {
                    break;  // the input itself never needs a gradient
                }
                std::vector<double> dxbuf(static_cast<std::size_t>(n_in));
                for (int b = 0; b < batch_n; ++b) {
                    std::fill(dxbuf.begin(), dxbuf.end(), 0.0);
                    const Real* dyr = dy.data.data() + static_cast<std::size_t>(b) * n_out;
                    for (int o = 0; o < n_out; ++o) {
                        const double c = static_cast<double>(dyr[o]);
                        const Real* wr = wm.data.data() + static_cast<std::size_t>(o) * n_in;
                        for (int i = 0; i < n_in; ++i) {
                            dxbuf[static_cast<std::size_t>(i)] += c * static_cast<double>(wr[i]);
                        }
                    }
                    Real* dxr = dx.data.data() + static_cast<std::size_t>(b) * n_in;
                    for (int i = 0; i < n_in; ++i) {
                        dxr[i] = static_cast<Real>(dxbuf[static_cast<std::size_t>(i)]);
                    }
                }
                break;
            }
            case LayerKind::conv2d: {
                const int in_ch = x.shape[1], h = x.shape[2], w = x.shape[3];
                const int filters = layer.weights.shape[0];
                const TensorT<Real> wm =
                    layer.has_mask() ? detail::masked_weights(layer) : layer.weights;

                std::vector<double> dwbuf(static_cast<std::size_t>(filters) * in_ch * 9, 0.0);
                std::vector<double> dbbuf(static_cast<std::size_t>(filters), 0.0);
                std::vector<double> dxbuf(static_cast<std::size_t>(in_ch) * h * w);
                for (int n = 0; n < batch_n; ++n) {
                    std::fill(dxbuf.begin(), dxbuf.end(), 0.0);
                    for (int f = 0; f < filters; ++f) {
                        const Real* dyf =
                            dy.data.data() + ((static_cast<std::size_t>(n) * filters + f) * h) * w;
                        const Real* wf = wm.data.data() + static_cast<std::size_t>(f) * in_ch * 9;
                        double* dwf = dwbuf.data() + static_cast<std::size_t>(f) * in_ch * 9;
                        for (int oy = 0; oy < h; ++oy) {
                            for (int ox = 0; ox < w; ++ox) {
                                const double c = static_cast<double>(dyf[static_cast<std::size_t>(oy) * w + ox]);
                                if (c == 0.0) {
                                    continue;
                                }
                                dbbuf[static_cast<std::size_t>(f)] += c;
                                for (int ci = 0; ci < in_ch; ++ci) {
                                    const Real* xc =
                                        x.data.data() + ((static_cast<std::size_t>(n) * in_ch + ci) * h) * w;
                                    double* dxc = dxbuf.data() + static_cast<std::size_t>(ci) * h * w;
                                    for (int ky = 0; ky < 3; ++ky) {
                                        const int iy = oy + ky - 1;
                                        if (iy < 0 || iy >= h) {
                                            continue;
                                        }
                                        for (int kx = 0; kx < 3; ++kx) {
                                            const int ix = ox + kx - 1;
                                            if (ix < 0 || ix >= w) {
                                                continue;
                                            }
                                            const std::size_t xi = static_cast<std::size_t>(iy) * w + ix;
                                            const std::size_t wi =
                                                static_cast<std::size_t>(ci) * 9 + ky * 3 + kx;
                                            dwf[wi] += c * static_cast<double>(xc[xi]);
                                            dxc[xi] += c * static_cast<double>(wf[wi]);
                                        }
                                    }
                                }
                            }
                        }
                    }
                    Real* dxn = dx.data.data() + static_cast<std::size_t>(n) * in_ch * h * w;
                    for (std::size_t i = 0; i < dxbuf.size(); ++i) {
                        dxn[i] = static_cast<Real>(dxbuf[i]);
                    }
                }

                grads.d_weights[li] = TensorT<Real>(layer.weights.shape);
                for (std::size_t i = 0; i < dwbuf.size(); ++i) {
                    grads.d_weights[li].data[i] = static_cast<Real>(dwbuf[i]);
                }
                if (layer.has_mask()) {
                    for (std::size_t i = 0; i < dwbuf.size(); ++i) {
                        grads.d_weights[li].data[i] *= layer.mask.data[i];
                    }
                }
                grads.d_bias[li] = TensorT<Real>(layer.bias.shape);
                for (int f = 0; f < filters; ++f) {
                    grads.d_bias[li][f] = static_cast<Real>(dbbuf[static_cast<std::size_t>(f)]);
                }
                break;
            }
            case LayerKind::maxpool2x2: {
                const int ch = x.shape[1], h = x.shape[2], w = x.shape[3];
                const int oh = h / 2, ow = w / 2;
                dx.fill(Real(0));
                const auto& src = cache.pool_src[li];
                for (int n = 0; n < batch_n; ++n) {
                    for (int c = 0; c < ch; ++c) {
                        const std::size_t base = (static_cast<std::size_t>(n) * ch + c) * h * w;
                        const std::size_t obase = (static_cast<std::size_t>(n) * ch + c) * oh * ow;
                        for (std::int64_t i = 0; i < static_cast<std::int64_t>(oh) * ow; ++i) {
                            dx.data[base + static_cast<std::size_t>(src[obase + i])] +=
                                dy.data[obase + static_cast<std::size_t>(i)];
                        }
                    }
                }
                break;
            }
            case LayerKind::avgpool_global: {
                const int ch = x.shape[1], h = x.shape[2], w = x.shape[3];
                const Real inv = static_cast<Real>(1.0 / (static_cast<double>(h) * w));
                for (int n = 0; n < batch_n; ++n) {
                    for (int c = 0; c < ch; ++c) {
                        const Real g = dy.data[static_cast<std::size_t>(n) * ch + c] * inv;
                        Real* dxc = dx.data.data() + (static_cast<std::size_t>(n) * ch + c) * h * w;
                        for (int i = 0; i < h * w; ++i) {
                            dxc[i] = g;
                        }
                    }
                }
                break;
            }
            case LayerKind::batchnorm: {
                const int ch = x.shape[1];
                const std::int64_t spatial =
                    x.shape.size() == 4 ? static_cast<std::int64_t>(x.shape[2]) * x.shape[3] : 1;
                const std::int64_t per_item = static_cast<std::int64_t>(ch) * spatial;
                const auto& mean = cache.bn_mean[li];
                const auto& inv_std = cache.bn_inv_std[li];
                if (mean.empty()) {
                    throw std::logic_error("backward: batchnorm cache missing batch statistics");
                }
                const double n_stat = static_cast<double>(batch_n) * static_cast<double>(spatial);
                grads.d_gamma[li] = TensorT<Real>(layer.bn_gamma.shape);
                grads.d_beta[li] = TensorT<Real>(layer.bn_beta.shape);
                for (int c = 0; c < ch; ++c) {
                    double sum_dy = 0.0, sum_dy_xhat = 0.0;
                    for (int n = 0; n < batch_n; ++n) {
                        const Real* xc = x.data.data() + n * per_item + c * spatial;
                        const Real* dyc = dy.data.data() + n * per_item + c * spatial;
                        for (std::int64_t i = 0; i < spatial; ++i) {
                            const double xhat = (static_cast<double>(xc[i]) - mean[c]) * inv_std[c];
                            sum_dy += static_cast<double>(dyc[i]);
                            sum_dy_xhat += static_cast<double>(dyc[i]) * xhat;
                        }
                    }
                    grads.d_gamma[li][c] = static_cast<Real>(sum_dy_xhat);
                    grads.d_beta[li][c] = static_cast<Real>(sum_dy);
                    const double g = static_cast<double>(layer.bn_gamma[c]);
                    for (int n = 0; n < batch_n; ++n) {
                        const Real* xc = x.data.data() + n * per_item + c * spatial;
                        const Real* dyc = dy.data.data() + n * per_item + c * spatial;
                        Real* dxc = dx.data.data() + n * per_item + c * spatial;
                        for (std::int64_t i = 0; i < spatial; ++i) {
                            const double xhat = (static_cast<double>(xc[i]) - mean[c]) * inv_std[c];
                            dxc[i] = static_cast<Real>(
                                g * inv_std[c] *
                                (static_cast<double>(dyc[i]) - sum_dy / n_stat - xhat * sum_dy_xhat / n_stat));
                        }
                    }
                }
                break;
            }
            case LayerKind::relu: {
                const TensorT<Real>& out = cache.outputs[li];
                for (std::size_t i = 0; i < dx.data.size(); ++i) {
                    dx.data[i] = out.data[i] > Real(0) ? dy.data[i] : Real(0);
                }
                break;
            }
            case LayerKind::flatten: {
                dx.data = dy.data;
                break;
            }
            case LayerKind::residual_add: {
                dx.data = dy.data;
                add_into(grad_out[static_cast<std::size_t>(layer.skip_from)], dy);
                break;
            }
        }

        if (li > 0) {
            add_into(grad_out[li - 1], dx);
        }
        grad_out[li] = TensorT<Real>();  // release
    }

    return grads;
}

// Row-wise argmax with ties resolved to the lowest class index.
template <class Real>
std::vector<int> argmax_rows(const TensorT<Real>& logits) {
    const int rows = logits.shape[0];
    const int cols = logits.shape[1];
    std::vector<int> out(static_cast<std::size_t>(rows));
    for (int r = 0; r < rows; ++r) {
        const Real* row = logits.data.data() + static_cast<std::size_t>(r) * cols;
        int best = 0;
        for (int c = 1; c < cols; ++c) {
            if (row[c] > row[best]) {
                best = c;
            }
        }
        out[static_cast<std::size_t>(r)] = best;
    }
    return out;
}

}  // namespace densitometer
