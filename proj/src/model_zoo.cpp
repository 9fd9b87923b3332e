#include "densitometer/model_zoo.hpp"

#include <cmath>
#include <stdexcept>

namespace densitometer {

const char* family_name(Family f) {
    switch (f) {
        case Family::MLP: return "MLP";
        case Family::Conv2: return "Conv2";
        case Family::ResNetLite: return "ResNetLite";
    }
    return "?";
}

Family family_from_name(const std::string& s) {
    if (s == "MLP") return Family::MLP;
    if (s == "Conv2") return Family::Conv2;
    if (s == "ResNetLite") return Family::ResNetLite;
    throw std::invalid_argument("unknown model family '" + s + "'");
}

const char* init_name(InitKind k) {
    return k == InitKind::Glorot ? "glorot" : "he";
}

InitKind init_from_name(const std::string& s) {
    if (s == "glorot") return InitKind::Glorot;
    if (s == "he") return InitKind::He;
    throw std::invalid_argument("unknown init scheme '" + s + "' (expected glorot|he)");
}

ModelSpec default_spec(Family family, double size) {
    ModelSpec spec;
    spec.family = family;
    spec.size = size;
    spec.input_shape = family == Family::MLP ? std::vector<int>{784} : std::vector<int>{3, 32, 32};
    spec.class_count = 10;
    return spec;
}

int scaled_width(int default_width, double size) {
    if (default_width < 1) {
        throw std::invalid_argument("scaled_width: default width must be >= 1");
    }
    if (!(size > 0.0)) {
        throw std::invalid_argument("scaled_width: size must be positive");
    }
    const int w = static_cast<int>(std::floor(static_cast<double>(default_width) * size + 0.5));
    return w < 1 ? 1 : w;
}

double init_bound(InitKind scheme, int n_in, int n_out) {
    if (n_in < 1 || n_out < 1) {
        throw std::invalid_argument("init_bound: fan counts must be >= 1");
    }
    return scheme == InitKind::Glorot ? std::sqrt(6.0 / (static_cast<double>(n_in) + n_out))
                                      : std::sqrt(6.0 / static_cast<double>(n_in));
}

namespace detail {

std::vector<LayerPlan> architecture_plan(const ModelSpec& spec) {
    if (!(spec.size > 0.0)) {
        throw std::invalid_argument("architecture_plan: size must be positive");
    }
    if (spec.class_count < 1) {
        throw std::invalid_argument("architecture_plan: class count must be positive");
    }
    std::vector<LayerPlan> plan;
    const auto dense = [&](const std::string& name, int n_in, int n_out) {
        plan.push_back({LayerKind::dense, name, n_in, n_out, -1});
    };
    const auto conv = [&](const std::string& name, int in_ch, int filters) {
        plan.push_back({LayerKind::conv2d, name, in_ch, filters, -1});
    };
    const auto bn = [&](int channels) {
        plan.push_back({LayerKind::batchnorm, "bn", channels, 0, -1});
    };
    const auto relu = [&] { plan.push_back({LayerKind::relu, "relu", 0, 0, -1}); };

    switch (spec.family) {
        case Family::MLP: {
            if (spec.input_shape.size() != 1) {
                throw std::invalid_argument("MLP requires a flat input shape");
            }
            const int h1 = scaled_width(300, spec.size);
            const int h2 = scaled_width(100, spec.size);
            dense("fc1", spec.input_shape[0], h1);
            relu();
            dense("fc2", h1, h2);
            relu();
            dense("proj", h2, spec.class_count);
            break;
        }
        case Family::Conv2: {
            if (spec.input_shape.size() != 3) {
                throw std::invalid_argument("Conv2 requires a (channels,H,W) input shape");
            }
            const int in_ch = spec.input_shape[0];
            const int h = spec.input_shape[1], w = spec.input_shape[2];
            if (h % 2 != 0 || w % 2 != 0) {
                throw std::invalid_argument("Conv2 requires even spatial input dims for 2x2 pooling");
            }
            const int f = scaled_width(64, spec.size);
            const int fc = scaled_width(256, spec.size);
            conv("conv1", in_ch, f);
            relu();
            conv("conv2", f, f);
            relu();
            plan.push_back({LayerKind::maxpool2x2, "pool", 0, 0, -1});
            plan.push_back({LayerKind::flatten, "flatten", 0, 0, -1});
            dense("fc1", f * (h / 2) * (w / 2), fc);
            relu();
            dense("fc2", fc, fc);
            relu();
            dense("proj", fc, spec.class_count);
            break;
        }
        case Family::ResNetLite: {
            if (spec.input_shape.size() != 3) {
                throw std::invalid_argument("ResNetLite requires a (channels,H,W) input shape");
            }
            const int f = scaled_width(16, spec.size);
            conv("conv0", spec.input_shape[0], f);
            bn(f);
            relu();
            for (int b = 1; b <= 3; ++b) {
                const int block_input = static_cast<int>(plan.size()) - 1;  // preceding relu
                const std::string prefix = "block" + std::to_string(b) + "_";
                conv(prefix + "conv1", f, f);
                bn(f);
                relu();
                conv(prefix + "conv2", f, f);
                bn(f);
                plan.push_back({LayerKind::residual_add, prefix + "add", 0, 0, block_input});
                relu();
            }
            plan.push_back({LayerKind::avgpool_global, "gap", 0, 0, -1});
            dense("proj", f, spec.class_count);
            break;
        }
    }
    return plan;
}

}  // namespace detail

std::vector<std::int64_t> prunable_layer_counts(const ModelSpec& spec) {
    std::vector<std::int64_t> counts;
    for (const auto& p : detail::architecture_plan(spec)) {
        if (p.kind == LayerKind::dense) {
            counts.push_back(static_cast<std::int64_t>(p.in_units) * p.out_units);
        } else if (p.kind == LayerKind::conv2d) {
            counts.push_back(static_cast<std::int64_t>(p.in_units) * p.out_units * 9);
        }
    }
    return counts;
}

std::int64_t count_prunable_weights(const ModelSpec& spec) {
    std::int64_t total = 0;
    for (const std::int64_t n : prunable_layer_counts(spec)) {
        total += n;
    }
    return total;
}

}  // namespace densitometer
