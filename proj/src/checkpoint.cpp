#include "densitometer/checkpoint.hpp"

#include <json.hpp>

#include <bit>
#include <fstream>

namespace densitometer {

namespace {

constexpr char kB64Alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= bytes.size(); i += 3) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back(kB64Alphabet[(v >> 6) & 63]);
        out.push_back(kB64Alphabet[v & 63]);
    }
    const std::size_t rest = bytes.size() - i;
    if (rest == 1) {
        const std::uint32_t v = bytes[i] << 16;
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back('=');
        out.push_back('=');
    } else if (rest == 2) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
        out.push_back(kB64Alphabet[(v >> 18) & 63]);
        out.push_back(kB64Alphabet[(v >> 12) & 63]);
        out.push_back(kB64Alphabet[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    std::uint32_t acc = 0;
    int bits = 0;
    for (const char c : text) {
        if (c == '=' || c == '\n' || c == '\r') {
            continue;
        }
        const int v = b64_value(c);
        if (v < 0) {
            throw std::invalid_argument("base64_decode: invalid character");
        }
        acc = (acc << 6) | static_cast<std::uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xff));
        }
    }
    return out;
}

std::vector<std::uint8_t> floats_to_le_bytes(std::span<const float> values) {
    std::vector<std::uint8_t> out;
    out.reserve(values.size() * 4);
    for (const float f : values) {
        const auto u = std::bit_cast<std::uint32_t>(f);
        out.push_back(static_cast<std::uint8_t>(u & 0xff));
        out.push_back(static_cast<std::uint8_t>((u >> 8) & 0xff));
        out.push_back(static_cast<std::uint8_t>((u >> 16) & 0xff));
        out.push_back(static_cast<std::uint8_t>((u >> 24) & 0xff));
    }
    return out;
}

std::vector<float> le_bytes_to_floats(std::span<const std::uint8_t> bytes) {
    if (bytes.size() % 4 != 0) {
        throw std::invalid_argument("le_bytes_to_floats: byte count not a multiple of 4");
    }
    std::vector<float> out(bytes.size() / 4);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::uint32_t u = static_cast<std::uint32_t>(bytes[4 * i]) |
                                (static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8) |
                                (static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16) |
                                (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
        out[i] = std::bit_cast<float>(u);
    }
    return out;
}

namespace {

using nlohmann::json;

json tensor_to_json(const Tensor& t) {
    json j;
    j["shape"] = t.shape;
    j["data"] = base64_encode(floats_to_le_bytes(t.data));
    return j;
}

Tensor tensor_from_json(const json& j) {
    std::vector<int> shape = j.at("shape").get<std::vector<int>>();
    std::vector<float> data = le_bytes_to_floats(base64_decode(j.at("data").get<std::string>()));
    return Tensor(std::move(shape), std::move(data));
}

}  // namespace

void save_checkpoint(const std::string& path, const Network& net, const CheckpointMeta& meta) {
    json j;
    j["format_version"] = 1;
    j["model"] = {{"family", family_name(meta.spec.family)},
                  {"size", meta.spec.size},
                  {"input_shape", meta.spec.input_shape},
                  {"class_count", meta.spec.class_count}};
    j["init_scheme"] = init_name(meta.init);
    j["optimizer"] = optimizer_name(meta.optimizer);
    j["epoch"] = meta.epoch;
    j["metrics"] = {{"train_loss", meta.train_loss},
                    {"val_loss", meta.val_loss},
                    {"val_accuracy", meta.val_accuracy}};
    json layers = json::array();
    for (const auto& layer : net.layers) {
        json lj;
        lj["kind"] = layer_kind_name(layer.kind);
        lj["name"] = layer.name;
        if (layer.skip_from >= 0) {
            lj["skip_from"] = layer.skip_from;
        }
        if (!layer.weights.data.empty()) {
            lj["weights"] = tensor_to_json(layer.weights);
            lj["bias"] = tensor_to_json(layer.bias);
        }
        if (!layer.mask.data.empty()) {
            lj["mask"] = tensor_to_json(layer.mask);
        }
        if (!layer.bn_gamma.data.empty()) {
            lj["bn_gamma"] = tensor_to_json(layer.bn_gamma);
            lj["bn_beta"] = tensor_to_json(layer.bn_beta);
            lj["bn_running_mean"] = tensor_to_json(layer.bn_running_mean);
            lj["bn_running_var"] = tensor_to_json(layer.bn_running_var);
        }
        layers.push_back(std::move(lj));
    }
    j["layers"] = std::move(layers);
    j["network"] = {{"input_shape", net.input_shape}, {"class_count", net.class_count}};

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("save_checkpoint: cannot open " + path);
    }
    out << j.dump();
    if (!out) {
        throw std::runtime_error("save_checkpoint: write failed for " + path);
    }
}

std::pair<Network, CheckpointMeta> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("load_checkpoint: cannot open " + path);
    }
    json j;
    in >> j;
    if (j.at("format_version").get<int>() != 1) {
        throw std::runtime_error("load_checkpoint: unsupported format version in " + path);
    }
    CheckpointMeta meta;
    meta.spec.family = family_from_name(j.at("model").at("family").get<std::string>());
    meta.spec.size = j.at("model").at("size").get<double>();
    meta.spec.input_shape = j.at("model").at("input_shape").get<std::vector<int>>();
    meta.spec.class_count = j.at("model").at("class_count").get<int>();
    meta.init = init_from_name(j.at("init_scheme").get<std::string>());
    meta.optimizer = optimizer_from_name(j.at("optimizer").get<std::string>());
    meta.epoch = j.at("epoch").get<int>();
    meta.train_loss = j.at("metrics").at("train_loss").get<double>();
    meta.val_loss = j.at("metrics").at("val_loss").get<double>();
    meta.val_accuracy = j.at("metrics").at("val_accuracy").get<double>();

    Network net;
    net.input_shape = j.at("network").at("input_shape").get<std::vector<int>>();
    net.class_count = j.at("network").at("class_count").get<int>();
    for (const auto& lj : j.at("layers")) {
        LayerState layer;
        layer.kind = layer_kind_from_name(lj.at("kind").get<std::string>());
        layer.name = lj.at("name").get<std::string>();
        layer.skip_from = lj.value("skip_from", -1);
        if (lj.contains("weights")) {
            layer.weights = tensor_from_json(lj.at("weights"));
            layer.bias = tensor_from_json(lj.at("bias"));
        }
        if (lj.contains("mask")) {
            layer.mask = tensor_from_json(lj.at("mask"));
        }
        if (lj.contains("bn_gamma")) {
            layer.bn_gamma = tensor_from_json(lj.at("bn_gamma"));
            layer.bn_beta = tensor_from_json(lj.at("bn_beta"));
            layer.bn_running_mean = tensor_from_json(lj.at("bn_running_mean"));
            layer.bn_running_var = tensor_from_json(lj.at("bn_running_var"));
        }
        net.layers.push_back(std::move(layer));
    }
    return {std::move(net), std::move(meta)};
}

}  // namespace densitometer
