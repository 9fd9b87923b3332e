#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "densitometer/rng.hpp"
#include "densitometer/tensor.hpp"

namespace densitometer {

// Immutable labelled image set; pixels normalized to [0,1].
struct Dataset {
    std::string name;  // MNIST | CIFAR10 | synthetic
    Tensor images;     // (N, item dims...)
    std::vector<int> labels;

    int size() const { return images.shape.empty() ? 0 : images.shape[0]; }

    std::vector<int> item_shape() const {
        return {images.shape.begin() + 1, images.shape.end()};
    }

    std::int64_t item_numel() const {
        std::int64_t n = 1;
        for (std::size_t i = 1; i < images.shape.size(); ++i) {
            n *= images.shape[i];
        }
        return n;
    }

    // Assemble a batch tensor from item indices, in the given order.
    Tensor gather(std::span<const int> indices) const;
};

struct SplitSpec {
    std::uint64_t data_seed = 0;
    int validation_count = 5000;
};

// Parse failure with the byte offset the problem was detected at.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
          offset(offset) {}

    std::size_t offset;
};

// IDX container: unsigned-byte body with big-endian dimension header.
struct IdxData {
    std::vector<std::uint32_t> dims;
    std::vector<std::uint8_t> body;
};

IdxData parse_idx(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_idx(const IdxData& idx);

// Whole file read; transparently gunzips gzip payloads.
std::vector<std::uint8_t> read_file_auto(const std::string& path);
std::vector<std::uint8_t> gunzip(std::span<const std::uint8_t> bytes);

// 60,000/10,000-item MNIST pair from the four standard IDX files (raw or .gz).
std::pair<Dataset, Dataset> load_mnist(const std::string& directory);

// 50,000/10,000-item CIFAR-10 pair from the six standard binary batch files.
std::pair<Dataset, Dataset> load_cifar10(const std::string& directory);

// Seeded Fisher-Yates partition of `train` into (train', validation).
std::pair<Dataset, Dataset> split_validation(const Dataset& train, const SplitSpec& spec);

// Linearly separable Gaussian blobs, one per class; labels cycle 0..classes-1.
Dataset synthetic_dataset(RngStream& stream, int n, std::vector<int> shape, int classes);

}  // namespace densitometer
