#include "densitometer/data_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>

namespace densitometer {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
    return (static_cast<std::uint32_t>(bytes[offset]) << 24) |
           (static_cast<std::uint32_t>(bytes[offset + 1]) << 16) |
           (static_cast<std::uint32_t>(bytes[offset + 2]) << 8) |
           static_cast<std::uint32_t>(bytes[offset + 3]);
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open file: " + path);
    }
    in.seekg(0, std::ios::end);
    const auto n = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    std::vector<std::uint8_t> bytes(n);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n));
    if (!in) {
        throw std::runtime_error("short read on file: " + path);
    }
    return bytes;
}

// Find "<stem>" or "<stem>.gz" in dir.
std::string locate(const std::string& dir, const std::string& stem) {
    namespace fs = std::filesystem;
    const fs::path raw = fs::path(dir) / stem;
    if (fs::exists(raw)) {
        return raw.string();
    }
    const fs::path gz = fs::path(dir) / (stem + ".gz");
    if (fs::exists(gz)) {
        return gz.string();
    }
    throw std::runtime_error("missing dataset file: " + raw.string() + " (or .gz)");
}

}  // namespace

std::vector<std::uint8_t> gunzip(std::span<const std::uint8_t> bytes) {
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 16) != Z_OK) {
        throw std::runtime_error("gunzip: inflateInit2 failed");
    }
    std::vector<std::uint8_t> out;
    out.reserve(bytes.size() * 4);
    std::uint8_t buf[1 << 16];
    zs.next_in = const_cast<Bytef*>(bytes.data());
    zs.avail_in = static_cast<uInt>(bytes.size());
    int rc = Z_OK;
    do {
        zs.next_out = buf;
        zs.avail_out = sizeof(buf);
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw ParseError("gunzip: corrupt gzip stream (zlib rc " + std::to_string(rc) + ")",
                             static_cast<std::size_t>(zs.total_in));
        }
        out.insert(out.end(), buf, buf + (sizeof(buf) - zs.avail_out));
    } while (rc != Z_STREAM_END);
    inflateEnd(&zs);
    return out;
}

std::vector<std::uint8_t> read_file_auto(const std::string& path) {
    std::vector<std::uint8_t> bytes = read_file(path);
    if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b) {
        return gunzip(bytes);
    }
    return bytes;
}

IdxData parse_idx(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4) {
        throw ParseError("IDX: truncated header, need 4 magic bytes", bytes.size());
    }
    if (bytes[0] != 0 || bytes[1] != 0) {
        throw ParseError("IDX: bad magic, first two bytes must be zero", 0);
    }
    if (bytes[2] != 0x08) {
        throw ParseError("IDX: unsupported element type 0x" + std::to_string(bytes[2]) +
                             ", only unsigned byte (0x08) is supported",
                         2);
    }
    const int ndim = bytes[3];
    if (ndim < 1 || ndim > 4) {
        throw ParseError("IDX: implausible dimension count " + std::to_string(ndim), 3);
    }
    const std::size_t header = 4 + 4 * static_cast<std::size_t>(ndim);
    if (bytes.size() < header) {
        throw ParseError("IDX: truncated header, expected " + std::to_string(header) + " bytes, got " +
                             std::to_string(bytes.size()),
                         bytes.size());
    }
    IdxData idx;
    std::uint64_t count = 1;
    for (int d = 0; d < ndim; ++d) {
        const std::uint32_t dim = read_be32(bytes, 4 + 4 * static_cast<std::size_t>(d));
        idx.dims.push_back(dim);
        count *= dim;
    }
    if (bytes.size() != header + count) {
        throw ParseError("IDX: body length mismatch, expected " + std::to_string(header + count) +
                             " total bytes, got " + std::to_string(bytes.size()),
                         std::min(bytes.size(), header + static_cast<std::size_t>(count)));
    }
    idx.body.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
    return idx;
}

std::vector<std::uint8_t> encode_idx(const IdxData& idx) {
    std::vector<std::uint8_t> out;
    out.reserve(4 + 4 * idx.dims.size() + idx.body.size());
    out.push_back(0);
    out.push_back(0);
    out.push_back(0x08);
    out.push_back(static_cast<std::uint8_t>(idx.dims.size()));
    std::uint64_t count = 1;
    for (const std::uint32_t d : idx.dims) {
        write_be32(out, d);
        count *= d;
    }
    if (count != idx.body.size()) {
        throw std::invalid_argument("encode_idx: dims imply " + std::to_string(count) +
                                    " body bytes, got " + std::to_string(idx.body.size()));
    }
    out.insert(out.end(), idx.body.begin(), idx.body.end());
    return out;
}

Tensor Dataset::gather(std::span<const int> indices) const {
    const std::int64_t item = item_numel();
    std::vector<int> shape = images.shape;
    shape[0] = static_cast<int>(indices.size());
    Tensor out(shape);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const float* src = images.data.data() + static_cast<std::size_t>(indices[i]) * item;
        std::copy(src, src + item, out.data.data() + static_cast<std::size_t>(i) * item);
    }
    return out;
}

namespace {

Dataset mnist_part(const std::string& dir, const std::string& images_stem,
                   const std::string& labels_stem) {
    const auto image_bytes = read_file_auto(locate(dir, images_stem));
    const auto label_bytes = read_file_auto(locate(dir, labels_stem));
    const IdxData images = parse_idx(image_bytes);
    const IdxData labels = parse_idx(label_bytes);
    if (images.dims.size() != 3) {
        throw ParseError(images_stem + ": expected 3 dimensions (count,rows,cols), got " +
                             std::to_string(images.dims.size()),
                         3);
    }
    if (labels.dims.size() != 1) {
        throw ParseError(labels_stem + ": expected 1 dimension, got " +
                             std::to_string(labels.dims.size()),
                         3);
    }
    if (images.dims[1] != 28 || images.dims[2] != 28) {
        throw ParseError(images_stem + ": expected 28x28 images, got " +
                             std::to_string(images.dims[1]) + "x" + std::to_string(images.dims[2]),
                         8);
    }
    if (images.dims[0] != labels.dims[0]) {
        throw ParseError(images_stem + "/" + labels_stem + ": item count mismatch (" +
                             std::to_string(images.dims[0]) + " images vs " +
                             std::to_string(labels.dims[0]) + " labels)",
                         4);
    }
    const int n = static_cast<int>(images.dims[0]);
    Dataset ds;
    ds.name = "MNIST";
    ds.images = Tensor({n, 784});
    for (std::size_t i = 0; i < images.body.size(); ++i) {
        ds.images.data[i] = static_cast<float>(images.body[i]) / 255.0f;
    }
    ds.labels.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const std::uint8_t lab = labels.body[static_cast<std::size_t>(i)];
        if (lab > 9) {
            throw ParseError(labels_stem + ": label value " + std::to_string(lab) + " out of range",
                             4 + 4 + static_cast<std::size_t>(i));
        }
        ds.labels[static_cast<std::size_t>(i)] = lab;
    }
    return ds;
}

}  // namespace

std::pair<Dataset, Dataset> load_mnist(const std::string& directory) {
    Dataset train = mnist_part(directory, "train-images-idx3-ubyte", "train-labels-idx1-ubyte");
    Dataset test = mnist_part(directory, "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte");
    return {std::move(train), std::move(test)};
}

namespace {

constexpr std::size_t kCifarRecord = 3073;
constexpr std::size_t kCifarPerBatch = 10000;

void append_cifar_batch(Dataset& ds, const std::string& path, std::size_t item_offset) {
    const auto bytes = read_file_auto(path);
    if (bytes.size() != kCifarRecord * kCifarPerBatch) {
        throw ParseError(path + ": expected exactly " + std::to_string(kCifarRecord * kCifarPerBatch) +
                             " bytes (10,000 records of 3073), got " + std::to_string(bytes.size()),
                         bytes.size());
    }
    for (std::size_t r = 0; r < kCifarPerBatch; ++r) {
        const std::size_t rec = r * kCifarRecord;
        const std::uint8_t lab = bytes[rec];
        if (lab > 9) {
            throw ParseError(path + ": label value " + std::to_string(lab) + " out of range", rec);
        }
        const std::size_t item = item_offset + r;
        ds.labels[item] = lab;
        float* dst = ds.images.data.data() + item * 3072;
        for (std::size_t p = 0; p < 3072; ++p) {
            dst[p] = static_cast<float>(bytes[rec + 1 + p]) / 255.0f;
        }
    }
}

}  // namespace

std::pair<Dataset, Dataset> load_cifar10(const std::string& directory) {
    namespace fs = std::filesystem;
    Dataset train;
    train.name = "CIFAR10";
    train.images = Tensor({50000, 3, 32, 32});
    train.labels.resize(50000);
    for (int b = 1; b <= 5; ++b) {
        const std::string path = (fs::path(directory) / ("data_batch_" + std::to_string(b) + ".bin")).string();
        if (!fs::exists(path)) {
            throw std::runtime_error("missing dataset file: " + path);
        }
        append_cifar_batch(train, path, static_cast<std::size_t>(b - 1) * kCifarPerBatch);
    }
    Dataset test;
    test.name = "CIFAR10";
    test.images = Tensor({10000, 3, 32, 32});
    test.labels.resize(10000);
    const std::string test_path = (fs::path(directory) / "test_batch.bin").string();
    if (!fs::exists(test_path)) {
        throw std::runtime_error("missing dataset file: " + test_path);
    }
    append_cifar_batch(test, test_path, 0);
    return {std::move(train), std::move(test)};
}

std::pair<Dataset, Dataset> split_validation(const Dataset& train, const SplitSpec& spec) {
    const int n = train.size();
    if (n <= spec.validation_count) {
        throw std::invalid_argument("split_validation: need more than " +
                                    std::to_string(spec.validation_count) + " items, got " +
                                    std::to_string(n));
    }
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    RngStream stream("split", 0, spec.data_seed);
    for (int i = n - 1; i > 0; --i) {
        const auto j = static_cast<int>(stream.next_below(static_cast<std::uint64_t>(i) + 1));
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    std::vector<int> val_idx(order.begin(), order.begin() + spec.validation_count);
    std::vector<int> train_idx(order.begin() + spec.validation_count, order.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(train_idx.begin(), train_idx.end());

    const auto take = [&](const std::vector<int>& idx) {
        Dataset out;
        out.name = train.name;
        out.images = train.gather(idx);
        out.labels.reserve(idx.size());
        for (const int i : idx) {
            out.labels.push_back(train.labels[static_cast<std::size_t>(i)]);
        }
        return out;
    };
    return {take(train_idx), take(val_idx)};
}

Dataset synthetic_dataset(RngStream& stream, int n, std::vector<int> shape, int classes) {
    if (classes < 1 || n < classes) {
        throw std::invalid_argument("synthetic_dataset: need n >= classes >= 1");
    }
    std::int64_t dim = 1;
    for (const int d : shape) {
        dim *= d;
    }
    // one blob center per class, kept away from the pixel-range walls
    std::vector<std::vector<float>> centers(static_cast<std::size_t>(classes));
    for (auto& c : centers) {
        c.resize(static_cast<std::size_t>(dim));
        for (auto& v : c) {
            v = static_cast<float>(stream.uniform(0.2, 0.8));
        }
    }
    std::vector<int> full_shape = shape;
    full_shape.insert(full_shape.begin(), n);
    Dataset ds;
    ds.name = "synthetic";
    ds.images = Tensor(full_shape);
    ds.labels.resize(static_cast<std::size_t>(n));
    constexpr double kNoise = 0.05;
    for (int i = 0; i < n; ++i) {
        const int label = i % classes;
        ds.labels[static_cast<std::size_t>(i)] = label;
        float* dst = ds.images.data.data() + static_cast<std::size_t>(i) * dim;
        const auto& c = centers[static_cast<std::size_t>(label)];
        for (std::int64_t d = 0; d < dim; ++d) {
            const double v = static_cast<double>(c[static_cast<std::size_t>(d)]) +
                             kNoise * stream.next_gauss();
            dst[d] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }
    return ds;
}

}  // namespace densitometer
