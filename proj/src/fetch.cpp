#include "densitometer/fetch.hpp"

#include <httplib.h>

#include <filesystem>
#include <fstream>
#include <ostream>

#include "densitometer/data_io.hpp"
#include "densitometer/sha256.hpp"

namespace densitometer {

namespace fs = std::filesystem;

namespace {

const char* kMnistFiles[] = {"train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                             "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"};
const char* kCifarFiles[] = {"data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin",
                             "data_batch_4.bin", "data_batch_5.bin", "test_batch.bin"};
constexpr const char* kCifarArchive = "cifar-10-binary.tar.gz";

std::vector<std::uint8_t> http_get(const std::string& base, const std::string& path,
                                   std::ostream& log) {
    log << "fetching " << base << path << "\n";
    httplib::Client client(base);
    client.set_follow_location(true);
    client.set_connection_timeout(30);
    client.set_read_timeout(120);
    const httplib::Result res = client.Get(path);
    if (!res) {
        throw std::runtime_error("download failed for " + base + path + ": " +
                                 httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw std::runtime_error("download failed for " + base + path + ": HTTP " +
                                 std::to_string(res->status));
    }
    return {res->body.begin(), res->body.end()};
}

void verify_checksum(const ExperimentConfig& config, const std::string& filename,
                     std::span<const std::uint8_t> bytes, std::ostream& log) {
    // checksum keys use '_' where filenames have '-' or '.'
    std::string key = filename;
    for (char& c : key) {
        if (c == '-' || c == '.') {
            c = '_';
        }
    }
    const auto it = config.checksums.find(key);
    if (it == config.checksums.end() || it->second.empty()) {
        log << "warning: no sha256 recorded for " << filename << ", skipping verification\n";
        return;
    }
    const std::string actual = sha256_hex(bytes);
    if (actual != it->second) {
        throw std::runtime_error("checksum mismatch for " + filename + ": expected " + it->second +
                                 ", got " + actual);
    }
    log << "verified sha256 of " << filename << "\n";
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

std::vector<std::pair<std::string, std::vector<std::uint8_t>>> untar(
    std::span<const std::uint8_t> bytes) {
    std::vector<std::pair<std::string, std::vector<std::uint8_t>>> entries;
    std::size_t offset = 0;
    while (offset + 512 <= bytes.size()) {
        const std::uint8_t* header = bytes.data() + offset;
        if (header[0] == 0) {
            break;  // end-of-archive zero block
        }
        std::string name(reinterpret_cast<const char*>(header), 100);
        name = name.c_str();  // trim at NUL
        std::string size_field(reinterpret_cast<const char*>(header + 124), 12);
        const std::size_t size = std::stoul(size_field, nullptr, 8);
        const char type = static_cast<char>(header[156]);
        offset += 512;
        if (offset + size > bytes.size()) {
            throw ParseError("tar: truncated entry '" + name + "'", offset);
        }
        if (type == '0' || type == 0) {
            entries.emplace_back(name,
                                 std::vector<std::uint8_t>(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                                                           bytes.begin() + static_cast<std::ptrdiff_t>(offset + size)));
        }
        offset += (size + 511) / 512 * 512;
    }
    return entries;
}

bool dataset_present(const ExperimentConfig& config) {
    if (config.dataset == "synthetic") {
        return true;
    }
    if (config.dataset == "mnist") {
        for (const char* stem : kMnistFiles) {
            if (!fs::exists(fs::path(config.data_dir) / stem) &&
                !fs::exists(fs::path(config.data_dir) / (std::string(stem) + ".gz"))) {
                return false;
            }
        }
        return true;
    }
    if (config.dataset == "cifar10") {
        for (const char* name : kCifarFiles) {
            if (!fs::exists(fs::path(config.data_dir) / name)) {
                return false;
            }
        }
        return true;
    }
    throw std::invalid_argument("unknown dataset '" + config.dataset + "'");
}

void fetch_dataset(const ExperimentConfig& config, std::ostream& log) {
    if (config.dataset == "synthetic") {
        log << "synthetic dataset needs no fetching\n";
        return;
    }
    fs::create_directories(config.data_dir);
    if (config.dataset == "mnist") {
        for (const char* stem : kMnistFiles) {
            const fs::path target = fs::path(config.data_dir) / (std::string(stem) + ".gz");
            if (fs::exists(target) || fs::exists(fs::path(config.data_dir) / stem)) {
                log << stem << " already present\n";
                continue;
            }
            const auto bytes = http_get(config.mnist_mirror, "/" + std::string(stem) + ".gz", log);
            verify_checksum(config, std::string(stem) + ".gz", bytes, log);
            write_file(target, bytes);
        }
        return;
    }
    if (config.dataset == "cifar10") {
        if (dataset_present(config)) {
            log << "cifar10 batches already present\n";
            return;
        }
        const auto archive = http_get(config.cifar_mirror, std::string("/") + kCifarArchive, log);
        verify_checksum(config, kCifarArchive, archive, log);
        const auto tarball = gunzip(archive);
        std::size_t extracted = 0;
        for (const auto& [name, bytes] : untar(tarball)) {
            const std::string basename = fs::path(name).filename().string();
            for (const char* want : kCifarFiles) {
                if (basename == want) {
                    write_file(fs::path(config.data_dir) / basename, bytes);
                    ++extracted;
                }
            }
        }
        if (extracted != 6) {
            throw std::runtime_error("cifar archive did not contain the 6 expected batch files");
        }
        return;
    }
    throw std::invalid_argument("unknown dataset '" + config.dataset + "'");
}

}  // namespace densitometer
