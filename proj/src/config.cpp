#include "densitometer/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace densitometer {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) {
        return "";
    }
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        out.push_back(trim(item));
    }
    return out;
}

StoppingRule parse_rule(const std::string& text) {
    // "loss_target:0.2" or "val_min:25"
    const auto colon = text.find(':');
    if (colon == std::string::npos) {
        throw std::invalid_argument("config: rule must look like loss_target:0.2 or val_min:25");
    }
    const std::string kind = trim(text.substr(0, colon));
    const std::string arg = trim(text.substr(colon + 1));
    if (kind == "loss_target") {
        return StoppingRule::loss_target(std::stod(arg));
    }
    if (kind == "val_min") {
        return StoppingRule::val_min(std::stoi(arg));
    }
    throw std::invalid_argument("config: unknown stopping rule '" + kind + "'");
}

}  // namespace

std::string format_double_compact(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> out;
    for (const std::string& part : split(text, ',')) {
        if (part.empty()) {
            continue;
        }
        const auto dots = part.find("..");
        if (dots != std::string::npos) {
            const auto lo = std::stoull(part.substr(0, dots));
            const auto hi = std::stoull(part.substr(dots + 2));
            if (hi < lo) {
                throw std::invalid_argument("config: bad seed range '" + part + "'");
            }
            for (std::uint64_t s = lo; s <= hi; ++s) {
                out.push_back(s);
            }
        } else {
            out.push_back(std::stoull(part));
        }
    }
    if (out.empty()) {
        throw std::invalid_argument("config: empty seed list");
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    for (const std::string& part : split(text, ',')) {
        if (!part.empty()) {
            out.push_back(std::stod(part));
        }
    }
    if (out.empty()) {
        throw std::invalid_argument("config: empty numeric list");
    }
    return out;
}

std::string ExperimentConfig::dataset_display() const {
    if (dataset == "mnist") {
        return "MNIST";
    }
    if (dataset == "cifar10") {
        return "CIFAR10";
    }
    if (dataset == "synthetic") {
        return "synthetic";
    }
    throw std::invalid_argument("config: unknown dataset '" + dataset + "'");
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig config;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto comment = line.find('#');
        if (comment != std::string::npos) {
            line = line.substr(0, comment);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(line_no) +
                                        ": expected key = value, got '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const std::string scoped = section.empty() ? key : section + "." + key;

        try {
            if (scoped == "data.dataset") {
                config.dataset = value;
                config.dataset_display();  // validate
            } else if (scoped == "data.dir") {
                config.data_dir = value;
            } else if (scoped == "data.validation_count") {
                config.validation_count = std::stoi(value);
            } else if (scoped == "data.synthetic_items") {
                config.synthetic_items = std::stoi(value);
            } else if (scoped == "data.synthetic_dim") {
                config.synthetic_dim = std::stoi(value);
            } else if (scoped == "data.synthetic_classes") {
                config.synthetic_classes = std::stoi(value);
            } else if (scoped == "grid.families") {
                config.families.clear();
                for (const auto& name : split(value, ',')) {
                    config.families.push_back(family_from_name(name));
                }
            } else if (scoped == "grid.sizes") {
                config.sizes = parse_double_list(value);
            } else if (scoped == "grid.optimizers") {
                config.optimizers.clear();
                for (const auto& name : split(value, ',')) {
                    config.optimizers.push_back(optimizer_from_name(name));
                }
            } else if (scoped == "grid.init_schemes") {
                config.init_schemes.clear();
                for (const auto& name : split(value, ',')) {
                    config.init_schemes.push_back(init_from_name(name));
                }
            } else if (scoped == "grid.init_seeds") {
                config.init_seeds = parse_seed_list(value);
            } else if (scoped == "grid.data_seeds") {
                config.data_seeds = parse_seed_list(value);
            } else if (scoped == "train.batch_size") {
                config.batch_size = std::stoi(value);
            } else if (scoped == "train.learning_rate") {
                config.learning_rate = std::stod(value);
            } else if (scoped == "train.rule") {
                config.rule = parse_rule(value);
            } else if (scoped == "prune.threshold_pp") {
                config.threshold_pp = std::stod(value);
            } else if (scoped == "output.dir") {
                config.output_dir = value;
            } else if (scoped == "fetch.mnist_mirror") {
                config.mnist_mirror = value;
            } else if (scoped == "fetch.cifar_mirror") {
                config.cifar_mirror = value;
            } else if (section == "fetch" && key.rfind("sha256_", 0) == 0) {
                config.checksums[key.substr(7)] = value;
            } else {
                throw std::invalid_argument("config line " + std::to_string(line_no) +
                                            ": unknown key '" + scoped + "'");
            }
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception& e) {
            throw std::invalid_argument("config line " + std::to_string(line_no) + " ('" + scoped +
                                        "'): " + e.what());
        }
    }
    if (config.init_seeds.empty() || config.data_seeds.empty()) {
        throw std::invalid_argument("config: seed lists must be nonempty");
    }
    return config;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open config file: " + path);
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str());
}

void apply_env_overrides(ExperimentConfig& config) {
    if (const char* dir = std::getenv("DENSITOMETER_DATA_DIR")) {
        config.data_dir = dir;
    }
    if (const char* mirror = std::getenv("DENSITOMETER_MIRROR")) {
        config.mnist_mirror = mirror;
        config.cifar_mirror = mirror;
    }
}

}  // namespace densitometer
