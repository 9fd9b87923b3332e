#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "densitometer/config.hpp"

namespace densitometer {

// Download the configured dataset into config.data_dir, verifying each file's
// SHA-256 against the checksum recorded in the config (empty checksum: warn
// and skip verification). MNIST arrives as four gzipped IDX files; CIFAR-10
// as a tarball whose batch files are extracted in place.
void fetch_dataset(const ExperimentConfig& config, std::ostream& log);

// True when every file the configured dataset needs is already present.
bool dataset_present(const ExperimentConfig& config);

// Minimal ustar reader: returns (name, bytes) entries for regular files.
std::vector<std::pair<std::string, std::vector<std::uint8_t>>> untar(
    std::span<const std::uint8_t> bytes);

}  // namespace densitometer
