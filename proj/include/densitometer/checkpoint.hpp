#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "densitometer/trainer.hpp"

namespace densitometer {

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

// float vector <-> little-endian byte serialization
std::vector<std::uint8_t> floats_to_le_bytes(std::span<const float> values);
std::vector<float> le_bytes_to_floats(std::span<const std::uint8_t> bytes);

// Single JSON document: format version, model spec, layer list with shapes,
// parameters as base64 little-endian 32-bit reals, optimizer kind, epoch,
// metrics.
void save_checkpoint(const std::string& path, const Network& net, const CheckpointMeta& meta);
std::pair<Network, CheckpointMeta> load_checkpoint(const std::string& path);

}  // namespace densitometer
