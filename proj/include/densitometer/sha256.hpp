#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace densitometer {

// FIPS 180-4 SHA-256; returns the digest as 64 lowercase hex characters.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(const std::string& text);

}  // namespace densitometer
