#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace qrisk {

// Hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view data);

// Hex SHA-256 of a file's contents; throws std::runtime_error if unreadable.
std::string sha256_file(const std::string& path);

// splitmix64-style mixer for deriving child seeds from (seed, label) pairs.
uint64_t mix_seed(uint64_t seed, std::string_view label);
uint64_t mix_seed(uint64_t seed, uint64_t value);

}  // namespace qrisk
