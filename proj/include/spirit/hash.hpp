#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace spirit {

// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

// First 8 bytes of the SHA-256 digest as a big-endian integer. Stable across
// platforms, unlike std::hash.
std::uint64_t stable_hash64(std::string_view data);

}  // namespace spirit
