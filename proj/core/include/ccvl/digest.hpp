#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace ccvl {

/// FNV-1a 64-bit over a byte string.
inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string to_hex(std::uint64_t value);
std::string digest_hex(std::string_view bytes);
/// Digest of a file's contents; throws ConfigError if unreadable.
std::string digest_file(const std::string& path);

}  // namespace ccvl
