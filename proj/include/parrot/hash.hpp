#pragma once

#include <cstdint>
#include <string>

namespace parrot {

/// FNV-1a 64-bit content hash; used to fingerprint configs and dataset
/// files in run metadata.
inline uint64_t fnv1a(const void* data, size_t len, uint64_t h = 1469598103934665603ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

inline uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

std::string hex64(uint64_t v);

/// Content hash of a file on disk; throws if unreadable.
uint64_t hash_file(const std::string& path);

} // namespace parrot
