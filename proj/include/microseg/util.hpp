#pragma once

#include <cstdint>
#include <cstring>
#include <functional>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace microseg {

inline std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

inline std::uint64_t fnv1a64(std::span<const double> values) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (double v : values) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        h = fnv1a64(&bits, sizeof(bits), h);
    }
    return h;
}

std::string to_hex(std::uint64_t v);

// Writes content to a temp file in the same directory, then renames.
void atomic_write_file(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

// Static partition over [0, n); each index is processed exactly once and
// results must be written to per-index slots, so any thread count produces
// identical output.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace microseg
