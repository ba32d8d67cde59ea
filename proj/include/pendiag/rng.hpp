#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace pendiag {

using Rng = std::mt19937_64;

// All randomness in the pipeline flows from one root seed. Stages derive
// their own seed by hashing a fixed label so they can be re-run
// independently yet reproducibly.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view label) {
    std::uint64_t h = 1469598103934665603ULL; // FNV-1a
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    std::uint64_t z = root ^ h;
    // splitmix64 finalizer
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root, std::string_view label, std::uint64_t index) {
    return derive_seed(root ^ (0x9e3779b97f4a7c15ULL * (index + 1)), label);
}

} // namespace pendiag
