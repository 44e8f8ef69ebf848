#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace caada {

using Rng = std::mt19937_64;

// splitmix64 finalizer, used as the mixing step of seed derivation.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Every random stream in the project is derived from the experiment seed
// through a labeled purpose tag, so one source of randomness can be varied
// while the others stay frozen: sub = derive_seed(seed, "init.source").
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view purpose) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the tag
    for (unsigned char c : purpose) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return mix64(root ^ mix64(h));
}

inline std::uint64_t derive_seed(std::uint64_t root, std::string_view purpose,
                                 std::uint64_t index) {
    return mix64(derive_seed(root, purpose) ^ mix64(index + 0x51ed270b0a1ULL));
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace caada
