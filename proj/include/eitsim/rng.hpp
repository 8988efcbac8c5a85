#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace eitsim {

// All randomness is derived from one root seed, split per purpose and id so
// partial reruns and parallel schedules see identical streams.
inline std::uint64_t split_seed(std::uint64_t root, std::string_view purpose, std::uint64_t id) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](std::uint64_t v) {
        h ^= v;
        h *= 0x100000001b3ull;
    };
    mix(root);
    for (char c : purpose) mix(static_cast<unsigned char>(c));
    mix(id);
    // splitmix64 finalizer
    h += 0x9e3779b97f4a7c15ull;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
    return h ^ (h >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t root, std::string_view purpose, std::uint64_t id = 0) {
    return std::mt19937_64(split_seed(root, purpose, id));
}

}  // namespace eitsim
