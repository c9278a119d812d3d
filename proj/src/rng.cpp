#include "medsynth/rng.hpp"

#include <limits>

#include "medsynth/errors.hpp"

namespace medsynth {

std::size_t Rng::next_index(std::size_t n) {
    if (n == 0) {
        throw ArgumentError("Rng::next_index: n must be >= 1");
    }
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % n;
    std::uint64_t x = engine_();
    while (x >= limit) {
        x = engine_();
    }
    return static_cast<std::size_t>(x % n);
}

std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stage) {
    // FNV-1a over the stage label, then mixed with the global seed.
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : stage) {
        h ^= c;
        h *= 1099511628211ull;
    }
    h ^= global_seed + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    // splitmix64 finalizer
    h ^= h >> 30;
    h *= 0xbf58476d1ce4e5b9ull;
    h ^= h >> 27;
    h *= 0x94d049bb133111ebull;
    h ^= h >> 31;
    return h;
}

}  // namespace medsynth
