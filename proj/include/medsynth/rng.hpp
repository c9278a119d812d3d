#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace medsynth {

// Deterministic random source. The engine is std::mt19937_64, whose output
// sequence is fixed by the standard; all value mappings are done by hand so
// draws are identical across platforms and standard-library implementations
// (the std:: distributions make no such guarantee).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform double in [0, 1) with 53 bits of precision.
    double next_double() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n), n >= 1. Rejection sampling keeps it unbiased.
    std::size_t next_index(std::size_t n);

    // In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = next_index(i);
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// Stage seeds derive from the global seed and a stage label so pipeline
// stages (and per-item walks within a stage) get independent, reproducible
// streams that do not shift when unrelated stages change.
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stage);

}  // namespace medsynth
