#pragma once

// Shared utilities: deterministic seeding and portable random draws.
// Every random decision in the project flows through Rng so that results
// are reproducible bit-for-bit for a given seed.

#include <algorithm>
#include <cstdint>
#include <random>
#include <string_view>

namespace mipose {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Derive an independent stream seed from (base, index), e.g. one per image.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index) {
    return splitmix64(base ^ splitmix64(index + 0x9E3779B97F4A7C15ull));
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

// mt19937_64 with hand-rolled draw helpers. std::uniform_real_distribution
// and std::shuffle are implementation-defined; these are not.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi], inclusive.
    int uniform_int(int lo, int hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(gen_() % span);
    }

    template <typename It>
    void shuffle(It first, It last) {
        // Fisher-Yates with our own index draws.
        const auto n = static_cast<std::int64_t>(last - first);
        for (std::int64_t i = n - 1; i > 0; --i) {
            const auto j = static_cast<std::int64_t>(gen_() % static_cast<std::uint64_t>(i + 1));
            std::swap(first[i], first[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace mipose
