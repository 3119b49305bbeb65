#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace lores {

// splitmix64-based PRNG. std::shuffle and the <random> distributions are
// implementation-defined, so every random choice in this codebase goes
// through this class to keep results identical across platforms.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform integer in [0, n), n > 0. Rejection sampling keeps it unbiased.
    uint64_t below(uint64_t n) {
        const uint64_t limit = ~uint64_t{0} - (~uint64_t{0} % n);
        uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    // Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(theta);
        has_cached_ = true;
        return r * std::cos(theta);
    }

private:
    uint64_t state_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Named sub-seed so that every pipeline stage draws from an independent,
// reproducible stream of the single top-level seed.
inline uint64_t derive_seed(uint64_t master, std::string_view stage) {
    Rng mix(master ^ fnv1a64(stage));
    return mix.next_u64();
}

inline uint64_t derive_seed(uint64_t master, std::string_view stage, uint64_t index) {
    Rng mix(master ^ fnv1a64(stage) ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
    return mix.next_u64();
}

// Fisher-Yates shuffle driven by Rng (deterministic everywhere).
template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (size_t i = v.size(); i > 1; --i) {
        const size_t j = static_cast<size_t>(rng.below(i));
        std::swap(v[i - 1], v[j]);
    }
}

// k distinct indices from [0, n), returned in ascending order.
std::vector<size_t> sample_indices(size_t n, size_t k, Rng& rng);

}  // namespace lores
