#pragma once

#include <cmath>
#include <cstdint>

// Counter-based deterministic RNG. Every draw is a pure function of
// (seed, stream, counter), so parallel producers can generate disjoint
// streams without shared state and results do not depend on thread count.

namespace tablab::rng {

constexpr std::uint64_t kStreamSalt = 0x9e3779b97f4a7c15ULL;

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t bits_at(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    return mix64(mix64(seed ^ (kStreamSalt * (stream + 1))) + counter);
}

// uniform in [0,1), 53-bit resolution
inline double uniform_at(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    return static_cast<double>(bits_at(seed, stream, counter) >> 11) * 0x1.0p-53;
}

// standard normal via Box-Muller, two counters per draw
inline double normal_at(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
    const double u1 = 1.0 - uniform_at(seed, stream, 2 * counter);      // (0,1]
    const double u2 = uniform_at(seed, stream, 2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

// Stateful convenience wrapper over the counter RNG.
class Stream {
public:
    Stream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

    std::uint64_t next_bits() { return bits_at(seed_, stream_, counter_++); }

    double next_uniform() { return static_cast<double>(next_bits() >> 11) * 0x1.0p-53; }

    double next_normal() {
        const double u1 = 1.0 - next_uniform();
        const double u2 = next_uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    // uniform integer in [0, n), unbiased by rejection
    std::uint64_t next_below(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = next_bits();
        } while (x >= limit);
        return x % n;
    }

    template <typename T>
    void shuffle(T* data, std::size_t n) {
        for (std::size_t i = n; i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(next_below(i));
            if (j != i - 1) {
                T tmp = data[i - 1];
                data[i - 1] = data[j];
                data[j] = tmp;
            }
        }
    }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
};

// Derive a sub-seed for a named pipeline stage so stages cannot collide.
inline std::uint64_t derive(std::uint64_t seed, std::uint64_t stage) {
    return mix64(seed ^ (0xd1b54a32d192ed03ULL * (stage + 1)));
}

}  // namespace tablab::rng
