// rng.hpp — deterministic, stream-split random number generation.
//
// Every consumer of randomness derives its own generator from
// (master_seed, stream name, indices). Streams never share state, so results
// are independent of evaluation order and worker count.

#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace rfshift {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace detail

// Derive a child seed from a master seed, a stream label and up to three
// integer indices (trial, member, sweep position, ...).
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                                 std::uint64_t i0 = 0, std::uint64_t i1 = 0,
                                 std::uint64_t i2 = 0) {
    std::uint64_t x = master ^ detail::fnv1a(stream);
    std::uint64_t h = detail::splitmix64(x);
    x ^= i0 + 0x9e3779b97f4a7c15ULL;
    h ^= detail::splitmix64(x);
    x ^= i1 + 0xd1b54a32d192ed03ULL;
    h ^= detail::splitmix64(x);
    x ^= i2 + 0x8ebc6af09c88c6e3ULL;
    h ^= detail::splitmix64(x);
    return h;
}

// xoshiro256++ with splitmix64 state expansion. Self-contained so that the
// produced sequences do not depend on the standard library implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        for (auto& word : state_) word = detail::splitmix64(seed);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller; the second deviate of each pair is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double rademacher() { return (next_u64() >> 63) ? 1.0 : -1.0; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t state_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace rfshift
