#pragma once

#include <cstdint>
#include <string_view>

#include "slicesim/types.hpp"

namespace slicesim {

// Deterministic per-purpose random stream (xoshiro256++ seeded via
// splitmix64). Streams are decorrelated by hashing the stream label into
// the seed, so adding a new stochastic phenomenon never reshuffles the
// draws of an existing one. Not suitable for cryptography.
class RngStream {
public:
    RngStream() : RngStream(1, "default") {}

    RngStream(std::uint64_t seed, std::string_view stream_label) {
        std::uint64_t x = seed ^ fnv1a_(stream_label);
        for (auto& s : state_) {
            s = splitmix64_(x);
        }
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl_(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl_(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double draw() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * draw();
    }

    bool bernoulli(double p) {
        return draw() < p;
    }

    // Uniform integer in [0, n). n must be > 0.
    std::uint64_t uniform_int(std::uint64_t n) {
        return static_cast<std::uint64_t>(draw() * static_cast<double>(n)) % n;
    }

private:
    static constexpr std::uint64_t rotl_(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    static std::uint64_t splitmix64_(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    static std::uint64_t fnv1a_(std::string_view s) {
        std::uint64_t h = 0xCBF29CE484222325ull;
        for (char c : s) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001B3ull;
        }
        return h;
    }

    std::uint64_t state_[4];
};

} // namespace slicesim
