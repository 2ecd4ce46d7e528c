#pragma once

#include <cstdint>
#include <initializer_list>

namespace sprs {

// Deterministic random stream (xoshiro256** seeded through splitmix64).
//
// The standard library engines are bit-exact but its distributions are not,
// so every draw here is spelled out: results are byte-identical across
// platforms and standard libraries. Streams for parallel work are derived
// with derive(), which hashes the parent seed together with stream labels
// (level, mac index, timestep, ...) so results never depend on scheduling.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

    void reseed(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& word : state_) word = splitmix64(x);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, n). Rejection sampling keeps it exactly uniform.
    std::uint32_t below(std::uint32_t n) {
        const std::uint64_t span = 0xFFFFFFFFFFFFFFFFull - 0xFFFFFFFFFFFFFFFFull % n;
        std::uint64_t v = next_u64();
        while (v >= span) v = next_u64();
        return static_cast<std::uint32_t>(v % n);
    }

    // Uniform double in [0, 1) with 53 random bits.
    double real() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Child stream keyed by (this stream's seed material, labels...).
    Rng derive(std::initializer_list<std::uint64_t> labels) const {
        std::uint64_t h = state_[0] ^ rotl(state_[3], 23);
        for (std::uint64_t label : labels) {
            std::uint64_t x = h ^ (label + 0x9E3779B97F4A7C15ull);
            h = splitmix64(x);
        }
        return Rng(h);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    static std::uint64_t splitmix64(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    std::uint64_t state_[4];
};

}  // namespace sprs
