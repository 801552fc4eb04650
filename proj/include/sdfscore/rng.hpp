#pragma once

#include <cmath>
#include <cstdint>

#include "sdfscore/field.hpp"

namespace sdfscore {

// Counter-based pseudo-random generator. Each draw hashes (key, counter),
// so state is two words and streams can be split without coordination:
// split(i) derives a child key through a separate mixing domain. All
// stochastic operations in the library take one of these explicitly.
class Rng {
public:
    explicit Rng(uint64_t seed) : key_(seed) {}

    uint64_t next_u64() { return mix(key_ + 0x9E3779B97F4A7C15ULL, counter_++); }

    // Uniform in (0,1]; never returns 0 so log() stays finite.
    double uniform01() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; two uniforms per draw.
    double normal() {
        double u1 = uniform01();
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    // Independent child stream; deterministic in (key, stream).
    Rng split(uint64_t stream) const { return Rng(mix(key_ ^ 0xA5A5A5A55A5A5A5AULL, stream)); }

    Field normal_field(int width, int height) {
        Field z(width, height);
        for (double& v : z.values) v = normal();
        return z;
    }

private:
    static uint64_t mix(uint64_t k, uint64_t c) {
        uint64_t z = k + c * 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }

    uint64_t key_ = 0;
    uint64_t counter_ = 0;
};

}  // namespace sdfscore
