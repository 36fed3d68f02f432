#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace polaris {

// Deterministic random source. Draws are derived from raw mt19937_64 output
// (which the standard pins down bit-for-bit), so seeded streams replay
// identically across platforms and stdlib versions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    double exponential(double mean) {
        // 1 - u lies in (0, 1], so the log is finite.
        return -mean * std::log(1.0 - uniform());
    }

    std::uint64_t next_u64() { return gen_(); }

private:
    std::mt19937_64 gen_;
};

}  // namespace polaris
