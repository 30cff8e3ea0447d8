#pragma once

#include <cmath>
#include <cstdint>

namespace gevlab {

// Counter-based generator: every draw is a pure function of (seed, stream,
// counter), so sampling order and thread layout cannot change the values.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : key_(mix64(seed ^ mix64(stream))) {}

    static std::uint64_t mix64(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t bits(std::uint64_t counter) const {
        return mix64(mix64(key_ + counter));
    }

    // uniform in [0, 1)
    double uniform01(std::uint64_t counter) const {
        return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
    }

    // uniform in [lo, hi)
    double uniform(std::uint64_t counter, double lo, double hi) const {
        return lo + (hi - lo) * uniform01(counter);
    }

    // log-uniform over [lo, hi], lo > 0
    double log_uniform(std::uint64_t counter, double lo, double hi) const {
        return std::exp(uniform(counter, std::log(lo), std::log(hi)));
    }

    // +1 or -1 with equal probability
    double sign(std::uint64_t counter) const {
        return (bits(counter) & 1ULL) ? 1.0 : -1.0;
    }

    std::uint64_t key() const { return key_; }

private:
    std::uint64_t key_;
};

} // namespace gevlab
