#pragma once

#include <cmath>
#include <cstdint>

namespace ppide {

// Counter-based random number generator.  Every draw is a pure function of
// (seed, path index, step index, stream tag, draw index), so simulations are
// bit-reproducible regardless of evaluation order and of how work is split
// across paths.
//
// Mixing uses the splitmix64 finalizer chained over the key words; the output
// quality is more than adequate for Monte Carlo at desk scale.
class CounterRng {
public:
    // Stream tags keep the independent noise sources of one (path, step) cell
    // from colliding.
    enum Stream : std::uint64_t {
        Gauss = 1,     // Brownian increments
        JumpTime = 2,  // exponential inter-arrival clocks
        JumpMark = 3,  // which jump atom fired
        Aux = 4,       // anything else (antithetics, subsampling, ...)
    };

    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    // Uniform draw in the open interval (0, 1).
    double uniform(std::uint64_t path, std::uint64_t step,
                   std::uint64_t stream, std::uint64_t k) const {
        const std::uint64_t bits = mix(path, step, stream, k);
        // 53 high bits -> [0,1); nudge 0 to the smallest representable value
        // so that log() stays finite.
        double u = static_cast<double>(bits >> 11) * 0x1.0p-53;
        if (u <= 0.0) u = 0x1.0p-53;
        return u;
    }

    // Standard normal via Box-Muller; each index k burns two uniform draws.
    double normal(std::uint64_t path, std::uint64_t step,
                  std::uint64_t stream, std::uint64_t k) const {
        const double u1 = uniform(path, step, stream, 2 * k);
        const double u2 = uniform(path, step, stream, 2 * k + 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    // Exponential with the given rate.
    double exponential(std::uint64_t path, std::uint64_t step,
                       std::uint64_t stream, std::uint64_t k, double rate) const {
        return -std::log(uniform(path, step, stream, k)) / rate;
    }

private:
    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::uint64_t mix(std::uint64_t a, std::uint64_t b,
                      std::uint64_t c, std::uint64_t d) const {
        std::uint64_t x = splitmix64(seed_ ^ 0x632be59bd9b4e019ULL);
        x = splitmix64(x ^ a);
        x = splitmix64(x ^ b);
        x = splitmix64(x ^ c);
        x = splitmix64(x ^ d);
        return x;
    }

    std::uint64_t seed_;
};

} // namespace ppide
