#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dergrid {

// Seeded random source with hand-rolled transforms. std::mt19937_64 output is
// fully specified by the standard; the distribution classes are not, so the
// uniform/normal/exponential transforms live here to keep runs bit-identical
// across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t bits() { return gen_(); }

    // [0, 1)
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // (0, 1], safe to pass to log()
    double uniform01_open0() { return static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller, one value per call (no cached second value, so the mapping
    // from generator state to output stream is stateless).
    double normal() {
        const double u1 = uniform01_open0();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double std) { return mean + std * normal(); }

    double exponential(double rate) { return -std::log(uniform01_open0()) / rate; }

    // Random integer in [0, n)
    std::uint64_t below(std::uint64_t n) { return gen_() % n; }

private:
    std::mt19937_64 gen_;
};

} // namespace dergrid
