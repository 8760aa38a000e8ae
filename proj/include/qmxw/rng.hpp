#ifndef QMXW_RNG_HPP
#define QMXW_RNG_HPP

#include <cstdint>

#include "qmxw/vec3.hpp"

namespace qmxw {

/// splitmix64 generator. Deterministic across platforms and compilers, which
/// keeps sampler-based certification reports bit-reproducible for a seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double next_in(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    /// Uniform in the closed ball of the given radius (rejection-free:
    /// direction from normalized cube samples plus radial cdf).
    Vec3 next_in_ball(double radius);

private:
    std::uint64_t state_;
};

}  // namespace qmxw

#endif
