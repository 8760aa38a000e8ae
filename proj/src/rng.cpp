#include "qmxw/rng.hpp"

#include <cmath>

namespace qmxw {

Vec3 Rng::next_in_ball(double radius) {
    // Direction: rejection sampling from the cube keeps the generator simple
    // and the acceptance ratio (~0.52) makes long rejection runs negligible.
    for (;;) {
        Vec3 v{next_in(-1.0, 1.0), next_in(-1.0, 1.0), next_in(-1.0, 1.0)};
        const double n2 = norm2(v);
        if (n2 > 1.0 || n2 < 1e-12) continue;
        const double r = radius * std::cbrt(next_unit());
        return (r / std::sqrt(n2)) * v;
    }
}

}  // namespace qmxw
