#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "qmxw/geometry.hpp"
#include "qmxw/rng.hpp"

using namespace qmxw;

namespace {

BoxDomain unit_box(int cells = 8) {
    BoxDomain box;
    box.corner = {0, 0, 0};
    box.extent = {1, 1, 1};
    box.cells[0] = box.cells[1] = box.cells[2] = cells;
    box.x0 = {0.5, 0.5, 0.5};
    return box;
}

}  // namespace

TEST_CASE("multiplier is x - x0") {
    BoxDomain box = unit_box();
    const Vec3 zero = box.multiplier(box.x0);
    CHECK(norm(zero) == 0.0);
    const Vec3 m = box.multiplier({1.0, 0.5, 0.5});
    CHECK(m.x == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(m.y == 0.0);
    CHECK(m.z == 0.0);
}

TEST_CASE("multiplier is translation equivariant") {
    BoxDomain box = unit_box();
    BoxDomain shifted = box;
    const Vec3 c{1.5, -2.0, 0.25};
    shifted.corner += c;
    shifted.x0 += c;
    Rng rng(11);
    for (int i = 0; i < 50; ++i) {
        const Vec3 x{rng.next_unit(), rng.next_unit(), rng.next_unit()};
        const Vec3 a = box.multiplier(x);
        const Vec3 b = shifted.multiplier(x + c);
        CHECK(norm(a - b) <= 1e-14);
    }
}

TEST_CASE("star-shape margin on boxes") {
    CHECK(check_star_shaped(unit_box()) == doctest::Approx(0.5).epsilon(1e-15));

    BoxDomain wide = unit_box();
    wide.extent = {2, 1, 1};
    wide.x0 = {1.0, 0.5, 0.5};
    CHECK(check_star_shaped(wide) == doctest::Approx(0.5).epsilon(1e-15));

    BoxDomain off = unit_box();
    off.x0 = {0.1, 0.5, 0.5};
    CHECK(check_star_shaped(off) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("x0 on the boundary is rejected before the star-shape check") {
    BoxDomain bad = unit_box();
    bad.x0 = {0.0, 0.5, 0.5};
    CHECK_THROWS_AS(check_star_shaped(bad), Error);
}

TEST_CASE("J matrices match the cross product and the display convention") {
    const Mat33 j3 = J_of({0, 0, 1});
    CHECK(j3(0, 1) == -1.0);
    CHECK(j3(1, 0) == 1.0);
    CHECK(j3(0, 0) == 0.0);
    CHECK(j3(2, 2) == 0.0);

    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
        const Vec3 xi = rng.next_in_ball(2.0);
        const Vec3 w = rng.next_in_ball(2.0);
        CHECK(norm(J_of(xi) * w - cross(xi, w)) <= 1e-14);
    }

    // Linearity.
    for (int i = 0; i < 20; ++i) {
        const Vec3 a = rng.next_in_ball(1.0), b = rng.next_in_ball(1.0);
        const double s = rng.next_in(-2, 2), t = rng.next_in(-2, 2);
        const Mat33 lhs = J_of(s * a + t * b);
        const Mat33 rhs = s * J_of(a) + t * J_of(b);
        CHECK(max_abs_entry(lhs - rhs) <= 1e-14);
    }
}

TEST_CASE("J of the normal annihilates the normal") {
    BoxDomain box = unit_box();
    BoundaryFrame bf(box);
    for (const auto& bn : bf.nodes()) {
        const Vec3 nu = bf.frame(bn.face).nu;
        CHECK(norm(J_of(nu) * nu) == 0.0);
    }
}

TEST_CASE("R is the tangent-plane inverse of J and kills the kernel") {
    Rng rng(17);
    for (int i = 0; i < 50; ++i) {
        Vec3 nu = rng.next_in_ball(1.0);
        const double n = norm(nu);
        if (n < 1e-6) continue;
        nu = (1.0 / n) * nu;
        const Mat33 r = R_of(nu);
        CHECK(norm(r * nu) <= 1e-14);
        // R J(nu) w = w for tangential w; brute force via J(nu)^2 = nu nu^T - I.
        const Vec3 raw = rng.next_in_ball(1.0);
        const Vec3 w = raw - dot(raw, nu) * nu;
        CHECK(norm(r * (J_of(nu) * w) - w) <= 1e-13);
    }
    // e3: R J(e3) tau = tau for both coordinate tangents.
    const Mat33 r = R_of({0, 0, 1});
    CHECK(norm(r * (J_of(Vec3{0, 0, 1}) * Vec3{1, 0, 0}) - Vec3{1, 0, 0}) <= 1e-15);
    CHECK(norm(r * (J_of(Vec3{0, 0, 1}) * Vec3{0, 1, 0}) - Vec3{0, 1, 0}) <= 1e-15);
    CHECK_THROWS_AS(R_of({0, 0, 1.1}), Error);
}

TEST_CASE("tangential traces") {
    const Vec3 u{1, 2, 3};
    const Vec3 nu{0, 0, 1};
    const Vec3 tr = tangential_trace(u, nu);
    CHECK(norm(tr - Vec3{2, -1, 0}) <= 1e-15);
    const Vec3 tc = tangential_component(u, nu);
    CHECK(norm(tc - Vec3{1, 2, 0}) <= 1e-15);

    CHECK(norm(tangential_trace(nu, nu)) == 0.0);
    CHECK(norm(tangential_component(nu, nu)) <= 1e-15);

    Rng rng(3);
    for (int i = 0; i < 30; ++i) {
        Vec3 n = rng.next_in_ball(1.0);
        if (norm(n) < 1e-6) continue;
        n = (1.0 / norm(n)) * n;
        Vec3 w = rng.next_in_ball(1.0);
        w = w - dot(w, n) * n;
        CHECK(norm(tangential_component(w, n) - w) <= 1e-14);
    }
}

TEST_CASE("frames are orthonormal right-handed and decompose vectors") {
    BoxDomain box = unit_box(5);
    BoundaryFrame bf(box);
    Rng rng(99);
    for (int f = 0; f < 6; ++f) {
        const FaceFrame& fr = bf.frame(f);
        CHECK(std::abs(norm(fr.nu) - 1.0) <= 1e-15);
        CHECK(std::abs(dot(fr.tau1, fr.nu)) <= 1e-15);
        CHECK(std::abs(dot(fr.tau2, fr.nu)) <= 1e-15);
        CHECK(norm(cross(fr.tau1, fr.tau2) - fr.nu) <= 1e-14);
        const Vec3 u = rng.next_in_ball(2.0);
        const Vec3 rebuilt =
            dot(u, fr.nu) * fr.nu + dot(u, fr.tau1) * fr.tau1 + dot(u, fr.tau2) * fr.tau2;
        CHECK(norm(rebuilt - u) <= 1e-14);
    }
}

TEST_CASE("face-wise boundary quadrature sums to the surface area") {
    BoxDomain box = unit_box(6);
    box.extent = {1.0, 2.0, 0.5};
    box.x0 = {0.5, 1.0, 0.25};
    BoundaryFrame bf(box);
    const double area = 2.0 * (1.0 * 2.0 + 1.0 * 0.5 + 2.0 * 0.5);
    CHECK(bf.surface_measure() == doctest::Approx(area).epsilon(1e-13));
}
