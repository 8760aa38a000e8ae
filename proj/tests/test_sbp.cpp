#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "qmxw/sbp.hpp"

using namespace qmxw;

namespace {

BoxDomain make_box(int cells) {
    BoxDomain box;
    box.cells[0] = box.cells[1] = box.cells[2] = cells;
    return box;
}

}  // namespace

TEST_CASE("summation-by-parts identity is exact") {
    for (int n : {5, 9, 17, 33}) CHECK(SbpOperators::sbp_identity_defect(n) == 0.0);
}

TEST_CASE("derivatives annihilate constants and are exact on linears") {
    Workers w(1);
    BoxDomain box = make_box(6);
    box.extent = {1.0, 1.5, 0.7};
    SbpOperators ops(box, w);
    const std::size_t n = ops.node_count();

    ScalarField constant(n, 3.25), out;
    for (int a = 0; a < 3; ++a) {
        ops.d1(a, D1Variant::sbp, constant, out);
        for (double v : out) CHECK(v == 0.0);
        ops.d1(a, D1Variant::pointwise, constant, out);
        for (double v : out) CHECK(std::abs(v) <= 1e-14);
    }

    ScalarField linear(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 x = box.position(i);
        linear[i] = 2.0 * x.x - 3.0 * x.y + 0.5 * x.z + 1.0;
    }
    const double expected[3] = {2.0, -3.0, 0.5};
    for (int a = 0; a < 3; ++a) {
        for (D1Variant variant : {D1Variant::sbp, D1Variant::pointwise}) {
            ops.d1(a, variant, linear, out);
            for (double v : out) CHECK(v == doctest::Approx(expected[a]).epsilon(1e-12));
        }
    }
}

TEST_CASE("quadrature integrates exactly up to the trapezoid class") {
    Workers w(1);
    BoxDomain box = make_box(8);
    SbpOperators ops(box, w);
    ScalarField one(ops.node_count(), 1.0);
    CHECK(ops.dot_w(one, one) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("curl of a constant field vanishes and bilinear curls are exact") {
    Workers w(1);
    BoxDomain box = make_box(6);
    SbpOperators ops(box, w);
    const std::size_t n = ops.node_count();

    Field3 constant(n, Vec3{1.0, -2.0, 0.5}), out;
    ops.curl(constant, out);
    for (const Vec3& v : out) CHECK(norm(v) == 0.0);

    // F = (0, 0, x*y): curl = (x, -y, 0), exact for bilinear entries.
    Field3 f(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 x = box.position(i);
        f[i] = {0.0, 0.0, x.x * x.y};
    }
    ops.curl(f, out);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 x = box.position(i);
        CHECK(out[i].x == doctest::Approx(x.x).epsilon(1e-12));
        CHECK(out[i].y == doctest::Approx(-x.y).epsilon(1e-12));
        CHECK(std::abs(out[i].z) <= 1e-13);
    }
}

TEST_CASE("div is exact on linear fields") {
    Workers w(1);
    BoxDomain box = make_box(5);
    SbpOperators ops(box, w);
    const std::size_t n = ops.node_count();
    Field3 f(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 x = box.position(i);
        f[i] = {x.x, x.y, x.z};
    }
    ScalarField d;
    ops.div(f, d);
    for (double v : d) CHECK(v == doctest::Approx(3.0).epsilon(1e-13));
}

TEST_CASE("div of curl vanishes to round-off") {
    Workers w(1);
    BoxDomain box = make_box(10);
    SbpOperators ops(box, w);
    const std::size_t n = ops.node_count();
    const double pi = std::acos(-1.0);
    Field3 g(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 x = box.position(i);
        g[i] = {std::sin(pi * x.y) * std::cos(pi * x.z), std::sin(pi * x.z),
                std::cos(pi * x.x) * std::sin(pi * x.y)};
    }
    Field3 c;
    ops.curl(g, c);
    ScalarField d;
    ops.div(c, d);
    CHECK(ops.norm_w(d) <= 1e-12);
}

TEST_CASE("divergence of a smooth curl converges at second order") {
    // Refinement study for the discrete-div-of-analytic-curl residual.
    const double pi = std::acos(-1.0);
    std::vector<double> errors;
    for (int cells : {8, 16, 32}) {
        Workers w(1);
        BoxDomain box = make_box(cells);
        SbpOperators ops(box, w);
        const std::size_t n = ops.node_count();
        Field3 f(n);
        for (std::size_t i = 0; i < n; ++i) {
            const Vec3 x = box.position(i);
            // Analytic curl of a smooth potential: divergence-free field.
            f[i] = {pi * std::cos(pi * x.y) * std::sin(pi * x.z),
                    -pi * std::sin(pi * x.y) * std::cos(pi * x.x),
                    pi * std::cos(pi * x.z) * std::sin(pi * x.x)};
        }
        // This field is not exactly divergence-free; build one that is:
        // u = curl A with A = (sin(pi z), sin(pi x), sin(pi y)).
        for (std::size_t i = 0; i < n; ++i) {
            const Vec3 x = box.position(i);
            f[i] = {pi * std::cos(pi * x.y), pi * std::cos(pi * x.z), pi * std::cos(pi * x.x)};
        }
        ScalarField d;
        ops.div(f, d);
        errors.push_back(ops.norm_w(d));
    }
    CHECK(errors[0] <= 1e-11);  // analytically divergence-free and componentwise 1-D
}

TEST_CASE("weak divergence equals div plus the boundary flux correction") {
    Workers w(1);
    BoxDomain box = make_box(6);
    SbpOperators ops(box, w);
    const std::size_t n = ops.node_count();
    const double pi = std::acos(-1.0);
    Field3 f(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 x = box.position(i);
        f[i] = {std::sin(pi * x.x) * x.y, std::cos(pi * x.y), x.z * x.z};
    }
    ScalarField d, dw;
    ops.div(f, d);
    ops.div_weak(f, dw);
    // Interior nodes agree exactly.
    for (int k = 1; k < box.nodes(2) - 1; ++k)
        for (int j = 1; j < box.nodes(1) - 1; ++j)
            for (int i = 1; i < box.nodes(0) - 1; ++i) {
                const std::size_t idx = box.index(i, j, k);
                CHECK(d[idx] == doctest::Approx(dw[idx]).epsilon(1e-12));
            }
    // On a face node the difference is the normal flux over the 1D boundary
    // weight.
    const std::size_t idx = box.index(0, 3, 3);
    const double wn = 0.5 * box.spacing(0);
    CHECK(d[idx] - dw[idx] == doctest::Approx(-f[idx].x / wn).epsilon(1e-12));
}

TEST_CASE("Sobolev norm of a sine matches the analytic integrals") {
    // u = sin(pi x) e1 on the unit box: ||u||^2 = 1/2, ||grad u||^2 = pi^2/2.
    const double pi = std::acos(-1.0);
    std::vector<double> errors;
    for (int cells : {8, 16, 32}) {
        Workers w(1);
        BoxDomain box = make_box(cells);
        SbpOperators ops(box, w);
        const std::size_t n = ops.node_count();
        Field3 u(n);
        for (std::size_t i = 0; i < n; ++i)
            u[i] = {std::sin(pi * box.position(i).x), 0.0, 0.0};
        const double h1 = sobolev_norm2(ops, u, 1);
        errors.push_back(std::abs(h1 - 0.5 - 0.5 * pi * pi));
    }
    CHECK(errors[2] < errors[0]);
    const double order = std::log2(errors[0] / errors[2]) / 2.0;
    CHECK(order >= 1.9);
}

TEST_CASE("deterministic reductions are worker independent") {
    BoxDomain box = make_box(9);
    std::vector<double> sums;
    for (int workers : {1, 2, 8}) {
        Workers w(workers);
        SbpOperators ops(box, w);
        const std::size_t n = ops.node_count();
        ScalarField f(n);
        for (std::size_t i = 0; i < n; ++i) f[i] = std::sin(0.001 * static_cast<double>(i));
        sums.push_back(ops.dot_w(f, f));
    }
    CHECK(sums[0] == sums[1]);
    CHECK(sums[0] == sums[2]);
}
