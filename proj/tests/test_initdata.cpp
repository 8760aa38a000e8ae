#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "qmxw/initdata.hpp"
#include "qmxw/rng.hpp"
#include "qmxw/solver.hpp"

using namespace qmxw;

namespace {

BoxDomain make_box(int cells) {
    BoxDomain b;
    b.cells[0] = b.cells[1] = b.cells[2] = cells;
    return b;
}

struct Lab {
    BoxDomain box;
    Workers workers;
    SbpOperators ops;
    BoundaryFrame frames;

    explicit Lab(int cells)
        : box(make_box(cells)), workers(1), ops(box, workers), frames(box) {}
};

double bump(const Vec3& x) {
    auto b1 = [](double s) {
        const double r = (s - 0.5) / 0.25;
        const double r2 = r * r;
        return r2 >= 1.0 ? 0.0 : std::exp(1.0 - 1.0 / (1.0 - r2));
    };
    return b1(x.x) * b1(x.y) * b1(x.z);
}

}  // namespace

TEST_CASE("compatibility fields for zero and linear data") {
    Lab lab(8);
    const std::size_t n = lab.ops.node_count();

    SUBCASE("zero data gives zero fields") {
        auto law = make_kerr_isotropic(1, 1, 1, 1);
        InitialData data;
        data.E0.assign(n, Vec3{});
        data.H0.assign(n, Vec3{});
        build_compat_fields(lab.ops, *law, data);
        for (const Vec3& v : data.E1) CHECK(norm(v) == 0.0);
        for (const Vec3& v : data.H2) CHECK(norm(v) == 0.0);
    }

    SUBCASE("identity media reduce to iterated curls") {
        auto law = make_constant_isotropic(1, 1);
        InitialData data;
        data.E0.resize(n);
        data.H0.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const Vec3 x = lab.box.position(i);
            data.E0[i] = bump(x) * Vec3{1, 0.5, -0.25};
            data.H0[i] = bump(x) * Vec3{-0.5, 1, 0.75};
        }
        build_compat_fields(lab.ops, *law, data);
        Field3 curlH0, curlE0, curlH1, curlE1;
        lab.ops.curl(data.H0, curlH0);
        lab.ops.curl(data.E0, curlE0);
        lab.ops.curl(data.H1, curlH1);
        lab.ops.curl(data.E1, curlE1);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(norm(data.E1[i] - curlH0[i]) <= 1e-14);
            CHECK(norm(data.H1[i] + curlE0[i]) <= 1e-14);
            CHECK(norm(data.E2[i] - curlH1[i]) <= 1e-12);
            CHECK(norm(data.H2[i] + curlE1[i]) <= 1e-12);
        }
    }

    SUBCASE("constant-direction Kerr field matches the closed form") {
        // E0 = (a, 0, 0) constant: lin_eps = diag(1+3a^2, 1+a^2, 1+a^2),
        // so E1 = lin^{-1} curl H0 nodewise.
        auto law = make_kerr_isotropic(1, 1, 1, 0);
        const double a = 0.2;
        InitialData data;
        data.E0.assign(n, Vec3{a, 0, 0});
        data.H0.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const Vec3 x = lab.box.position(i);
            data.H0[i] = bump(x) * Vec3{0.3, -1.0, 0.6};
        }
        build_compat_fields(lab.ops, *law, data);
        Field3 curlH0;
        lab.ops.curl(data.H0, curlH0);
        const double dxx = 1.0 + 3.0 * a * a;
        const double dyy = 1.0 + a * a;
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(data.E1[i].x == doctest::Approx(curlH0[i].x / dxx).epsilon(1e-12));
            CHECK(data.E1[i].y == doctest::Approx(curlH0[i].y / dyy).epsilon(1e-12));
            CHECK(data.E1[i].z == doctest::Approx(curlH0[i].z / dyy).epsilon(1e-12));
        }
    }
}

TEST_CASE("boundary compatibility residual") {
    Lab lab(8);
    auto lambda = make_impedance_scalar(1.0);
    const std::size_t n = lab.ops.node_count();

    SUBCASE("zero data") {
        CHECK(boundary_condition_residual(lab.ops, lab.frames, *lambda, Field3(n, Vec3{}),
                                          Field3(n, Vec3{})) == 0.0);
    }

    SUBCASE("interior-supported data") {
        Field3 E(n), H(n);
        for (std::size_t i = 0; i < n; ++i) {
            const Vec3 x = lab.box.position(i);
            E[i] = bump(x) * Vec3{1, 2, 3};
            H[i] = bump(x) * Vec3{3, 2, 1};
        }
        CHECK(boundary_condition_residual(lab.ops, lab.frames, *lambda, E, H) == 0.0);
    }

    SUBCASE("deliberately incompatible data matches a direct quadrature") {
        Field3 E(n, Vec3{0.4, -0.2, 0.7}), H(n, Vec3{-0.1, 0.3, 0.9});
        const double got = boundary_condition_residual(lab.ops, lab.frames, *lambda, E, H);
        double acc = 0.0;
        for (const auto& bn : lab.frames.nodes()) {
            const Vec3 nu = lab.frames.frame(bn.face).nu;
            const Vec3 g = cross(H[bn.node], nu) + cross(cross(E[bn.node], nu), nu);
            acc += bn.w_surf * norm2(g);
        }
        CHECK(got == doctest::Approx(std::sqrt(acc)).epsilon(1e-14));
        CHECK(got > 0.1);
    }
}

TEST_CASE("solenoidal projection") {
    Lab lab(8);
    const std::size_t n = lab.ops.node_count();

    SUBCASE("discrete curls are already solenoidal") {
        auto law = make_constant_isotropic(1, 1);
        Field3 pot(n);
        for (std::size_t i = 0; i < n; ++i)
            pot[i] = bump(lab.box.position(i)) * Vec3{0.2, 1.0, -0.5};
        Field3 field;
        lab.ops.curl(pot, field);
        const Field3 before = field;
        const auto res = project_solenoidal(lab.ops, *law, Tensor::eps, field, 1e-10);
        CHECK(res.sweeps == 1);
        for (std::size_t i = 0; i < n; ++i) CHECK(norm(field[i] - before[i]) == 0.0);
    }

    SUBCASE("pure gradients are removed almost entirely") {
        auto law = make_constant_isotropic(1, 1);
        ScalarField psi(n);
        for (std::size_t i = 0; i < n; ++i) psi[i] = bump(lab.box.position(i));
        Field3 field;
        lab.ops.grad(psi, field);
        const double before = lab.ops.norm_w(field);
        REQUIRE(before > 1e-3);
        const auto res =
            project_solenoidal(lab.ops, *law, Tensor::eps, field, 1e-10 * (1.0 + before));
        CHECK(res.residual <= 1e-10 * (1.0 + before));
        CHECK(lab.ops.norm_w(field) <= 1e-8 * before);
    }

    SUBCASE("Kerr projection converges in a few sweeps and is idempotent") {
        auto law = make_kerr_isotropic(1, 1, 1, 0);
        Field3 pot(n), field;
        for (std::size_t i = 0; i < n; ++i)
            pot[i] = bump(lab.box.position(i)) * Vec3{0.0, 0.3, 1.0};
        lab.ops.curl(pot, field);
        double peak = 0.0;
        for (const Vec3& v : field) peak = std::max(peak, norm(v));
        for (Vec3& v : field) v *= 0.05 / peak;
        const double tol = 1e-11;
        const auto res = project_solenoidal(lab.ops, *law, Tensor::eps, field, tol);
        CHECK(res.sweeps <= 5);
        CHECK(res.residual <= tol);
        const Field3 once = field;
        const auto res2 = project_solenoidal(lab.ops, *law, Tensor::eps, field, tol);
        CHECK(res2.residual <= tol);
        double drift = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            drift = std::max(drift, norm(field[i] - once[i]));
        CHECK(drift <= 10.0 * tol);
    }
}

TEST_CASE("scenario construction") {
    Lab lab(8);
    auto lambda = make_impedance_scalar(1.0);

    SUBCASE("zero amplitude gives zero data") {
        auto law = make_constant_isotropic(1, 1);
        InitialParams params;
        params.amplitude = 0.0;
        const InitialData data = make_scenario(lab.ops, lab.frames, *law, *lambda, params);
        for (const Vec3& v : data.E0) CHECK(norm(v) == 0.0);
        CHECK(data.r_proxy == 0.0);
    }

    SUBCASE("bump data is compatible to round-off and solenoidal") {
        // The order-2 compatibility field is the data curled three times, so
        // its support is three node layers wider than the potential's; a
        // 16-cell axis leaves enough margin for all traces to vanish.
        Lab lab16(16);
        auto law = make_constant_isotropic(1, 1);
        InitialParams params;
        params.amplitude = 0.5;
        const InitialData data = make_scenario(lab16.ops, lab16.frames, *law, *lambda, params);
        CHECK(data.compat_residual[0] <= 1e-12);
        CHECK(data.compat_residual[1] <= 1e-12);
        CHECK(data.compat_residual[2] <= 1e-12);
        ScalarField div;
        lab16.ops.div(data.E0, div);
        CHECK(lab16.ops.norm_w(div) <= 1e-11);
        double peak = 0.0;
        for (std::size_t i = 0; i < data.E0.size(); ++i)
            peak = std::max({peak, norm(data.E0[i]), norm(data.H0[i])});
        CHECK(peak == doctest::Approx(0.5).epsilon(1e-12));
    }

    SUBCASE("random data is bit-identical across worker counts and repeats") {
        auto law = make_kerr_isotropic(1, 0.5, 1, 0.5);
        InitialParams params;
        params.kind = InitialKind::random_smooth;
        params.amplitude = 0.05;
        params.seed = 987;
        const InitialData a = make_scenario(lab.ops, lab.frames, *law, *lambda, params);
        const InitialData b = make_scenario(lab.ops, lab.frames, *law, *lambda, params);
        Workers w8(8);
        SbpOperators ops8(lab.box, w8);
        const InitialData c = make_scenario(ops8, lab.frames, *law, *lambda, params);
        for (std::size_t i = 0; i < a.E0.size(); ++i) {
            CHECK(a.E0[i].x == b.E0[i].x);
            CHECK(a.E0[i].x == c.E0[i].x);
            CHECK(a.H2[i].z == c.H2[i].z);
        }
    }

    SUBCASE("unreasonable widths are rejected") {
        auto law = make_constant_isotropic(1, 1);
        InitialParams params;
        params.width_frac = 0.6;
        CHECK_THROWS_AS(make_scenario(lab.ops, lab.frames, *law, *lambda, params), Error);
    }
}

TEST_CASE("time derivatives at t = 0 are consistent with the dynamics") {
    // Difference quotients of the stepped solution converge to the formal
    // derivatives built from the data: first order for the forward quotient,
    // at least that for the symmetric second quotient.
    Lab lab(6);
    auto law = make_kerr_isotropic(1.0, 0.5, 1.0, 0.25);
    auto lambda = make_impedance_scalar(1.0);
    MaxwellSystem sys(lab.ops, lab.frames, *law, *lambda, 1.0);
    InitialParams params;
    params.amplitude = 0.05;
    params.seed = 3;
    const InitialData data = make_scenario(lab.ops, lab.frames, *law, *lambda, params);

    FieldState s0;
    s0.t = 0.0;
    s0.E = data.E0;
    s0.H = data.H0;
    const std::size_t n = data.E0.size();
    s0.D.resize(n);
    s0.B.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 x = lab.box.position(i);
        s0.D[i] = law->eval_eps(x, data.E0[i]) * data.E0[i];
        s0.B[i] = law->eval_mu(x, data.H0[i]) * data.H0[i];
    }

    std::vector<double> err1, err2;
    for (int level = 0; level < 3; ++level) {
        const double dt = 0.4 * lab.box.min_spacing() / (1 << level);
        SolverConfig cfg;
        cfg.dt = dt;
        cfg.newton_tol = 1e-14;
        Stepper fwd(sys, cfg, s0);
        fwd.step(dt);
        Stepper bwd(sys, cfg, s0);
        bwd.step(-dt);
        Field3 d1(n), d2(n);
        for (std::size_t i = 0; i < n; ++i) {
            d1[i] = (1.0 / dt) * (fwd.state().E[i] - data.E0[i]) - data.E1[i];
            d2[i] = (1.0 / (dt * dt)) *
                        (fwd.state().E[i] - 2.0 * data.E0[i] + bwd.state().E[i]) -
                    data.E2[i];
        }
        err1.push_back(lab.ops.norm_w(d1));
        err2.push_back(lab.ops.norm_w(d2));
    }
    CHECK(std::log2(err1[0] / err1[1]) >= 0.9);
    CHECK(std::log2(err1[1] / err1[2]) >= 0.9);
    CHECK(std::log2(err2[0] / err2[1]) >= 0.9);
}
