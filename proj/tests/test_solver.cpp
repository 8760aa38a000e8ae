#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "qmxw/initdata.hpp"
#include "qmxw/rng.hpp"
#include "qmxw/solver.hpp"

using namespace qmxw;

namespace {

BoxDomain make_box(int cells) {
    BoxDomain box;
    box.cells[0] = box.cells[1] = box.cells[2] = cells;
    return box;
}

struct Lab {
    BoxDomain box;
    Workers workers;
    SbpOperators ops;
    BoundaryFrame frames;

    explicit Lab(int cells, int nworkers = 1)
        : box(make_box(cells)), workers(nworkers), ops(box, workers), frames(box) {}
};

FieldState state_from(const Lab& lab, const MaterialLaw& law, const Field3& E,
                      const Field3& H) {
    FieldState s;
    s.t = 0.0;
    s.E = E;
    s.H = H;
    const std::size_t n = E.size();
    s.D.resize(n);
    s.B.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 x = lab.box.position(i);
        s.D[i] = law.eval_eps(x, E[i]) * E[i];
        s.B[i] = law.eval_mu(x, H[i]) * H[i];
    }
    return s;
}

// Interior bump supported well inside the box; vanishes with two clear node
// layers to spare on an 8^3 grid.
double bump(const Vec3& x) {
    auto b1 = [](double s) {
        const double r = (s - 0.5) / 0.25;
        const double r2 = r * r;
        return r2 >= 1.0 ? 0.0 : std::exp(1.0 - 1.0 / (1.0 - r2));
    };
    return b1(x.x) * b1(x.y) * b1(x.z);
}

}  // namespace

TEST_CASE("constitutive inversion") {
    SUBCASE("linear anisotropic law converges in one Newton step") {
        Mat33 a = Mat33::diag(2, 3, 4);
        a(0, 1) = a(1, 0) = 0.3;
        auto law = make_constant_anisotropic(a, Mat33::identity());
        const Vec3 d{0.4, -0.2, 0.9};
        const Vec3 e = constitutive_invert(*law, Tensor::eps, {0, 0, 0}, d, {0, 0, 0}, 1e-13, 1);
        CHECK(norm(a * e - d) <= 1e-12);
    }

    SUBCASE("Kerr scalar root matches a bisection oracle") {
        auto law = make_kerr_isotropic(1.0, 1.0, 1.0, 0.0);
        const Vec3 d{0.1, 0.0, 0.0};
        const Vec3 e =
            constitutive_invert(*law, Tensor::eps, {0, 0, 0}, d, {0, 0, 0}, 1e-14, 25);
        // Bisection for (1 + t^2) t = 0.1 to 1e-14.
        double lo = 0.0, hi = 0.1;
        while ((1.0 + hi * hi) * hi < 0.1) hi *= 1.5;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            ((1.0 + mid * mid) * mid < 0.1 ? lo : hi) = mid;
        }
        CHECK(e.x == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-12));
        CHECK(std::abs(e.y) <= 1e-15);
        CHECK(std::abs(e.z) <= 1e-15);
    }

    SUBCASE("zero target returns the zero root") {
        auto law = make_kerr_isotropic(1.0, 0.7, 1.0, 0.2);
        const Vec3 e =
            constitutive_invert(*law, Tensor::eps, {0, 0, 0}, {0, 0, 0}, {0, 0, 0}, 1e-14, 25);
        CHECK(norm(e) == 0.0);
    }

    SUBCASE("iteration count stays small inside half the positivity radius") {
        // All catalog laws converge within 5 Newton steps for |target| <=
        // delta/2 with warm-from-zero starts.
        std::vector<std::unique_ptr<MaterialLaw>> laws;
        laws.push_back(make_constant_isotropic(1, 1));
        laws.push_back(make_kerr_isotropic(1, 1, 1, 1));
        laws.push_back(make_kerr_anisotropic(Mat33::diag(1, 2, 3), 0.7, Mat33::identity(), 0.2));
        Rng rng(21);
        for (const auto& law : laws)
            for (int i = 0; i < 50; ++i) {
                const Vec3 xi = rng.next_in_ball(0.5);
                const Vec3 d = law->eval_eps({0.5, 0.5, 0.5}, xi) * xi;
                CHECK_NOTHROW(
                    constitutive_invert(*law, Tensor::eps, {0.5, 0.5, 0.5}, d, {0, 0, 0}, 1e-12, 5));
            }
    }

    SUBCASE("focusing Kerr fails beyond the fold") {
        auto law = make_kerr_isotropic(1.0, -2.0, 1.0, 0.0);
        // (1 - 2t^2) t has maximum ~0.2722 at t = 1/sqrt(6); a target beyond
        // it has no root on the small branch.
        CHECK_THROWS_AS(constitutive_invert(*law, Tensor::eps, {0, 0, 0}, {0.4, 0, 0},
                                            {0, 0, 0}, 1e-12, 50),
                        Error);
    }
}

TEST_CASE("boundary penalty structure") {
    Lab lab(8);
    auto law = make_constant_isotropic(1, 1);
    auto lambda = make_impedance_scalar(1.0);
    MaxwellSystem sys(lab.ops, lab.frames, *law, *lambda, 1.0);
    const std::size_t n = lab.ops.node_count();

    SUBCASE("interior-supported fields produce no flux") {
        Field3 E(n), H(n);
        for (std::size_t i = 0; i < n; ++i) {
            const Vec3 x = lab.box.position(i);
            E[i] = bump(x) * Vec3{1, 2, 3};
            H[i] = bump(x) * Vec3{-1, 0, 1};
        }
        Field3 add(n, Vec3{});
        double diss = 0, pen = 0, res2 = 0;
        sys.sat_boundary_flux(E, H, add, diss, pen, res2);
        for (const Vec3& v : add) CHECK(norm(v) == 0.0);
        CHECK(diss == 0.0);
        CHECK(pen == 0.0);
        CHECK(res2 == 0.0);
    }

    SUBCASE("exact impedance match on one face gives zero penalty there") {
        // Fields supported on the +z face interior: H_tan = -lambda (E x nu).
        Field3 E(n, Vec3{}), H(n, Vec3{});
        const int k = lab.box.nodes(2) - 1;
        const Vec3 nu{0, 0, 1};
        for (int j = 2; j < lab.box.nodes(1) - 2; ++j)
            for (int i = 2; i < lab.box.nodes(0) - 2; ++i) {
                const std::size_t idx = lab.box.index(i, j, k);
                E[idx] = {0.7, -0.3, 0.0};
                H[idx] = -1.0 * cross(E[idx], nu);
            }
        Field3 add(n, Vec3{});
        double diss = 0, pen = 0, res2 = 0;
        sys.sat_boundary_flux(E, H, add, diss, pen, res2);
        CHECK(res2 <= 1e-28);
        for (const Vec3& v : add) CHECK(norm(v) <= 1e-14);
        // The physical dissipation quadrature is still active.
        CHECK(diss > 0.0);
        // Energy rate collapses to -sum w |H_tan|^2 here, i.e. diss + pen =
        // sum w lambda e.e exactly when g = 0.
        CHECK(pen == doctest::Approx(-0.0).epsilon(1e-14));
    }

    SUBCASE("eigenfield dissipation quadrature matches the hand value") {
        // E along e2 on a single interior node of the +x face, H = 0. The
        // rotated trace E x nu points along -e3, so the dissipation form
        // picks the zz eigenvalue of lambda = diag(2, 3, 5).
        auto lam = make_impedance_diag(2.0, 3.0, 5.0);
        MaxwellSystem sys2(lab.ops, lab.frames, *law, *lam, 1.0);
        Field3 E(n, Vec3{}), H(n, Vec3{});
        const int i0 = lab.box.nodes(0) - 1;
        const std::size_t idx = lab.box.index(i0, 3, 4);
        E[idx] = {0.0, 0.5, 0.0};
        Field3 add(n, Vec3{});
        double diss = 0, pen = 0, res2 = 0;
        sys2.sat_boundary_flux(E, H, add, diss, pen, res2);
        const double h = lab.box.spacing(1);
        const double w_surf = h * h;  // interior face node
        const Vec3 e = cross(E[idx], Vec3{1, 0, 0});
        CHECK(norm(e - Vec3{0, 0, -0.5}) <= 1e-15);
        CHECK(diss == doctest::Approx(5.0 * norm2(e) * w_surf).epsilon(1e-13));
    }
}

TEST_CASE("zero state is an equilibrium") {
    Lab lab(6);
    auto law = make_kerr_isotropic(1, 1, 1, 1);
    auto lambda = make_impedance_scalar(1.0);
    MaxwellSystem sys(lab.ops, lab.frames, *law, *lambda, 1.0);
    const std::size_t n = lab.ops.node_count();
    FieldState s = state_from(lab, *law, Field3(n, Vec3{}), Field3(n, Vec3{}));
    SolverConfig cfg;
    cfg.t_final = 0.2;
    Stepper st(sys, cfg, s);
    for (int i = 0; i < 4; ++i) st.step();
    for (const Vec3& v : st.state().E) CHECK(norm(v) == 0.0);
    for (const Vec3& v : st.state().B) CHECK(norm(v) == 0.0);
}

TEST_CASE("one midpoint step matches the dense Crank-Nicolson oracle") {
    // Linear media: the scheme is exactly Crank-Nicolson in (E, H). Assemble
    // the dense semi-discrete operator on a 5^3-node grid by probing the rhs
    // with basis vectors, then solve (I - dt/2 L) y+ = (I + dt/2 L) y.
    Lab lab(4);
    auto law = make_constant_isotropic(1, 1);
    auto lambda = make_impedance_scalar(1.0);
    MaxwellSystem sys(lab.ops, lab.frames, *law, *lambda, 1.0);
    const std::size_t n = lab.ops.node_count();
    const std::size_t dim = 6 * n;

    auto apply_L = [&](const std::vector<double>& y, std::vector<double>& out) {
        Field3 E(n), H(n), dD(n), dB(n);
        for (std::size_t i = 0; i < n; ++i) {
            E[i] = {y[3 * i], y[3 * i + 1], y[3 * i + 2]};
            H[i] = {y[3 * (n + i)], y[3 * (n + i) + 1], y[3 * (n + i) + 2]};
        }
        double diss, pen, res2;
        sys.rhs(E, H, dD, dB, diss, pen, res2);
        out.resize(dim);
        for (std::size_t i = 0; i < n; ++i) {
            out[3 * i] = dD[i].x;
            out[3 * i + 1] = dD[i].y;
            out[3 * i + 2] = dD[i].z;
            out[3 * (n + i)] = dB[i].x;
            out[3 * (n + i) + 1] = dB[i].y;
            out[3 * (n + i) + 2] = dB[i].z;
        }
    };

    const double dt = 0.4 * lab.box.min_spacing();
    // Dense matrices of the CN system.
    std::vector<std::vector<double>> A(dim, std::vector<double>(dim, 0.0));
    std::vector<double> basis(dim, 0.0), col;
    for (std::size_t j = 0; j < dim; ++j) {
        basis[j] = 1.0;
        apply_L(basis, col);
        basis[j] = 0.0;
        for (std::size_t i = 0; i < dim; ++i) A[i][j] = col[i];
    }

    // Random initial state.
    Rng rng(33);
    std::vector<double> y0(dim);
    for (double& v : y0) v = rng.next_in(-1, 1);

    // rhs = (I + dt/2 A) y0; M = (I - dt/2 A).
    std::vector<double> rhs(dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) {
        double s = y0[i];
        for (std::size_t j = 0; j < dim; ++j) s += 0.5 * dt * A[i][j] * y0[j];
        rhs[i] = s;
    }
    std::vector<std::vector<double>> M(dim, std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t j = 0; j < dim; ++j) M[i][j] = -0.5 * dt * A[i][j];
        M[i][i] += 1.0;
    }
    // Gaussian elimination with partial pivoting.
    for (std::size_t c = 0; c < dim; ++c) {
        std::size_t p = c;
        for (std::size_t r = c + 1; r < dim; ++r)
            if (std::abs(M[r][c]) > std::abs(M[p][c])) p = r;
        std::swap(M[p], M[c]);
        std::swap(rhs[p], rhs[c]);
        const double piv = M[c][c];
        REQUIRE(std::abs(piv) > 1e-12);
        for (std::size_t r = c + 1; r < dim; ++r) {
            const double f = M[r][c] / piv;
            if (f == 0.0) continue;
            for (std::size_t k = c; k < dim; ++k) M[r][k] -= f * M[c][k];
            rhs[r] -= f * rhs[c];
        }
    }
    std::vector<double> yref(dim);
    for (std::size_t r = dim; r-- > 0;) {
        double s = rhs[r];
        for (std::size_t k = r + 1; k < dim; ++k) s -= M[r][k] * yref[k];
        yref[r] = s / M[r][r];
    }

    // Stepper result.
    Field3 E0(n), H0(n);
    for (std::size_t i = 0; i < n; ++i) {
        E0[i] = {y0[3 * i], y0[3 * i + 1], y0[3 * i + 2]};
        H0[i] = {y0[3 * (n + i)], y0[3 * (n + i) + 1], y0[3 * (n + i) + 2]};
    }
    FieldState s0 = state_from(lab, *law, E0, H0);
    SolverConfig cfg;
    cfg.dt = dt;
    cfg.newton_tol = 1e-14;
    Stepper st(sys, cfg, s0);
    st.step();

    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 eref{yref[3 * i], yref[3 * i + 1], yref[3 * i + 2]};
        const Vec3 href{yref[3 * (n + i)], yref[3 * (n + i) + 1], yref[3 * (n + i) + 2]};
        worst = std::max(worst, norm(st.state().E[i] - eref));
        worst = std::max(worst, norm(st.state().H[i] - href));
    }
    CHECK(worst <= 5e-10);
}

TEST_CASE("midpoint converges at second order in dt (Richardson)") {
    Lab lab(6);
    auto law = make_kerr_isotropic(1.0, 0.5, 1.0, 0.3);
    auto lambda = make_impedance_scalar(1.0);
    MaxwellSystem sys(lab.ops, lab.frames, *law, *lambda, 1.0);
    const std::size_t n = lab.ops.node_count();
    Field3 E0(n), H0(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 x = lab.box.position(i);
        E0[i] = 0.1 * bump(x) * Vec3{1.0, 0.5, -0.3};
        H0[i] = 0.1 * bump(x) * Vec3{0.2, -1.0, 0.4};
    }
    FieldState s0 = state_from(lab, *law, E0, H0);

    const double T = 0.2;
    auto advance = [&](double dt) {
        SolverConfig cfg;
        cfg.dt = dt;
        cfg.newton_tol = 1e-14;
        Stepper st(sys, cfg, s0);
        const long steps = std::lround(T / dt);
        for (long s = 0; s < steps; ++s) st.step();
        return st.state().E;
    };

    const Field3 ref = advance(T / 64);
    std::vector<double> errors;
    for (long steps : {4, 8, 16}) {
        const Field3 e = advance(T / static_cast<double>(steps));
        Field3 diff(n);
        for (std::size_t i = 0; i < n; ++i) diff[i] = e[i] - ref[i];
        errors.push_back(lab.ops.norm_w(diff));
    }
    const double order = std::log2(errors[1] / errors[2]);
    CHECK(order >= 1.9);
    CHECK(order <= 2.3);
}

TEST_CASE("midpoint is time-reversible") {
    Lab lab(6);
    auto law = make_kerr_isotropic(1.0, 0.5, 1.0, 0.0);
    auto lambda = make_impedance_scalar(1.0);
    MaxwellSystem sys(lab.ops, lab.frames, *law, *lambda, 1.0);
    const std::size_t n = lab.ops.node_count();
    Field3 E0(n), H0(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 x = lab.box.position(i);
        E0[i] = 0.05 * bump(x) * Vec3{1, 0, 0};
        H0[i] = 0.05 * bump(x) * Vec3{0, 1, 0};
    }
    FieldState s0 = state_from(lab, *law, E0, H0);
    SolverConfig cfg;
    cfg.newton_tol = 1e-14;
    Stepper st(sys, cfg, s0);
    const double dt = st.dt();
    st.step(dt);
    st.step(-dt);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, norm(st.state().E[i] - E0[i]));
    CHECK(worst <= 1e-11);
}

TEST_CASE("run-level behaviors") {
    SUBCASE("t_final = 0 produces exactly one snapshot") {
        Lab lab(5);
        auto law = make_constant_isotropic(1, 1);
        auto lambda = make_impedance_scalar(1.0);
        MaxwellSystem sys(lab.ops, lab.frames, *law, *lambda, 1.0);
        const std::size_t n = lab.ops.node_count();
        FieldState s = state_from(lab, *law, Field3(n, Vec3{}), Field3(n, Vec3{}));
        SolverConfig cfg;
        cfg.t_final = 0.0;
        struct Counter : SnapshotSink {
            int count = 0;
            void on_snapshot(const FieldState&, const StepAccount&) override { ++count; }
        } counter;
        run(sys, cfg, s, &counter);
        CHECK(counter.count == 1);
    }

    SUBCASE("hyperbolicity loss reports no convergence") {
        Lab lab(6);
        auto law = make_kerr_isotropic(1.0, -2.0, 1.0, 0.0);
        auto lambda = make_impedance_scalar(1.0);
        MaxwellSystem sys(lab.ops, lab.frames, *law, *lambda, 1.0);
        const std::size_t n = lab.ops.node_count();
        Field3 E0(n), H0(n);
        for (std::size_t i = 0; i < n; ++i) {
            const Vec3 x = lab.box.position(i);
            E0[i] = 0.45 * bump(x) * Vec3{1, 0, 0};  // beyond the fold point 1/sqrt(6)
            H0[i] = 0.45 * bump(x) * Vec3{0, 1, 0};
        }
        FieldState s = state_from(lab, *law, E0, H0);
        SolverConfig cfg;
        cfg.t_final = 2.0;
        bool threw = false;
        try {
            run(sys, cfg, s, nullptr);
        } catch (const Error& e) {
            threw = true;
            CHECK(e.error_class() == ErrorClass::solver);
        }
        CHECK(threw);
    }

    SUBCASE("leapfrog detects explosive growth as a CFL violation") {
        Lab lab(6);
        auto law = make_constant_isotropic(1, 1);
        auto lambda = make_impedance_scalar(1.0);
        MaxwellSystem sys(lab.ops, lab.frames, *law, *lambda, 1.0);
        const std::size_t n = lab.ops.node_count();
        Field3 E0(n), H0(n);
        Rng rng(5);
        for (std::size_t i = 0; i < n; ++i) {
            E0[i] = rng.next_in_ball(1.0);
            H0[i] = rng.next_in_ball(1.0);
        }
        FieldState s = state_from(lab, *law, E0, H0);
        SolverConfig cfg;
        cfg.scheme = Scheme::leapfrog;
        cfg.dt = 8.0 * lab.box.min_spacing();  // far beyond stability
        cfg.cfl_override = true;
        cfg.t_final = 5.0;
        CHECK_THROWS_AS(run(sys, cfg, s, nullptr), Error);
    }

    SUBCASE("leapfrog stays stable and sane under the CFL bound") {
        Lab lab(6);
        auto law = make_constant_isotropic(1, 1);
        auto lambda = make_impedance_scalar(1.0);
        MaxwellSystem sys(lab.ops, lab.frames, *law, *lambda, 1.0);
        const std::size_t n = lab.ops.node_count();
        Field3 E0(n), H0(n);
        for (std::size_t i = 0; i < n; ++i) {
            const Vec3 x = lab.box.position(i);
            E0[i] = bump(x) * Vec3{0, 1, 0};
            H0[i] = bump(x) * Vec3{1, 0, 0};
        }
        FieldState s = state_from(lab, *law, E0, H0);
        SolverConfig cfg;
        cfg.scheme = Scheme::leapfrog;
        cfg.cfl = 0.25;
        cfg.t_final = 1.0;
        const FieldState out = run(sys, cfg, s, nullptr);
        double peak = 0.0;
        for (const Vec3& v : out.E) peak = std::max(peak, norm(v));
        CHECK(peak < 10.0);
    }
}

TEST_CASE("divergence of D is stationary to round-off") {
    Lab lab(8);
    auto law = make_kerr_isotropic(1.0, 1.0, 1.0, 0.5);
    auto lambda = make_impedance_scalar(1.0);
    MaxwellSystem sys(lab.ops, lab.frames, *law, *lambda, 1.0);
    const std::size_t n = lab.ops.node_count();
    Field3 E0(n), H0(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 x = lab.box.position(i);
        E0[i] = 0.05 * bump(x) * Vec3{1.0, -0.4, 0.2};
        H0[i] = 0.05 * bump(x) * Vec3{0.3, 0.9, -0.1};
    }
    FieldState s = state_from(lab, *law, E0, H0);
    ScalarField div0, divT;
    lab.ops.div(s.D, div0);
    SolverConfig cfg;
    cfg.t_final = 1.0;
    const FieldState out = run(sys, cfg, s, nullptr);
    lab.ops.div(out.D, divT);
    Field3 dummy;
    (void)dummy;
    double drift = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        drift = std::max(drift, std::abs(divT[i] - div0[i]));
    CHECK(drift <= 1e-12);
}

TEST_CASE("checkpoint io round trip is bit exact") {
    Lab lab(5);
    auto law = make_constant_isotropic(1, 1);
    const std::size_t n = lab.ops.node_count();
    Field3 E(n), H(n);
    Rng rng(9);
    for (std::size_t i = 0; i < n; ++i) {
        E[i] = rng.next_in_ball(1.0);
        H[i] = rng.next_in_ball(1.0);
    }
    FieldState s = state_from(lab, *law, E, H);
    s.t = 1.25;
    const std::string path = "test_checkpoint.qmxw";
    write_checkpoint(path, lab.box, s);
    const FieldState r = read_checkpoint(path, lab.box);
    CHECK(r.t == s.t);
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(r.E[i].x == s.E[i].x);
        CHECK(r.D[i].z == s.D[i].z);
        CHECK(r.B[i].y == s.B[i].y);
    }
    std::remove(path.c_str());

    BoxDomain other = make_box(6);
    CHECK_THROWS_AS(read_checkpoint("does_not_exist.qmxw", lab.box), Error);
    write_checkpoint(path, lab.box, s);
    CHECK_THROWS_AS(read_checkpoint(path, other), Error);
    std::remove(path.c_str());
}

TEST_CASE("cfl validation") {
    BoxDomain box = make_box(8);
    SolverConfig cfg;
    cfg.dt = 1.0;  // far above 0.4 * h
    CHECK_THROWS_AS(cfg.resolve_dt(box), Error);
    cfg.cfl_override = true;
    CHECK(cfg.resolve_dt(box) == 1.0);
    cfg.dt = 0.0;
    CHECK(cfg.resolve_dt(box) == doctest::Approx(0.4 / 8.0).epsilon(1e-15));
}
