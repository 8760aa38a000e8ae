#include "qmxw/initdata.hpp"

#include <cmath>

#include "qmxw/rng.hpp"

namespace qmxw {

void build_compat_fields(const SbpOperators& ops, const MaterialLaw& law, InitialData& data) {
    const BoxDomain& box = ops.box();
    const std::size_t n = data.E0.size();

    Field3 curlH0, curlE0;
    ops.curl(data.H0, curlH0);
    ops.curl(data.E0, curlE0);

    data.E1.resize(n);
    data.H1.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 x = box.position(i);
        const Mat33 le = eval_linearized(law, Tensor::eps, x, data.E0[i]);
        const Mat33 lm = eval_linearized(law, Tensor::mu, x, data.H0[i]);
        Vec3 e1, h1;
        if (!solve3(le, curlH0[i], e1) || !solve3(lm, curlE0[i], h1))
            throw Error(ErrorClass::solver, "SINGULAR_JACOBIAN",
                        "linearized tensor singular while building compatibility fields");
        data.E1[i] = e1;
        data.H1[i] = -1.0 * h1;
    }

    Field3 curlH1, curlE1;
    ops.curl(data.H1, curlH1);
    ops.curl(data.E1, curlE1);

    data.E2.resize(n);
    data.H2.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 x = box.position(i);
        const Mat33 le = eval_linearized(law, Tensor::eps, x, data.E0[i]);
        const Mat33 lm = eval_linearized(law, Tensor::mu, x, data.H0[i]);
        const Rank3 dle = linearized_xi_derivative(law, Tensor::eps, x, data.E0[i]);
        const Rank3 dlm = linearized_xi_derivative(law, Tensor::mu, x, data.H0[i]);
        // ((grad A) xi . eta)_j = sum_{i,k} dA_{jk}/dxi_i xi_k eta_i
        Vec3 te{}, th{};
        for (int j = 0; j < 3; ++j) {
            double se = 0.0, sh = 0.0;
            for (int ii = 0; ii < 3; ++ii)
                for (int k = 0; k < 3; ++k) {
                    se += dle[ii](j, k) * data.E1[i][k] * data.E1[i][ii];
                    sh += dlm[ii](j, k) * data.H1[i][k] * data.H1[i][ii];
                }
            te[j] = se;
            th[j] = sh;
        }
        Vec3 e2, h2;
        if (!solve3(le, curlH1[i] - te, e2) || !solve3(lm, curlE1[i] + th, h2))
            throw Error(ErrorClass::solver, "SINGULAR_JACOBIAN",
                        "linearized tensor singular while building compatibility fields");
        data.E2[i] = e2;
        data.H2[i] = -1.0 * h2;
    }
}

double boundary_condition_residual(const SbpOperators& ops, const BoundaryFrame& frames,
                                   const Impedance& lambda, const Field3& E, const Field3& H) {
    const BoxDomain& box = ops.box();
    const auto& nodes = frames.nodes();
    std::vector<double> parts(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& bn = nodes[i];
        const Vec3 nu = frames.frame(bn.face).nu;
        const Mat33 lam = lambda.eval_lambda(box.position(bn.node));
        const Vec3 g = cross(H[bn.node], nu) + cross(lam * cross(E[bn.node], nu), nu);
        parts[i] = bn.w_surf * norm2(g);
    }
    return std::sqrt(pairwise_sum(parts));
}

namespace {

// Conjugate gradient on the SPD operator phi -> -divW(M grad phi) in the
// quadrature inner product, restricted to mean-zero functions (pure Neumann
// nullspace). The diagonal preconditioner uses the Laplace-scale estimate
// sum_j 2 M_jj / h_j^2.
struct PoissonSolver {
    const SbpOperators& ops;
    const std::vector<Mat33>& coeff;

    void apply(const ScalarField& phi, ScalarField& out) const {
        Field3 g;
        ops.grad(phi, g);
        ops.workers().parallel_for(g.size(), [&](std::size_t i) { g[i] = coeff[i] * g[i]; });
        ops.div_weak(g, out);
        for (double& v : out) v = -v;
    }

    void remove_mean(ScalarField& f) const {
        const double mean =
            ops.workers().reduce_sum(f.size(),
                                     [&](std::size_t i) { return ops.weight(i) * f[i]; }) /
            ops.volume();
        for (double& v : f) v -= mean;
    }

    int solve(const ScalarField& rhs_in, ScalarField& phi, double tol, int max_iter) const {
        const std::size_t n = rhs_in.size();
        ScalarField r = rhs_in;
        remove_mean(r);
        phi.assign(n, 0.0);
        ScalarField diag(n);
        const BoxDomain& box = ops.box();
        for (std::size_t i = 0; i < n; ++i) {
            double d = 0.0;
            for (int a = 0; a < 3; ++a)
                d += 2.0 * std::max(coeff[i](a, a), 1e-30) / (box.spacing(a) * box.spacing(a));
            diag[i] = d;
        }
        ScalarField z(n), p(n), ap(n);
        auto precond = [&](const ScalarField& x, ScalarField& out) {
            out.resize(n);
            for (std::size_t i = 0; i < n; ++i) out[i] = x[i] / diag[i];
            remove_mean(out);
        };
        precond(r, z);
        p = z;
        double rz = ops.dot_w(r, z);
        const double r0 = std::sqrt(ops.dot_w(r, r));
        if (r0 == 0.0) return 0;
        for (int it = 1; it <= max_iter; ++it) {
            apply(p, ap);
            const double pap = ops.dot_w(p, ap);
            if (pap <= 0.0) break;  // numerical loss of definiteness
            const double alpha = rz / pap;
            for (std::size_t i = 0; i < n; ++i) {
                phi[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            if (std::sqrt(ops.dot_w(r, r)) <= tol * r0) return it;
            precond(r, z);
            const double rz_new = ops.dot_w(r, z);
            const double beta = rz_new / rz;
            rz = rz_new;
            for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
        }
        return max_iter;
    }
};

}  // namespace

ProjectionResult project_solenoidal(const SbpOperators& ops, const MaterialLaw& law,
                                    Tensor which, Field3& field, double tol_div,
                                    int max_sweeps) {
    const BoxDomain& box = ops.box();
    const std::size_t n = field.size();
    Field3 flux(n);
    ScalarField resid;
    std::vector<Mat33> coeff(n);

    auto compute_flux_residual = [&]() {
        ops.workers().parallel_for(n, [&](std::size_t i) {
            const Vec3 x = box.position(i);
            const Mat33 t = which == Tensor::eps ? law.eval_eps(x, field[i])
                                                 : law.eval_mu(x, field[i]);
            flux[i] = t * field[i];
            coeff[i] = eval_linearized(law, which, x, field[i]);
        });
        ops.div_weak(flux, resid);
        return ops.norm_w(resid);
    };

    ProjectionResult out;
    double rnorm = compute_flux_residual();
    for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
        out.sweeps = sweep;
        if (rnorm <= tol_div) {
            out.residual = rnorm;
            return out;
        }
        PoissonSolver ps{ops, coeff};
        // The CG operator is -divW(M grad .); the target equation is
        // divW(M grad phi) = resid, so the right-hand side flips sign.
        ScalarField rhs = resid;
        for (double& v : rhs) v = -v;
        ScalarField phi;
        ps.solve(rhs, phi, 1e-11, 4000);
        Field3 gphi;
        ops.grad(phi, gphi);
        ops.workers().parallel_for(n, [&](std::size_t i) { field[i] -= gphi[i]; });
        rnorm = compute_flux_residual();
    }
    if (rnorm <= tol_div) {
        out.residual = rnorm;
        return out;
    }
    throw Error(ErrorClass::solver, "NO_CONVERGENCE",
                "solenoidal projection stalled (residual " + std::to_string(rnorm) + ")");
}

InitialKind initial_kind_from_string(const std::string& s) {
    if (s == "gaussian_bump") return InitialKind::gaussian_bump;
    if (s == "modulated_wave") return InitialKind::modulated_wave;
    if (s == "random_smooth") return InitialKind::random_smooth;
    throw Error(ErrorClass::config, "UNKNOWN_INITIAL_KIND", "no such initial-data kind: " + s);
}

std::string to_string(InitialKind kind) {
    switch (kind) {
        case InitialKind::gaussian_bump: return "gaussian_bump";
        case InitialKind::modulated_wave: return "modulated_wave";
        case InitialKind::random_smooth: return "random_smooth";
    }
    return "?";
}

namespace {

// Smooth compactly supported profile: C-infinity bump per axis, value 1 at
// the center and identically zero outside |s| < 1.
double bump1(double s) {
    const double s2 = s * s;
    if (s2 >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - s2));
}

struct BumpWindow {
    Vec3 center, halfwidth;
    double operator()(const Vec3& x) const {
        return bump1((x.x - center.x) / halfwidth.x) * bump1((x.y - center.y) / halfwidth.y) *
               bump1((x.z - center.z) / halfwidth.z);
    }
};

}  // namespace

InitialData make_scenario(const SbpOperators& ops, const BoundaryFrame& frames,
                          const MaterialLaw& law, const Impedance& lambda,
                          const InitialParams& params) {
    const BoxDomain& box = ops.box();
    const std::size_t n = box.node_count();
    if (params.width_frac <= 0.0 || params.width_frac > 0.45)
        throw Error(ErrorClass::config, "BAD_INITIAL_PARAMS",
                    "width_frac must lie in (0, 0.45] to keep the support interior");

    const Vec3 center = box.corner + 0.5 * box.extent;
    const Vec3 halfwidth = params.width_frac * box.extent;
    const BumpWindow wE{center, halfwidth};
    // The magnetic potential window is shrunk slightly so the two fields are
    // not trivially parallel.
    const BumpWindow wH{center, 0.9 * halfwidth};

    // Seeded mode table (computed serially; broadcast to the node loop).
    struct Mode {
        Vec3 k, dir;
        double phase, coef;
    };
    std::vector<Mode> modesE, modesH;
    Rng rng(params.seed);
    const double tau = 2.0 * std::acos(-1.0);
    auto fill_modes = [&](std::vector<Mode>& modes, int count) {
        for (int m = 0; m < count; ++m) {
            Mode mo;
            mo.k = {tau * std::floor(rng.next_in(1.0, 3.999)) / box.extent.x,
                    tau * std::floor(rng.next_in(1.0, 3.999)) / box.extent.y,
                    tau * std::floor(rng.next_in(1.0, 3.999)) / box.extent.z};
            mo.dir = rng.next_in_ball(1.0);
            const double dn = norm(mo.dir);
            mo.dir = dn > 1e-9 ? (1.0 / dn) * mo.dir : Vec3{1, 0, 0};
            mo.phase = rng.next_in(0.0, tau);
            mo.coef = rng.next_in(0.5, 1.0);
            modes.push_back(mo);
        }
    };

    Field3 potE(n), potH(n);
    switch (params.kind) {
        case InitialKind::gaussian_bump: {
            ops.workers().parallel_for(n, [&](std::size_t i) {
                const Vec3 x = box.position(i);
                potE[i] = params.amplitude * wE(x) * Vec3{0.0, 0.3, 1.0};
                potH[i] = params.amplitude * wH(x) * Vec3{1.0, 0.0, 0.4};
            });
            break;
        }
        case InitialKind::modulated_wave: {
            fill_modes(modesE, 1);
            fill_modes(modesH, 1);
            ops.workers().parallel_for(n, [&](std::size_t i) {
                const Vec3 x = box.position(i);
                const Mode& me = modesE[0];
                const Mode& mh = modesH[0];
                potE[i] = params.amplitude * wE(x) * std::sin(dot(me.k, x) + me.phase) * me.dir;
                potH[i] = params.amplitude * wH(x) * std::sin(dot(mh.k, x) + mh.phase) * mh.dir;
            });
            break;
        }
        case InitialKind::random_smooth: {
            fill_modes(modesE, params.mode_count);
            fill_modes(modesH, params.mode_count);
            ops.workers().parallel_for(n, [&](std::size_t i) {
                const Vec3 x = box.position(i);
                Vec3 ae{}, ah{};
                for (const Mode& m : modesE)
                    ae += m.coef * std::sin(dot(m.k, x) + m.phase) * m.dir;
                for (const Mode& m : modesH)
                    ah += m.coef * std::sin(dot(m.k, x) + m.phase) * m.dir;
                potE[i] = params.amplitude * wE(x) * ae;
                potH[i] = params.amplitude * wH(x) * ah;
            });
            break;
        }
    }

    InitialData data;
    ops.curl(potE, data.E0);
    ops.curl(potH, data.H0);

    // Normalize so that max |E0|, |H0| equals the requested amplitude; the
    // curl of the potential carries window-derivative scales.
    double peak = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        peak = std::max({peak, norm(data.E0[i]), norm(data.H0[i])});
    if (peak > 0.0) {
        const double s = params.amplitude / peak;
        for (std::size_t i = 0; i < n; ++i) {
            data.E0[i] *= s;
            data.H0[i] *= s;
        }
    }

    const double tol_div_e = 1e-10 * (1.0 + ops.norm_w(data.E0));
    const double tol_div_h = 1e-10 * (1.0 + ops.norm_w(data.H0));
    auto pe = project_solenoidal(ops, law, Tensor::eps, data.E0, tol_div_e);
    auto ph = project_solenoidal(ops, law, Tensor::mu, data.H0, tol_div_h);
    data.sweeps_eps = pe.sweeps;
    data.sweeps_mu = ph.sweeps;
    data.div_residual_eps = pe.residual;
    data.div_residual_mu = ph.residual;

    build_compat_fields(ops, law, data);
    data.compat_residual[0] = boundary_condition_residual(ops, frames, lambda, data.E0, data.H0);
    data.compat_residual[1] = boundary_condition_residual(ops, frames, lambda, data.E1, data.H1);
    data.compat_residual[2] = boundary_condition_residual(ops, frames, lambda, data.E2, data.H2);
    data.r_proxy = std::sqrt(sobolev_norm2(ops, data.E0, 3) + sobolev_norm2(ops, data.H0, 3));
    return data;
}

}  // namespace qmxw
