#include "qmxw/solver.hpp"

#include <atomic>
#include <deque>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace qmxw {

double SolverConfig::resolve_dt(const BoxDomain& box) const {
    const double bound = cfl * box.min_spacing();
    if (dt <= 0.0) return bound;
    if (dt > bound && !cfl_override)
        throw Error(ErrorClass::config, "CFL_VIOLATION",
                    "dt exceeds cfl * h_min; set an explicit override to proceed");
    if (dt > bound)
        std::fprintf(stderr, "[qmxw] warning: dt=%.3g above CFL bound %.3g (override)\n", dt,
                     bound);
    return dt;
}

Vec3 constitutive_invert(const MaterialLaw& law, Tensor which, const Vec3& x,
                         const Vec3& target, Vec3 guess, double tol, int max_iter) {
    const double scale = 1.0 + norm(target);
    for (int it = 0; it < max_iter; ++it) {
        const Mat33 t = which == Tensor::eps ? law.eval_eps(x, guess) : law.eval_mu(x, guess);
        const Vec3 res = t * guess - target;
        if (norm(res) <= tol * scale) return guess;
        const Mat33 jac = eval_linearized(law, which, x, guess);
        Vec3 delta;
        if (!solve3(jac, res, delta))
            throw Error(ErrorClass::solver, "SINGULAR_JACOBIAN",
                        "linearized tensor is numerically singular");
        guess -= delta;
        if (!std::isfinite(guess.x) || !std::isfinite(guess.y) || !std::isfinite(guess.z))
            throw Error(ErrorClass::solver, "NO_CONVERGENCE",
                        "Newton iterate left the finite range");
    }
    // Accept a converged-enough iterate only if it meets the tolerance.
    const Mat33 t = which == Tensor::eps ? law.eval_eps(x, guess) : law.eval_mu(x, guess);
    if (norm(t * guess - target) <= tol * scale) return guess;
    throw Error(ErrorClass::solver, "NO_CONVERGENCE",
                "constitutive inversion did not reach tolerance");
}

MaxwellSystem::MaxwellSystem(const SbpOperators& ops, const BoundaryFrame& frames,
                             const MaterialLaw& law, const Impedance& lambda,
                             double sat_strength)
    : ops_(&ops), frames_(&frames), law_(&law), lambda_(&lambda), sat_strength_(sat_strength) {
    const BoxDomain& box = ops.box();
    bdata_.reserve(frames.nodes().size());
    for (const auto& bn : frames.nodes()) {
        BoundaryData d;
        d.node = bn.node;
        const FaceFrame& fr = frames.frame(bn.face);
        d.nu = fr.nu;
        d.tau1 = fr.tau1;
        d.tau2 = fr.tau2;
        d.w_surf = bn.w_surf;
        d.w_normal = bn.w_normal;
        d.lambda = lambda.eval_lambda(box.position(bn.node));
        // Invert the tangential 2x2 block and lift back to 3x3.
        const double a = dot(fr.tau1, d.lambda * fr.tau1);
        const double b = dot(fr.tau1, d.lambda * fr.tau2);
        const double c = dot(fr.tau2, d.lambda * fr.tau2);
        const double det2 = a * c - b * b;
        if (!(det2 > 0.0) || !(a > 0.0))
            throw Error(ErrorClass::assumption, "IMPEDANCE_NOT_POSITIVE",
                        "impedance is not positive definite on the tangent plane");
        const double i00 = c / det2, i01 = -b / det2, i11 = a / det2;
        Mat33 lift{};
        for (int r = 0; r < 3; ++r)
            for (int s = 0; s < 3; ++s)
                lift(r, s) = i00 * fr.tau1[r] * fr.tau1[s] + i01 * fr.tau1[r] * fr.tau2[s] +
                             i01 * fr.tau2[r] * fr.tau1[s] + i11 * fr.tau2[r] * fr.tau2[s];
        d.lambda_tan_inv = lift;
        bdata_.push_back(d);
    }
}

void MaxwellSystem::sat_boundary_flux(const Field3& E, const Field3& H, Field3& dBdt_add,
                                      double& diss_rate, double& pen_rate,
                                      double& bc_residual2) const {
    const double sigma = sat_strength_;
    const std::size_t nb = bdata_.size();
    std::vector<double> diss(nb), pen(nb), res2(nb);
    ops_->workers().parallel_for(nb, [&](std::size_t i) {
        const BoundaryData& d = bdata_[i];
        const Vec3 Ev = E[d.node];
        const Vec3 Hv = H[d.node];
        const Vec3 e = cross(Ev, d.nu);
        const Vec3 le = d.lambda * e;
        const Vec3 g = cross(Hv, d.nu) + cross(le, d.nu);
        const Vec3 s = Hv - dot(Hv, d.nu) * d.nu + le;  // H_tan + lambda (E x nu)
        dBdt_add[d.node] += (-sigma / d.w_normal) * (d.lambda_tan_inv * s);
        diss[i] = d.w_surf * dot(le, e);
        pen[i] = d.w_surf * (-(1.0 + sigma) * dot(s, e) + sigma * dot(s, d.lambda_tan_inv * s));
        res2[i] = d.w_surf * norm2(g);
    });
    std::vector<double> t1 = diss, t2 = pen, t3 = res2;
    diss_rate = pairwise_sum(t1);
    pen_rate = pairwise_sum(t2);
    bc_residual2 = pairwise_sum(t3);
}

void MaxwellSystem::rhs(const Field3& E, const Field3& H, Field3& dDdt, Field3& dBdt,
                        double& diss_rate, double& pen_rate, double& bc_residual2) const {
    ops_->curl(H, dDdt);
    ops_->curl(E, dBdt);
    ops_->workers().parallel_for(dBdt.size(), [&](std::size_t i) { dBdt[i] = -1.0 * dBdt[i]; });
    sat_boundary_flux(E, H, dBdt, diss_rate, pen_rate, bc_residual2);
}

void MaxwellSystem::recover(const Field3& D, const Field3& B, Field3& E, Field3& H, double tol,
                            int max_iter) const {
    const BoxDomain& box = ops_->box();
    std::atomic<bool> failed{false};
    std::string what;
    std::string code;
    ops_->workers().parallel_for(D.size(), [&](std::size_t i) {
        if (failed.load(std::memory_order_relaxed)) return;
        const Vec3 x = box.position(i);
        try {
            E[i] = constitutive_invert(*law_, Tensor::eps, x, D[i], E[i], tol, max_iter);
            H[i] = constitutive_invert(*law_, Tensor::mu, x, B[i], H[i], tol, max_iter);
        } catch (const Error& err) {
            bool expected = false;
            if (failed.compare_exchange_strong(expected, true)) {
                what = err.what();
                code = err.code();
            }
        }
    });
    if (failed.load())
        throw Error(ErrorClass::solver, code.empty() ? "NO_CONVERGENCE" : code, what);
}

double MaxwellSystem::bc_residual_norm(const Field3& E, const Field3& H) const {
    std::vector<double> res2(bdata_.size());
    for (std::size_t i = 0; i < bdata_.size(); ++i) {
        const BoundaryData& d = bdata_[i];
        const Vec3 e = cross(E[d.node], d.nu);
        const Vec3 g = cross(H[d.node], d.nu) + cross(d.lambda * e, d.nu);
        res2[i] = d.w_surf * norm2(g);
    }
    return std::sqrt(pairwise_sum(res2));
}

Stepper::Stepper(const MaxwellSystem& sys, const SolverConfig& cfg, const FieldState& initial)
    : sys_(sys), cfg_(cfg), dt_(cfg.resolve_dt(sys.ops().box())), state_(initial) {}

void Stepper::step(double signed_dt) {
    const double dt = signed_dt == 0.0 ? dt_ : signed_dt;
    if (cfg_.scheme == Scheme::midpoint)
        step_midpoint(dt);
    else
        step_leapfrog(dt);
}

namespace {

double max_abs(const Field3& f) {
    double m = 0.0;
    for (const Vec3& v : f)
        m = std::max({m, std::abs(v.x), std::abs(v.y), std::abs(v.z)});
    return m;
}

}  // namespace

namespace {

// Midpoint-stage iterate: the (D, B) pair treated as one vector.
struct StagePair {
    Field3 D, B;
};

double stage_dot(const Workers& w, const StagePair& a, const StagePair& b) {
    return w.reduce_sum(a.D.size(), [&](std::size_t i) {
        return dot(a.D[i], b.D[i]) + dot(a.B[i], b.B[i]);
    });
}

double stage_max(const StagePair& a) {
    return std::max(max_abs(a.D), max_abs(a.B));
}

}  // namespace

void Stepper::step_midpoint(double dt) {
    const std::size_t n = state_.D.size();
    const Workers& workers = sys_.ops().workers();

    Field3 Dm = state_.D, Bm = state_.B;     // midpoint iterate in (D, B)
    Field3 Em = state_.E, Hm = state_.H;     // warm-start recovery
    Field3 rD(n), rB(n);
    double diss = 0.0, pen = 0.0, res2 = 0.0;

    const double scale = std::max({1.0, max_abs(state_.D), max_abs(state_.B)});

    // Fixed-point map G(y) = x_n + dt/2 F(recover(y)), solved with
    // depth-two Anderson mixing: the plain sweep has its dominant
    // contraction modes in complex pairs (the curl is skew), which the
    // two-column least squares removes.
    std::deque<StagePair> gs, fs;
    bool converged = false;
    for (int sweep = 0; sweep < 50; ++sweep) {
        sys_.recover(Dm, Bm, Em, Hm, cfg_.newton_tol, cfg_.newton_max_iter);
        sys_.rhs(Em, Hm, rD, rB, diss, pen, res2);
        StagePair g{Field3(n), Field3(n)}, f{Field3(n), Field3(n)};
        workers.parallel_for(n, [&](std::size_t i) {
            g.D[i] = state_.D[i] + 0.5 * dt * rD[i];
            g.B[i] = state_.B[i] + 0.5 * dt * rB[i];
            f.D[i] = g.D[i] - Dm[i];
            f.B[i] = g.B[i] - Bm[i];
        });
        if (stage_max(f) <= cfg_.newton_tol * scale) {
            Dm = std::move(g.D);
            Bm = std::move(g.B);
            converged = true;
            break;
        }
        gs.push_back(std::move(g));
        fs.push_back(std::move(f));
        if (gs.size() > 3) {
            gs.pop_front();
            fs.pop_front();
        }
        const std::size_t hist = gs.size();
        const StagePair& gk = gs.back();
        const StagePair& fk = fs.back();
        double th1 = 0.0, th2 = 0.0;
        if (hist >= 2) {
            // Columns: df1 = f_k - f_{k-1}, df2 = f_{k-1} - f_{k-2}.
            auto diff = [&](const StagePair& a, const StagePair& b) {
                StagePair d{Field3(n), Field3(n)};
                workers.parallel_for(n, [&](std::size_t i) {
                    d.D[i] = a.D[i] - b.D[i];
                    d.B[i] = a.B[i] - b.B[i];
                });
                return d;
            };
            const StagePair df1 = diff(fs[hist - 1], fs[hist - 2]);
            if (hist == 2) {
                const double a11 = stage_dot(workers, df1, df1);
                if (a11 > 1e-300) th1 = stage_dot(workers, df1, fk) / a11;
            } else {
                const StagePair df2 = diff(fs[hist - 2], fs[hist - 3]);
                const double a11 = stage_dot(workers, df1, df1);
                const double a12 = stage_dot(workers, df1, df2);
                const double a22 = stage_dot(workers, df2, df2);
                const double b1 = stage_dot(workers, df1, fk);
                const double b2 = stage_dot(workers, df2, fk);
                const double det = a11 * a22 - a12 * a12;
                if (std::abs(det) > 1e-300 * std::max(1.0, a11 * a22)) {
                    th1 = (b1 * a22 - b2 * a12) / det;
                    th2 = (a11 * b2 - a12 * b1) / det;
                } else if (a11 > 1e-300) {
                    th1 = b1 / a11;
                }
            }
        }
        workers.parallel_for(n, [&](std::size_t i) {
            Vec3 nd = gk.D[i];
            Vec3 nb = gk.B[i];
            if (hist >= 2) {
                nd -= th1 * (gs[hist - 1].D[i] - gs[hist - 2].D[i]);
                nb -= th1 * (gs[hist - 1].B[i] - gs[hist - 2].B[i]);
            }
            if (hist >= 3) {
                nd -= th2 * (gs[hist - 2].D[i] - gs[hist - 3].D[i]);
                nb -= th2 * (gs[hist - 2].B[i] - gs[hist - 3].B[i]);
            }
            Dm[i] = nd;
            Bm[i] = nb;
        });
    }
    if (!converged)
        throw Error(ErrorClass::solver, "NO_CONVERGENCE",
                    "implicit stage fixed point stalled at t = " + std::to_string(state_.t));

    // Final evaluation at the converged midpoint.
    sys_.recover(Dm, Bm, Em, Hm, cfg_.newton_tol, cfg_.newton_max_iter);
    sys_.rhs(Em, Hm, rD, rB, diss, pen, res2);
    workers.parallel_for(n, [&](std::size_t i) {
        state_.D[i] += dt * rD[i];
        state_.B[i] += dt * rB[i];
        // Warm start for the end-of-step recovery: extrapolate through the
        // midpoint.
        state_.E[i] = 2.0 * Em[i] - state_.E[i];
        state_.H[i] = 2.0 * Hm[i] - state_.H[i];
    });
    sys_.recover(state_.D, state_.B, state_.E, state_.H, cfg_.newton_tol, cfg_.newton_max_iter);
    state_.t += dt;
    account_.acc_dissipation += dt * diss;
    account_.acc_penalty += dt * pen;
    account_.steps += 1;
}

void Stepper::step_leapfrog(double dt) {
    const std::size_t n = state_.D.size();
    const Workers& workers = sys_.ops().workers();
    Field3 rD(n), rB(n);
    double diss = 0.0, pen = 0.0, res2 = 0.0;

    if (!leapfrog_primed_) {
        B_half_ = state_.B;
        H_half_ = state_.H;
        sys_.rhs(state_.E, state_.H, rD, rB, diss, pen, res2);
        workers.parallel_for(n, [&](std::size_t i) { B_half_[i] += 0.5 * dt * rB[i]; });
        sys_.recover(state_.D, B_half_, state_.E, H_half_, cfg_.newton_tol,
                     cfg_.newton_max_iter);
        leapfrog_primed_ = true;
    }

    const double before = std::max(max_abs(state_.E), max_abs(H_half_));

    sys_.ops().curl(H_half_, rD);
    workers.parallel_for(n, [&](std::size_t i) { state_.D[i] += dt * rD[i]; });
    sys_.recover(state_.D, B_half_, state_.E, H_half_, cfg_.newton_tol, cfg_.newton_max_iter);

    sys_.rhs(state_.E, H_half_, rD, rB, diss, pen, res2);
    workers.parallel_for(n, [&](std::size_t i) { B_half_[i] += dt * rB[i]; });
    Field3 Hnext = H_half_;
    sys_.recover(state_.D, B_half_, state_.E, Hnext, cfg_.newton_tol, cfg_.newton_max_iter);
    H_half_ = Hnext;

    // Integer-time magnetic state for the trace: average the staggered flux.
    workers.parallel_for(n, [&](std::size_t i) {
        state_.B[i] = B_half_[i] - 0.5 * dt * rB[i];
    });
    sys_.recover(state_.D, state_.B, state_.E, state_.H, cfg_.newton_tol, cfg_.newton_max_iter);

    const double after = std::max(max_abs(state_.E), max_abs(state_.H));
    if (after > 10.0 * std::max(before, 1e-14))
        throw Error(ErrorClass::solver, "CFL_VIOLATION",
                    "explicit step grew fields more than 10x at t = " + std::to_string(state_.t));

    state_.t += dt;
    account_.acc_dissipation += dt * diss;
    account_.acc_penalty += dt * pen;
    account_.steps += 1;
}

FieldState run(const MaxwellSystem& sys, const SolverConfig& cfg, FieldState initial,
               SnapshotSink* sink) {
    Stepper stepper(sys, cfg, initial);
    const double dt = stepper.dt();
    const long total = cfg.t_final <= 0.0 ? 0 : std::lround(cfg.t_final / dt);
    if (sink) sink->on_snapshot(stepper.state(), stepper.account());
    const int stride = cfg.output_stride < 1 ? 1 : cfg.output_stride;
    for (long s = 1; s <= total; ++s) {
        stepper.step();
        if (sink && (s % stride == 0 || s == total))
            sink->on_snapshot(stepper.state(), stepper.account());
    }
    return stepper.state();
}

// ---- Checkpoint ------------------------------------------------------------

namespace {

void write_u32(std::ofstream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

void write_f64(std::ofstream& os, double v) {
    static_assert(sizeof(double) == 8);
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t read_u32(std::ifstream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

double read_f64(std::ifstream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

void write_field(std::ofstream& os, const Field3& f) {
    for (const Vec3& v : f) {
        write_f64(os, v.x);
        write_f64(os, v.y);
        write_f64(os, v.z);
    }
}

void read_field(std::ifstream& is, Field3& f, std::size_t n) {
    f.resize(n);
    for (Vec3& v : f) {
        v.x = read_f64(is);
        v.y = read_f64(is);
        v.z = read_f64(is);
    }
}

}  // namespace

void write_checkpoint(const std::string& path, const BoxDomain& box, const FieldState& s) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorClass::config, "IO_ERROR", "cannot open checkpoint for writing: " + path);
    os.write("QMXW1", 5);
    write_u32(os, box.nodes(0));
    write_u32(os, box.nodes(1));
    write_u32(os, box.nodes(2));
    write_f64(os, s.t);
    write_field(os, s.D);
    write_field(os, s.B);
    write_field(os, s.E);
    write_field(os, s.H);
    if (!os) throw Error(ErrorClass::config, "IO_ERROR", "checkpoint write failed: " + path);
}

FieldState read_checkpoint(const std::string& path, const BoxDomain& expected_box) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(ErrorClass::config, "IO_ERROR", "cannot open checkpoint: " + path);
    char magic[5];
    is.read(magic, 5);
    if (!is || std::memcmp(magic, "QMXW1", 5) != 0)
        throw Error(ErrorClass::config, "BAD_CHECKPOINT", "magic bytes mismatch in " + path);
    const std::uint32_t nx = read_u32(is), ny = read_u32(is), nz = read_u32(is);
    if (nx != static_cast<std::uint32_t>(expected_box.nodes(0)) ||
        ny != static_cast<std::uint32_t>(expected_box.nodes(1)) ||
        nz != static_cast<std::uint32_t>(expected_box.nodes(2)))
        throw Error(ErrorClass::config, "BAD_CHECKPOINT", "grid dims mismatch in " + path);
    FieldState s;
    s.t = read_f64(is);
    const std::size_t n = static_cast<std::size_t>(nx) * ny * nz;
    read_field(is, s.D, n);
    read_field(is, s.B, n);
    read_field(is, s.E, n);
    read_field(is, s.H, n);
    if (!is) throw Error(ErrorClass::config, "BAD_CHECKPOINT", "truncated checkpoint: " + path);
    return s;
}

}  // namespace qmxw
