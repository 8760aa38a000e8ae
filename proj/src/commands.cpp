#include "qmxw/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "qmxw/divcurl.hpp"

namespace qmxw {

ScenarioRun::ScenarioRun(const Scenario& sc, int workers)
    : scenario_(sc), workers_(workers) {
    law_ = scenario_.make_law();
    impedance_ = scenario_.make_impedance();
    ops_ = std::make_unique<SbpOperators>(scenario_.domain, workers_);
    frames_ = std::make_unique<BoundaryFrame>(scenario_.domain);
    system_ = std::make_unique<MaxwellSystem>(*ops_, *frames_, *law_, *impedance_,
                                              scenario_.solver.sat_strength);
}

void ScenarioRun::certify() {
    cert_.symmetry = check_linearized_symmetry(*law_, scenario_.domain, scenario_.check_samples,
                                               scenario_.check_seed);
    cert_.positivity = check_local_positivity(*law_, scenario_.domain, scenario_.check_eta,
                                              scenario_.check_samples, scenario_.check_seed);
    cert_.coercivity = check_starshape_coercivity(*law_, scenario_.domain);
    cert_.impedance = check_impedance(*impedance_, scenario_.domain, scenario_.check_eta);
    cert_.eta_bar = check_star_shaped(scenario_.domain);
    certified_ = true;
}

void ScenarioRun::prepare(bool force) {
    if (certified_ && !force && scenario_.initial.amplitude > cert_.positivity.delta_tilde)
        throw Error(ErrorClass::assumption, "AMPLITUDE_ABOVE_RADIUS",
                    "initial amplitude " + std::to_string(scenario_.initial.amplitude) +
                        " exceeds the certified positivity radius " +
                        std::to_string(cert_.positivity.delta_tilde) +
                        "; lower it or pass --force");
    init_ = make_scenario(*ops_, *frames_, *law_, *impedance_, scenario_.initial);
}

void ScenarioRun::execute() {
    FieldState state;
    state.t = 0.0;
    state.E = init_.E0;
    state.H = init_.H0;
    const std::size_t n = state.E.size();
    state.D.resize(n);
    state.B.resize(n);
    const BoxDomain& box = scenario_.domain;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 x = box.position(i);
        state.D[i] = law_->eval_eps(x, state.E[i]) * state.E[i];
        state.B[i] = law_->eval_mu(x, state.H[i]) * state.H[i];
    }
    TraceBuilder builder(*system_, &init_);
    const auto t0 = std::chrono::steady_clock::now();
    final_ = run(*system_, scenario_.solver, std::move(state), &builder);
    wall_seconds_ = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    trace_ = builder.finalize();
}

double ScenarioRun::multiplier_sup() const {
    double m = 0.0;
    for (std::size_t i = 0; i < scenario_.domain.node_count(); ++i)
        m = std::max(m, norm(scenario_.domain.multiplier(scenario_.domain.position(i))));
    return m;
}

double ScenarioRun::impedance_sup() const {
    double m = 0.0;
    for (const auto& d : system_->boundary_data()) m = std::max(m, inf_norm(d.lambda));
    return m;
}

double observed_order(const std::vector<double>& errors, double floor) {
    // Finest pair above the floor; an error already at round-off counts as
    // converged (large order).
    for (std::size_t i = errors.size(); i-- > 1;) {
        const double fine = errors[i], coarse = errors[i - 1];
        if (fine <= floor) return 10.0;
        if (coarse <= floor) continue;
        return std::log2(coarse / fine);
    }
    return 0.0;
}

// ---- Verification suites ----------------------------------------------------

namespace {

CheckResult make_check(const std::string& name, bool pass, const std::string& detail) {
    return {name, pass, detail};
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace

std::vector<CheckResult> verify_energy(ScenarioRun& run) {
    std::vector<CheckResult> out;
    const EnergyTrace& tr = run.trace();
    if (tr.rows.size() < 2) {
        out.push_back(make_check("energy.balance", false, "trace too short"));
        return out;
    }
    const int last = static_cast<int>(tr.rows.size()) - 1;
    const bool linear = run.scenario().law_is_linear();
    const bool midpoint = run.scenario().solver.scheme == Scheme::midpoint;

    const auto bal = energy_balance_residual(tr, 0, 0, last);
    const double tol0 = linear && midpoint ? 1e-8 : 1e-4;
    out.push_back(make_check(
        "energy.balance.k0", bal.residual <= tol0,
        "lhs=" + fmt(bal.lhs) + " rhs=" + fmt(bal.rhs) + " residual=" + fmt(bal.residual) +
            " tol=" + fmt(tol0) + (bal.used_accumulated ? " (accumulated)" : " (trapezoid)")));

    const auto bal1 = energy_balance_residual(tr, 1, 0, last);
    out.push_back(make_check("energy.balance.k1.report", true,
                             "residual=" + fmt(bal1.residual) + " (informational)"));

    if (linear && midpoint) {
        double worst = 0.0;
        for (std::size_t i = 1; i < tr.rows.size(); ++i) {
            const double rel = (tr.rows[i].e[0] - tr.rows[i - 1].e[0]) /
                               (tr.rows[0].e[0] + 1e-30);
            worst = std::max(worst, rel);
        }
        out.push_back(make_check("energy.monotone.e0", worst <= 1e-10,
                                 "max relative increase=" + fmt(worst) + " tol=1e-10"));
    }

    const auto dis = dissipativity_check(tr, 0, 0, last);
    if (linear && midpoint)
        out.push_back(make_check("energy.dissipativity.c1", dis.minimal_c1 <= 1e-6,
                                 "minimal_c1=" + fmt(dis.minimal_c1) + " tol=1e-6"));
    else
        out.push_back(make_check("energy.dissipativity.c1", true,
                                 "minimal_c1=" + fmt(dis.minimal_c1) + " (z3), " +
                                     fmt(dis.minimal_c1_low) + " (z2)"));
    return out;
}

std::vector<CheckResult> verify_multiplier(ScenarioRun& run) {
    std::vector<CheckResult> out;

    // Constant-field identity on the run's grid (stencil-exact).
    {
        const std::size_t n = run.ops().node_count();
        Field3 v(n, Vec3{0.4, -1.1, 0.7});
        const double resid = curl_multiplier_identity_check(run.ops(), {}, v);
        out.push_back(make_check("multiplier.identity.constant", resid <= 1e-12,
                                 "residual=" + fmt(resid) + " tol=1e-12"));
    }

    // Trigonometric corpus refinement (grids of its own).
    {
        std::vector<double> errors;
        const auto corpus = manufactured_corpus();
        const ManufacturedField& f = corpus[3];  // mixed trig field
        for (int cells : {8, 16, 32}) {
            BoxDomain box = run.scenario().domain;
            box.cells[0] = box.cells[1] = box.cells[2] = cells;
            Workers w(1);
            SbpOperators ops(box, w);
            Field3 v;
            f.sample(box, v);
            errors.push_back(curl_multiplier_identity_check(ops, {}, v));
        }
        const double order = observed_order(errors);
        out.push_back(make_check("multiplier.identity.order", order >= 1.9,
                                 "errors=" + fmt(errors[0]) + "," + fmt(errors[1]) + "," +
                                     fmt(errors[2]) + " order=" + fmt(order) + " need>=1.9"));
    }

    // Observability inequality along the run.
    if (!run.trace().empty()) {
        const int last = static_cast<int>(run.trace().rows.size()) - 1;
        const auto& cert = run.certification();
        for (int k = 0; k <= 2; ++k) {
            const auto rep = observability_check(run.trace(), k, 0, last, cert.coercivity.kappa,
                                                 cert.eta_bar, run.multiplier_sup(),
                                                 run.impedance_sup());
            out.push_back(make_check("multiplier.observability.k" + std::to_string(k),
                                     rep.holds,
                                     "lhs=" + fmt(rep.lhs) + " rhs=" + fmt(rep.rhs) +
                                         " slack=" + fmt(rep.slack)));
        }
    }
    return out;
}

std::vector<CheckResult> verify_divcurl(int workers) {
    std::vector<CheckResult> out;
    const auto corpus = manufactured_corpus();
    auto lambda = make_impedance_scalar(1.0);

    // Reconstruction-bound stability across refinement.
    for (const auto& f : corpus) {
        std::vector<double> cs;
        bool zero_path = false;
        for (int cells : {8, 16, 32}) {
            BoxDomain box;
            box.cells[0] = box.cells[1] = box.cells[2] = cells;
            Workers w(workers);
            SbpOperators ops(box, w);
            BoundaryFrame frames(box);
            Field3 u, v;
            f.sample(box, u);
            corpus[(&f - corpus.data() + 1) % corpus.size()].sample(box, v);
            try {
                const auto rep = h1_bound_check(ops, frames, u, v, {}, {}, *lambda);
                cs.push_back(rep.empirical_c);
            } catch (const Error&) {
                zero_path = true;
            }
        }
        if (zero_path || cs.size() < 3) {
            out.push_back(make_check("divcurl.h1." + f.name, false, "unexpected zero rhs"));
            continue;
        }
        const double lo = std::min({cs[0], cs[1], cs[2]});
        const double hi = std::max({cs[0], cs[1], cs[2]});
        out.push_back(make_check("divcurl.h1." + f.name, hi <= 2.0 * lo,
                                 "c=" + fmt(cs[0]) + "," + fmt(cs[1]) + "," + fmt(cs[2]) +
                                     " spread=" + fmt(hi / lo) + " need<=2"));
    }

    // Normal-derivative reconstruction orders against the analytic jacobian.
    {
        const ManufacturedField& f = corpus[3];
        std::vector<double> err_tau, err_nn, err_vs_direct;
        for (int cells : {8, 16, 32}) {
            BoxDomain box;
            box.cells[0] = box.cells[1] = box.cells[2] = cells;
            Workers w(workers);
            SbpOperators ops(box, w);
            BoundaryFrame frames(box);
            Field3 u;
            f.sample(box, u);
            const auto rec = normal_from_curl(ops, frames, u);
            const auto direct = normal_direct(ops, frames, u, true);
            const auto nn = normalnormal_from_div(ops, frames, u, {}, {}, 1.0);
            double e_tau = 0.0, e_nn = 0.0, e_dir = 0.0, area = 0.0;
            const auto& nodes = frames.nodes();
            for (std::size_t i = 0; i < nodes.size(); ++i) {
                const auto& bn = nodes[i];
                const Vec3 nu = frames.frame(bn.face).nu;
                const Mat33 jac = f.jacobian(box.position(bn.node));
                Vec3 dn{};
                for (int a = 0; a < 3; ++a)
                    for (int c = 0; c < 3; ++c) dn[c] += jac(c, a) * nu[a];
                const Vec3 dn_tau = tangential_component(dn, nu);
                const double dn_nu = dot(dn, nu);
                e_tau += bn.w_surf * norm2(rec[i] - dn_tau);
                e_nn += bn.w_surf * (nn[i] - dn_nu) * (nn[i] - dn_nu);
                e_dir += bn.w_surf * norm2(rec[i] - direct[i]);
                area += bn.w_surf;
            }
            err_tau.push_back(std::sqrt(e_tau / area));
            err_nn.push_back(std::sqrt(e_nn / area));
            err_vs_direct.push_back(std::sqrt(e_dir / area));
        }
        const double order_tau = observed_order(err_tau);
        const double order_nn = observed_order(err_nn);
        out.push_back(make_check("divcurl.normal_tau.order", order_tau >= 1.9,
                                 "errors=" + fmt(err_tau[0]) + "," + fmt(err_tau[1]) + "," +
                                     fmt(err_tau[2]) + " order=" + fmt(order_tau)));
        out.push_back(make_check("divcurl.normal_nn.order", order_nn >= 1.9,
                                 "errors=" + fmt(err_nn[0]) + "," + fmt(err_nn[1]) + "," +
                                     fmt(err_nn[2]) + " order=" + fmt(order_nn)));
        out.push_back(make_check("divcurl.reconstruction_vs_direct",
                                 err_vs_direct[2] <= 1e-11,
                                 "frame-algebra agreement=" + fmt(err_vs_direct[2])));
    }
    return out;
}

std::vector<CheckResult> verify_compat(const Scenario& base, int workers) {
    std::vector<CheckResult> out;
    Scenario sc = base;
    sc.solver.t_final = 0.0;  // stepping handled manually below

    ScenarioRun run(sc, workers);
    run.certify();
    run.prepare(true);
    const InitialData& init = run.initial();

    out.push_back(make_check(
        "compat.residuals", true,
        "k0=" + fmt(init.compat_residual[0]) + " k1=" + fmt(init.compat_residual[1]) +
            " k2=" + fmt(init.compat_residual[2])));

    FieldState base_state;
    base_state.t = 0.0;
    base_state.E = init.E0;
    base_state.H = init.H0;
    const std::size_t n = init.E0.size();
    base_state.D.resize(n);
    base_state.B.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 x = sc.domain.position(i);
        base_state.D[i] = run.law().eval_eps(x, init.E0[i]) * init.E0[i];
        base_state.B[i] = run.law().eval_mu(x, init.H0[i]) * init.H0[i];
    }

    const double dt0 = sc.solver.resolve_dt(sc.domain);
    std::vector<double> err1, err2;
    for (int level = 0; level < 3; ++level) {
        const double dt = dt0 / (1 << level);
        SolverConfig cfg = sc.solver;
        cfg.dt = dt;
        Stepper fwd(run.system(), cfg, base_state);
        fwd.step(dt);
        Stepper bwd(run.system(), cfg, base_state);
        bwd.step(-dt);
        const Field3& Ep = fwd.state().E;
        const Field3& Hp = fwd.state().H;
        const Field3& Em = bwd.state().E;
        const Field3& Hm = bwd.state().H;
        Field3 d1(n), d2(n), h1f(n), h2f(n);
        for (std::size_t i = 0; i < n; ++i) {
            d1[i] = (1.0 / dt) * (Ep[i] - init.E0[i]) - init.E1[i];
            h1f[i] = (1.0 / dt) * (Hp[i] - init.H0[i]) - init.H1[i];
            d2[i] = (1.0 / (dt * dt)) * (Ep[i] - 2.0 * init.E0[i] + Em[i]) - init.E2[i];
            h2f[i] = (1.0 / (dt * dt)) * (Hp[i] - 2.0 * init.H0[i] + Hm[i]) - init.H2[i];
        }
        err1.push_back(run.ops().norm_w(d1) + run.ops().norm_w(h1f));
        err2.push_back(run.ops().norm_w(d2) + run.ops().norm_w(h2f));
    }
    const double o1 = observed_order(err1);
    const double o2 = observed_order(err2);
    out.push_back(make_check("compat.first_derivative.order", o1 >= 0.9,
                             "errors=" + fmt(err1[0]) + "," + fmt(err1[1]) + "," +
                                 fmt(err1[2]) + " order=" + fmt(o1) + " need>=0.9"));
    out.push_back(make_check("compat.second_derivative.order", o2 >= 0.9,
                             "errors=" + fmt(err2[0]) + "," + fmt(err2[1]) + "," +
                                 fmt(err2[2]) + " order=" + fmt(o2) + " need>=0.9"));
    return out;
}

// ---- CLI commands -------------------------------------------------------------

namespace {

std::string joined_path(const std::string& dir, const std::string& file) {
    if (file.empty() || dir.empty() || file.front() == '/') return file;
    return dir + "/" + file;
}

Scenario load_scenario(const CommandOptions& opt) {
    Scenario sc = parse_config_file(opt.config_path);
    if (opt.seed_override) sc.initial.seed = *opt.seed_override;
    return sc;
}

void print_report(const AssumptionReport& r, std::FILE* f) {
    std::fprintf(f, "%s.passed = %s\n", r.check.c_str(), r.passed ? "yes" : "no");
    std::fprintf(f, "%s.value = %.17g\n", r.check.c_str(), r.worst_value);
    if (r.check == "local_positivity")
        std::fprintf(f, "%s.delta_tilde = %.17g\n", r.check.c_str(), r.delta_tilde);
    if (r.check == "starshape_coercivity")
        std::fprintf(f, "%s.kappa = %.17g\n", r.check.c_str(), r.kappa);
    std::fprintf(f, "%s.detail = %s\n", r.check.c_str(), r.detail.c_str());
    for (const auto& w : r.worst_samples)
        std::fprintf(f, "%s.worst_sample = x=(%.6g %.6g %.6g) xi=(%.6g %.6g %.6g) margin=%.6g\n",
                     r.check.c_str(), w.x.x, w.x.y, w.x.z, w.xi.x, w.xi.y, w.xi.z, w.margin);
}

int print_checks(const std::vector<CheckResult>& checks) {
    int failures = 0;
    for (const auto& c : checks) {
        std::printf("%-40s %s  %s\n", c.name.c_str(), c.pass ? "PASS" : "FAIL",
                    c.detail.c_str());
        if (!c.pass) ++failures;
    }
    return failures;
}

}  // namespace

int cmd_check_assumptions(const CommandOptions& opt) {
    Scenario sc = load_scenario(opt);
    ScenarioRun run(sc, opt.workers);
    run.certify();
    const auto& cert = run.certification();

    const std::string path = joined_path(opt.out_dir, "assumptions.txt");
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw Error(ErrorClass::config, "IO_ERROR", "cannot write " + path);
    std::fprintf(f, "eta = %.17g\n", sc.check_eta);
    std::fprintf(f, "eta_bar = %.17g\n", cert.eta_bar);
    print_report(cert.symmetry, f);
    print_report(cert.positivity, f);
    print_report(cert.coercivity, f);
    print_report(cert.impedance, f);
    std::fclose(f);

    std::printf("eta_bar = %.17g\n", cert.eta_bar);
    for (const AssumptionReport* r :
         {&cert.symmetry, &cert.positivity, &cert.coercivity, &cert.impedance})
        std::printf("%-24s %s  value=%.6g %s\n", r->check.c_str(),
                    r->passed ? "PASS" : "FAIL", r->worst_value, r->detail.c_str());
    std::printf("report written to %s\n", path.c_str());
    return cert.all_passed() ? 0 : 3;
}

int cmd_run(const CommandOptions& opt) {
    Scenario sc = load_scenario(opt);
    ScenarioRun run(sc, opt.workers);
    run.certify();
    if (!run.certification().all_passed() && !opt.force) {
        std::fprintf(stderr,
                     "assumption certification failed; run `qmxw check-assumptions` for the "
                     "report or pass --force\n");
        return 3;
    }
    run.prepare(opt.force);
    run.execute();

    const std::string trace_path = joined_path(opt.out_dir, sc.out_trace);
    write_trace_csv(trace_path, run.trace());
    if (!sc.out_checkpoint.empty())
        write_checkpoint(joined_path(opt.out_dir, sc.out_checkpoint), sc.domain,
                         run.final_state());
    if (!sc.out_summary.empty()) {
        const std::string path = joined_path(opt.out_dir, sc.out_summary);
        std::FILE* f = std::fopen(path.c_str(), "w");
        if (!f) throw Error(ErrorClass::config, "IO_ERROR", "cannot write " + path);
        const TraceRow& last = run.trace().rows.back();
        std::fprintf(f, "t_final = %.17g\n", last.t);
        std::fprintf(f, "final_e0 = %.17g\n", last.e[0]);
        std::fprintf(f, "final_e = %.17g\n", last.e[3]);
        std::fprintf(f, "final_z = %.17g\n", last.z[3]);
        std::fprintf(f, "final_divD = %.17g\n", last.divD);
        std::fprintf(f, "final_divB = %.17g\n", last.divB);
        std::fprintf(f, "final_bc_residual = %.17g\n", last.bc_residual);
        std::fprintf(f, "wall_seconds = %.3f\n", run.wall_seconds());
        // Decay-rate section over the tail of the run, when it is fittable.
        try {
            const double lo = std::min(1.0, 0.5 * last.t);
            const auto fit = decay_fit(run.trace(), DecayQuantity::e0, lo, last.t);
            std::fprintf(f, "decay.omega = %.17g\n", fit.omega);
            std::fprintf(f, "decay.prefactor = %.17g\n", fit.prefactor);
            std::fprintf(f, "decay.r2 = %.17g\n", fit.r2);
        } catch (const Error&) {
            std::fprintf(f, "decay.omega = nan\n");
        }
        std::fclose(f);
    }
    std::printf("run complete: t=%.6g steps-wall=%.2fs trace=%s rows=%zu\n",
                run.final_state().t, run.wall_seconds(), trace_path.c_str(),
                run.trace().rows.size());
    return 0;
}

int cmd_verify(const CommandOptions& opt, const std::string& which) {
    Scenario sc = load_scenario(opt);
    int failures = 0;
    if (which == "energy" || which == "multiplier" || which == "all") {
        ScenarioRun run(sc, opt.workers);
        run.certify();
        if (!run.certification().all_passed() && !opt.force) {
            std::fprintf(stderr, "assumption certification failed; pass --force to verify anyway\n");
            return 3;
        }
        run.prepare(opt.force);
        run.execute();
        if (which == "energy" || which == "all") failures += print_checks(verify_energy(run));
        if (which == "multiplier" || which == "all")
            failures += print_checks(verify_multiplier(run));
    }
    if (which == "divcurl" || which == "all")
        failures += print_checks(verify_divcurl(opt.workers));
    if (which == "compat" || which == "all")
        failures += print_checks(verify_compat(sc, opt.workers));
    if (which != "energy" && which != "multiplier" && which != "divcurl" &&
        which != "compat" && which != "all")
        throw Error(ErrorClass::config, "UNKNOWN_SUITE",
                    "verify suite must be energy|multiplier|divcurl|compat|all");
    std::printf("%s\n", failures == 0 ? "ALL CHECKS PASSED" : "CHECKS FAILED");
    return failures == 0 ? 0 : 5;
}

int cmd_decay_fit(const std::string& trace_path, double t_lo, double t_hi) {
    const EnergyTrace trace = read_trace_csv(trace_path);
    if (trace.rows.empty())
        throw Error(ErrorClass::verification, "MISSING_ARTIFACTS", "trace has no rows");
    if (t_hi <= t_lo) {
        t_hi = trace.rows.back().t;
    }
    for (const char* name : {"e0", "e", "z"}) {
        try {
            const auto fit =
                decay_fit(trace, decay_quantity_from_string(name), t_lo, t_hi);
            std::printf("%s.omega = %.17g\n%s.prefactor = %.17g\n%s.r2 = %.17g\n", name,
                        fit.omega, name, fit.prefactor, name, fit.r2);
        } catch (const Error& e) {
            std::printf("%s.error = %s\n", name, e.code().c_str());
            if (std::string(name) == "e0") throw;
        }
    }
    return 0;
}

}  // namespace qmxw
