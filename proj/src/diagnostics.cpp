#include "qmxw/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>

namespace qmxw {

int EnergyTrace::index_at(double t) const {
    int best = 0;
    double dist = 1e300;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double d = std::abs(rows[i].t - t);
        if (d < dist) {
            dist = d;
            best = static_cast<int>(i);
        }
    }
    return best;
}

std::vector<double> fd_weights(int m, double x0, const std::vector<double>& nodes) {
    // Fornberg's recursion for finite-difference weights on arbitrary nodes.
    const int n = static_cast<int>(nodes.size());
    std::vector<std::vector<double>> c(n, std::vector<double>(m + 1, 0.0));
    double c1 = 1.0;
    double c4 = nodes[0] - x0;
    c[0][0] = 1.0;
    for (int i = 1; i < n; ++i) {
        const int mn = std::min(i, m);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = nodes[i] - x0;
        for (int j = 0; j < i; ++j) {
            const double c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int s = mn; s >= 1; --s)
                    c[i][s] = c1 * (s * c[i - 1][s - 1] - c5 * c[i - 1][s]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (int s = mn; s >= 1; --s)
                c[j][s] = (c4 * c[j][s] - s * c[j][s - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) w[i] = c[i][m];
    return w;
}

namespace {

// Per-order Sobolev contributions: out[o] = sum_{|alpha| = o} ||D^alpha u||_W^2.
std::vector<double> sobolev_partials(const SbpOperators& ops, const Field3& u, int mmax) {
    std::vector<double> out(mmax + 1, 0.0);
    out[0] = ops.dot_w(u, u);
    struct Entry {
        Field3 f;
        int last_axis;
    };
    std::vector<Entry> level;
    if (mmax > 0) level.push_back({u, 0});
    for (int order = 1; order <= mmax; ++order) {
        std::vector<Entry> next;
        for (const auto& e : level)
            for (int axis = e.last_axis; axis < 3; ++axis) {
                Entry d;
                d.last_axis = axis;
                ops.d1(axis, D1Variant::sbp, e.f, d.f);
                out[order] += ops.dot_w(d.f, d.f);
                next.push_back(std::move(d));
            }
        level = std::move(next);
    }
    return out;
}

struct TensorFields {
    // Current-time weights: variant 0 is the constitutive tensor itself,
    // variant 1 its linearization.
    std::vector<Mat33> a0e, a1e, a0m, a1m;
    // Time derivatives along the trace: d[j], j = 1..3, of the variant-1
    // weights, and j = 1 of the variant-0 weights.
    std::array<std::vector<Mat33>, 4> d1e, d1m;  // index j (0 unused)
    std::vector<Mat33> d0e, d0m;
};

}  // namespace

// ---- TraceBuilder -----------------------------------------------------------

TraceBuilder::TraceBuilder(const MaxwellSystem& sys, const InitialData* seed_data)
    : sys_(sys), seed_(seed_data) {}

void TraceBuilder::on_snapshot(const FieldState& state, const StepAccount& account) {
    ring_.push_back(state);
    ring_diss_.push_back(account.acc_dissipation);
    ring_pen_.push_back(account.acc_penalty);
    if (ring_.size() > 4) {
        ring_.pop_front();
        ring_diss_.pop_front();
        ring_pen_.pop_front();
    }
    ++snapshots_seen_;
    if (snapshots_seen_ == 4) {
        // Ring is full: flush the deferred early rows (forward stencils),
        // then the current one.
        for (std::size_t r = 0; r < 4; ++r) emit_row(r);
    } else if (snapshots_seen_ > 4) {
        emit_row(snapshots_seen_ - 1);
    }
}

EnergyTrace TraceBuilder::finalize() {
    if (!finalized_ && snapshots_seen_ > 0 && snapshots_seen_ < 4) {
        for (std::size_t r = 0; r < snapshots_seen_; ++r) emit_row(r);
    }
    finalized_ = true;
    EnergyTrace t;
    t.rows = std::move(rows_);
    return t;
}

void TraceBuilder::emit_row(std::size_t row_index) {
    // Position of this row's snapshot inside the ring.
    const std::size_t first_in_ring = snapshots_seen_ - ring_.size();
    const std::size_t pos = row_index - first_in_ring;
    std::vector<int> window(ring_.size());
    for (std::size_t i = 0; i < ring_.size(); ++i) window[i] = static_cast<int>(i);
    const bool seed_compat = row_index == 0 && seed_ != nullptr;
    DerivStack stack = build_stack(window, ring_[pos].t, seed_compat);
    rows_.push_back(
        compute_row(ring_[pos], stack, window, ring_diss_[pos], ring_pen_[pos]));
}

DerivStack TraceBuilder::build_stack(const std::vector<int>& window, double t_eval,
                                     bool seed_with_compat) const {
    DerivStack stack;
    stack.t = t_eval;
    const std::size_t n = ring_.front().E.size();
    std::vector<double> times;
    times.reserve(window.size());
    for (int i : window) times.push_back(ring_[i].t);
    for (int j = 0; j < 4; ++j) {
        stack.dE[j].assign(n, Vec3{});
        stack.dH[j].assign(n, Vec3{});
        if (j >= static_cast<int>(window.size())) continue;
        const std::vector<double> w = fd_weights(j, t_eval, times);
        for (std::size_t wi = 0; wi < window.size(); ++wi) {
            const Field3& e = ring_[window[wi]].E;
            const Field3& h = ring_[window[wi]].H;
            const double c = w[wi];
            if (c == 0.0) continue;
            sys_.ops().workers().parallel_for(n, [&](std::size_t i) {
                stack.dE[j][i] += c * e[i];
                stack.dH[j][i] += c * h[i];
            });
        }
    }
    if (seed_with_compat) {
        stack.dE[1] = seed_->E1;
        stack.dH[1] = seed_->H1;
        stack.dE[2] = seed_->E2;
        stack.dH[2] = seed_->H2;
    }
    return stack;
}

TraceRow TraceBuilder::compute_row(const FieldState& at, const DerivStack& stack,
                                   const std::vector<int>& window, double acc_diss,
                                   double acc_pen) const {
    const SbpOperators& ops = sys_.ops();
    const MaterialLaw& law = sys_.law();
    const BoxDomain& box = ops.box();
    const std::size_t n = at.E.size();
    const double sigma = sys_.sat_strength();

    TraceRow row;
    row.t = at.t;
    row.acc_diss = acc_diss;
    row.acc_pen = acc_pen;

    // Current-time weight tensors and their time derivatives along the ring.
    TensorFields tf;
    tf.a0e.resize(n);
    tf.a1e.resize(n);
    tf.a0m.resize(n);
    tf.a1m.resize(n);
    ops.workers().parallel_for(n, [&](std::size_t i) {
        const Vec3 x = box.position(i);
        tf.a0e[i] = law.eval_eps(x, at.E[i]);
        tf.a1e[i] = eval_linearized(law, Tensor::eps, x, at.E[i]);
        tf.a0m[i] = law.eval_mu(x, at.H[i]);
        tf.a1m[i] = eval_linearized(law, Tensor::mu, x, at.H[i]);
    });

    std::vector<double> times;
    for (int i : window) times.push_back(ring_[i].t);
    const int maxder = std::min<int>(3, static_cast<int>(window.size()) - 1);
    tf.d0e.assign(n, Mat33{});
    tf.d0m.assign(n, Mat33{});
    for (int j = 1; j <= 3; ++j) {
        tf.d1e[j].assign(n, Mat33{});
        tf.d1m[j].assign(n, Mat33{});
    }
    if (maxder >= 1) {
        std::array<std::vector<double>, 4> w;
        for (int j = 1; j <= maxder; ++j) w[j] = fd_weights(j, at.t, times);
        for (std::size_t wi = 0; wi < window.size(); ++wi) {
            const FieldState& s = ring_[window[wi]];
            ops.workers().parallel_for(n, [&](std::size_t i) {
                const Vec3 x = box.position(i);
                const Mat33 t0e = law.eval_eps(x, s.E[i]);
                const Mat33 t1e = eval_linearized(law, Tensor::eps, x, s.E[i]);
                const Mat33 t0m = law.eval_mu(x, s.H[i]);
                const Mat33 t1m = eval_linearized(law, Tensor::mu, x, s.H[i]);
                tf.d0e[i] += w[1][wi] * t0e;
                tf.d0m[i] += w[1][wi] * t0m;
                for (int j = 1; j <= maxder; ++j) {
                    tf.d1e[j][i] += w[j][wi] * t1e;
                    tf.d1m[j][i] += w[j][wi] * t1m;
                }
            });
        }
    }

    // Volume quadratic forms per derivative order and weight variant.
    double qE[4][2], qH[4][2];
    for (int j = 0; j < 4; ++j) {
        const Field3& u = stack.dE[j];
        const Field3& v = stack.dH[j];
        qE[j][0] = ops.workers().reduce_sum(
            n, [&](std::size_t i) { return ops.weight(i) * dot(u[i], tf.a0e[i] * u[i]); });
        qE[j][1] = ops.workers().reduce_sum(
            n, [&](std::size_t i) { return ops.weight(i) * dot(u[i], tf.a1e[i] * u[i]); });
        qH[j][0] = ops.workers().reduce_sum(
            n, [&](std::size_t i) { return ops.weight(i) * dot(v[i], tf.a0m[i] * v[i]); });
        qH[j][1] = ops.workers().reduce_sum(
            n, [&](std::size_t i) { return ops.weight(i) * dot(v[i], tf.a1m[i] * v[i]); });
    }

    // Sobolev tables S[j][m] = ||u_j||_{H^m}^2 cumulative.
    double SE[4][4] = {}, SH[4][4] = {};
    for (int j = 0; j < 4; ++j) {
        const auto pe = sobolev_partials(ops, stack.dE[j], 3 - j);
        const auto ph = sobolev_partials(ops, stack.dH[j], 3 - j);
        double ce = 0.0, ch = 0.0;
        for (int m = 0; m <= 3 - j; ++m) {
            ce += pe[m];
            ch += ph[m];
            SE[j][m] = ce;
            SH[j][m] = ch;
        }
    }

    // Boundary sums per order.
    const auto& bdata = sys_.boundary_data();
    double dq[4] = {}, pen[4] = {}, otr[4] = {}, oux[4] = {};
    for (int j = 0; j < 4; ++j) {
        const Field3& u = stack.dE[j];
        const Field3& v = stack.dH[j];
        std::vector<double> p1(bdata.size()), p2(bdata.size()), p3(bdata.size()),
            p4(bdata.size());
        for (std::size_t i = 0; i < bdata.size(); ++i) {
            const auto& d = bdata[i];
            const Vec3 uu = u[d.node];
            const Vec3 vv = v[d.node];
            const Vec3 e = cross(uu, d.nu);
            const Vec3 le = d.lambda * e;
            const Vec3 s = vv - dot(vv, d.nu) * d.nu + le;
            p1[i] = d.w_surf * dot(le, e);
            p2[i] = d.w_surf * (-(1.0 + sigma) * dot(s, e) + sigma * dot(s, d.lambda_tan_inv * s));
            p3[i] = d.w_surf * (dot(uu, tf.a0e[d.node] * uu) + dot(vv, tf.a0m[d.node] * vv));
            p4[i] = d.w_surf * norm2(e);
        }
        dq[j] = pairwise_sum(p1);
        pen[j] = pairwise_sum(p2);
        otr[j] = pairwise_sum(p3);
        oux[j] = pairwise_sum(p4);
    }
    // Variant-1 boundary trace forms for k >= 1.
    double otr1[4] = {};
    for (int j = 0; j < 4; ++j) {
        const Field3& u = stack.dE[j];
        const Field3& v = stack.dH[j];
        std::vector<double> p(bdata.size());
        for (std::size_t i = 0; i < bdata.size(); ++i) {
            const auto& d = bdata[i];
            p[i] = d.w_surf * (dot(u[d.node], tf.a1e[d.node] * u[d.node]) +
                               dot(v[d.node], tf.a1m[d.node] * v[d.node]));
        }
        otr1[j] = pairwise_sum(p);
    }

    // Commutator forcings.
    auto binom = [](int k, int j) {
        static const int table[4][4] = {{1, 0, 0, 0}, {1, 1, 0, 0}, {1, 2, 1, 0}, {1, 3, 3, 1}};
        return static_cast<double>(table[k][j]);
    };
    std::array<Field3, 4> phi, psi;  // phi_k = -f~_k (k>=1), phi_0 = -(dt a0) E
    for (int k = 0; k < 4; ++k) {
        phi[k].assign(n, Vec3{});
        psi[k].assign(n, Vec3{});
    }
    ops.workers().parallel_for(n, [&](std::size_t i) {
        phi[0][i] = -1.0 * (tf.d0e[i] * stack.dE[0][i]);
        psi[0][i] = -1.0 * (tf.d0m[i] * stack.dH[0][i]);
        for (int k = 1; k < 4; ++k) {
            Vec3 fe{}, fh{};
            for (int j = 1; j <= k; ++j) {
                fe += binom(k, j) * (tf.d1e[j][i] * stack.dE[k + 1 - j][i]);
                fh += binom(k, j) * (tf.d1m[j][i] * stack.dH[k + 1 - j][i]);
            }
            phi[k][i] = -1.0 * fe;
            psi[k][i] = -1.0 * fh;
        }
    });

    // Conservative-form commutators f_k (orders 2, 3) and their time
    // derivatives, for the observability right-hand side.
    Field3 f2(n), f3(n), g2(n), g3(n), df2(n), df3(n), dg2(n), dg3(n);
    ops.workers().parallel_for(n, [&](std::size_t i) {
        const Vec3 e1 = stack.dE[1][i], e2 = stack.dE[2][i], e3 = stack.dE[3][i];
        const Vec3 h1 = stack.dH[1][i], h2 = stack.dH[2][i], h3 = stack.dH[3][i];
        f2[i] = tf.d1e[1][i] * e1;
        g2[i] = tf.d1m[1][i] * h1;
        f3[i] = tf.d1e[2][i] * e1 + 2.0 * (tf.d1e[1][i] * e2);
        g3[i] = tf.d1m[2][i] * h1 + 2.0 * (tf.d1m[1][i] * h2);
        df2[i] = tf.d1e[2][i] * e1 + tf.d1e[1][i] * e2;
        dg2[i] = tf.d1m[2][i] * h1 + tf.d1m[1][i] * h2;
        df3[i] = tf.d1e[3][i] * e1 + 3.0 * (tf.d1e[2][i] * e2) + 2.0 * (tf.d1e[1][i] * e3);
        dg3[i] = tf.d1m[3][i] * h1 + 3.0 * (tf.d1m[2][i] * h2) + 2.0 * (tf.d1m[1][i] * h3);
    });
    ScalarField divf2, divf3, divg2, divg3;
    ops.div(f2, divf2);
    ops.div(f3, divf3);
    ops.div(g2, divg2);
    ops.div(g3, divg3);

    // Assemble per-k row entries.
    for (int k = 0; k < 4; ++k) {
        const int variant = k == 0 ? 0 : 1;
        double emax = 0.0, dmax = 0.0, zmax = 0.0;
        for (int j = 0; j <= k; ++j) {
            emax = std::max(emax, qE[j][variant] + qH[j][variant]);
            dmax = std::max(dmax, dq[j]);
            zmax = std::max(zmax, SE[j][k - j] + SH[j][k - j]);
        }
        row.e[k] = 0.5 * emax;
        row.d[k] = dmax;
        row.z[k] = zmax;
        row.en2[k] = qE[k][variant] + qH[k][variant];
        row.bnd_rate[k] = 2.0 * dq[k];
        row.pen_rate[k] = 2.0 * pen[k];
        row.obs_tr[k] = variant == 0 ? otr[k] : otr1[k];
        row.obs_uxnu[k] = oux[k];
        row.l2uv[k] = ops.dot_w(stack.dE[k], stack.dE[k]) + ops.dot_w(stack.dH[k], stack.dH[k]);
        row.forcing[k] =
            2.0 * (ops.dot_w(stack.dE[k], phi[k]) + ops.dot_w(stack.dH[k], psi[k]));
        // d/dt of the order-k weights contracted with the order-k fields.
        const auto& dte = variant == 0 ? tf.d0e : tf.d1e[1];
        const auto& dtm = variant == 0 ? tf.d0m : tf.d1m[1];
        row.dtcoef[k] = ops.workers().reduce_sum(n, [&](std::size_t i) {
            return ops.weight(i) * (dot(stack.dE[k][i], dte[i] * stack.dE[k][i]) +
                                    dot(stack.dH[k][i], dtm[i] * stack.dH[k][i]));
        });
        if (k >= 2) {
            const Field3& dfk = k == 2 ? df2 : df3;
            const Field3& dgk = k == 2 ? dg2 : dg3;
            const ScalarField& dfv = k == 2 ? divf2 : divf3;
            const ScalarField& dgv = k == 2 ? divg2 : divg3;
            row.obs_forcing[k] = ops.workers().reduce_sum(n, [&](std::size_t i) {
                return ops.weight(i) *
                       (norm(dfk[i]) * norm(stack.dH[k][i]) + norm(dgk[i]) * norm(stack.dE[k][i]));
            });
            row.obs_div[k] = ops.workers().reduce_sum(n, [&](std::size_t i) {
                return ops.weight(i) * (std::abs(dfv[i]) * norm(stack.dE[k][i]) +
                                        std::abs(dgv[i]) * norm(stack.dH[k][i]));
            });
        }
        double tmax = 0.0;
        const auto& ae = variant == 0 ? tf.a0e : tf.a1e;
        const auto& am = variant == 0 ? tf.a0m : tf.a1m;
        tmax = ops.workers().reduce_max(n, [&](std::size_t i) {
            return std::max(inf_norm(ae[i]), inf_norm(am[i]));
        });
        row.tensor_max[k] = tmax;
    }

    // Divergence and boundary residual columns.
    ScalarField divD, divB;
    ops.div(at.D, divD);
    ops.div(at.B, divB);
    row.divD = ops.norm_w(divD);
    row.divB = ops.norm_w(divB);
    row.bc_residual = sys_.bc_residual_norm(at.E, at.H);
    return row;
}

// ---- Standalone functionals -------------------------------------------------

double energy_ek(const MaxwellSystem& sys, const DerivStack& stack, const Field3& E_now,
                 const Field3& H_now, int k) {
    const SbpOperators& ops = sys.ops();
    const BoxDomain& box = ops.box();
    const std::size_t n = E_now.size();
    double emax = 0.0;
    for (int j = 0; j <= k; ++j) {
        const double qe = ops.workers().reduce_sum(n, [&](std::size_t i) {
            const Vec3 x = box.position(i);
            const Mat33 a = k == 0 ? sys.law().eval_eps(x, E_now[i])
                                   : eval_linearized(sys.law(), Tensor::eps, x, E_now[i]);
            return ops.weight(i) * dot(stack.dE[j][i], a * stack.dE[j][i]);
        });
        const double qh = ops.workers().reduce_sum(n, [&](std::size_t i) {
            const Vec3 x = box.position(i);
            const Mat33 b = k == 0 ? sys.law().eval_mu(x, H_now[i])
                                   : eval_linearized(sys.law(), Tensor::mu, x, H_now[i]);
            return ops.weight(i) * dot(stack.dH[j][i], b * stack.dH[j][i]);
        });
        emax = std::max(emax, qe + qh);
    }
    return 0.5 * emax;
}

double dissipation_dk(const MaxwellSystem& sys, const DerivStack& stack, int k) {
    const auto& bdata = sys.boundary_data();
    double dmax = 0.0;
    for (int j = 0; j <= k; ++j) {
        std::vector<double> p(bdata.size());
        for (std::size_t i = 0; i < bdata.size(); ++i) {
            const auto& d = bdata[i];
            const Vec3 e = cross(stack.dE[j][d.node], d.nu);
            p[i] = d.w_surf * dot(d.lambda * e, e);
        }
        dmax = std::max(dmax, pairwise_sum(p));
    }
    return dmax;
}

double z_norm_k(const SbpOperators& ops, const DerivStack& stack, int k) {
    double zmax = 0.0;
    for (int j = 0; j <= k; ++j)
        zmax = std::max(zmax, sobolev_norm2(ops, stack.dE[j], k - j) +
                                  sobolev_norm2(ops, stack.dH[j], k - j));
    return zmax;
}

double multiplier_functional(const SbpOperators& ops, const Field3& u, const Field3& v,
                             const std::vector<Mat33>& alpha, const std::vector<Mat33>& beta) {
    const BoxDomain& box = ops.box();
    return ops.workers().reduce_sum(u.size(), [&](std::size_t i) {
        const Vec3 m = box.multiplier(box.position(i));
        const Vec3 au = alpha.empty() ? u[i] : alpha[i] * u[i];
        const Vec3 bv = beta.empty() ? v[i] : beta[i] * v[i];
        return ops.weight(i) * dot(cross(m, au), bv);
    });
}

double curl_multiplier_identity_check(const SbpOperators& ops, const std::vector<Mat33>& beta,
                                      const Field3& v) {
    const BoxDomain& box = ops.box();
    const std::size_t n = v.size();
    Field3 bv(n);
    ops.workers().parallel_for(
        n, [&](std::size_t i) { bv[i] = beta.empty() ? v[i] : beta[i] * v[i]; });
    Field3 mxbv(n);
    ops.workers().parallel_for(n, [&](std::size_t i) {
        mxbv[i] = cross(box.multiplier(box.position(i)), bv[i]);
    });
    Field3 lhs;
    ops.curl(mxbv, lhs, D1Variant::pointwise);
    ScalarField divbv;
    ops.div(bv, divbv, D1Variant::pointwise);
    Field3 dx, dy, dz;
    ops.d1(0, D1Variant::pointwise, bv, dx);
    ops.d1(1, D1Variant::pointwise, bv, dy);
    ops.d1(2, D1Variant::pointwise, bv, dz);
    Field3 resid(n);
    ops.workers().parallel_for(n, [&](std::size_t i) {
        const Vec3 m = box.multiplier(box.position(i));
        const Vec3 mgrad = m.x * dx[i] + m.y * dy[i] + m.z * dz[i];
        const Vec3 rhs = divbv[i] * m - 2.0 * bv[i] - mgrad;
        resid[i] = lhs[i] - rhs;
    });
    return ops.norm_w(resid);
}

// ---- Trace checks -----------------------------------------------------------

namespace {

double trapezoid(const EnergyTrace& trace, int s, int t,
                 const std::function<double(const TraceRow&)>& f) {
    double total = 0.0;
    for (int i = s; i < t; ++i) {
        const double dt = trace.rows[i + 1].t - trace.rows[i].t;
        total += 0.5 * dt * (f(trace.rows[i]) + f(trace.rows[i + 1]));
    }
    return total;
}

bool has_accumulators(const EnergyTrace& trace, int s, int t) {
    return trace.rows[t].acc_diss != 0.0 || trace.rows[t].acc_pen != 0.0 ||
           trace.rows[s].acc_diss != 0.0 || trace.rows[s].acc_pen != 0.0;
}

}  // namespace

EnergyBalanceReport energy_balance_residual(const EnergyTrace& trace, int k, int row_s,
                                            int row_t) {
    const TraceRow& rs = trace.rows[row_s];
    const TraceRow& rt = trace.rows[row_t];
    EnergyBalanceReport rep;
    double boundary_loss;
    if (k == 0 && has_accumulators(trace, row_s, row_t)) {
        boundary_loss = 2.0 * (rt.acc_diss + rt.acc_pen - rs.acc_diss - rs.acc_pen);
        rep.used_accumulated = true;
    } else {
        boundary_loss = trapezoid(trace, row_s, row_t, [k](const TraceRow& r) {
            return r.bnd_rate[k] + r.pen_rate[k];
        });
    }
    const double forcing =
        trapezoid(trace, row_s, row_t, [k](const TraceRow& r) { return r.forcing[k]; });
    const double dtcoef =
        trapezoid(trace, row_s, row_t, [k](const TraceRow& r) { return r.dtcoef[k]; });
    rep.lhs = rt.en2[k] + boundary_loss;
    rep.rhs = rs.en2[k] + forcing + dtcoef;
    rep.residual = std::abs(rep.lhs - rep.rhs) / (rs.e[k] + 1e-30);
    return rep;
}

DissipativityReport dissipativity_check(const EnergyTrace& trace, int k, int row_s,
                                        int row_t) {
    const TraceRow& rs = trace.rows[row_s];
    const TraceRow& rt = trace.rows[row_t];
    DissipativityReport rep;
    double int_d;
    if (k == 0 && has_accumulators(trace, row_s, row_t))
        int_d = rt.acc_diss - rs.acc_diss;
    else
        int_d = trapezoid(trace, row_s, row_t, [k](const TraceRow& r) { return r.d[k]; });
    rep.lhs = rt.e[k] + int_d;
    rep.rhs_base = rs.e[k];
    rep.int_z32 = trapezoid(trace, row_s, row_t,
                            [](const TraceRow& r) { return std::pow(r.z[3], 1.5); });
    rep.int_z32_low = trapezoid(trace, row_s, row_t,
                                [](const TraceRow& r) { return std::pow(r.z[2], 1.5); });
    const double excess = rep.lhs - rep.rhs_base;
    rep.minimal_c1 = excess <= 0.0 ? 0.0 : excess / std::max(rep.int_z32, 1e-300);
    rep.minimal_c1_low = excess <= 0.0 ? 0.0 : excess / std::max(rep.int_z32_low, 1e-300);
    return rep;
}

ObservabilityReport observability_check(const EnergyTrace& trace, int k, int row_s, int row_t,
                                        double kappa, double eta_bar, double m_inf,
                                        double lambda_max) {
    ObservabilityReport rep;
    double mmax = lambda_max;
    for (int i = row_s; i <= row_t; ++i) mmax = std::max(mmax, trace.rows[i].tensor_max[k]);
    rep.constant_m = mmax;
    const double int_vol =
        trapezoid(trace, row_s, row_t, [k](const TraceRow& r) { return r.en2[k]; });
    const double int_tr =
        trapezoid(trace, row_s, row_t, [k](const TraceRow& r) { return r.obs_tr[k]; });
    const double int_uxnu =
        trapezoid(trace, row_s, row_t, [k](const TraceRow& r) { return r.obs_uxnu[k]; });
    const double int_forcing =
        trapezoid(trace, row_s, row_t, [k](const TraceRow& r) { return r.obs_forcing[k]; });
    const double int_div =
        trapezoid(trace, row_s, row_t, [k](const TraceRow& r) { return r.obs_div[k]; });
    rep.lhs = 0.25 * kappa * int_vol + 0.25 * eta_bar * int_tr;
    rep.rhs = (m_inf * m_inf / eta_bar) * mmax * (1.0 + mmax) * (1.0 + mmax) * int_uxnu +
              0.5 * m_inf * mmax * mmax *
                  (trace.rows[row_t].l2uv[k] + trace.rows[row_s].l2uv[k]) +
              m_inf * (mmax * int_forcing + int_div);
    rep.slack = rep.rhs - rep.lhs;
    rep.holds = rep.lhs <= rep.rhs * (1.0 + 1e-12) + 1e-30;
    return rep;
}

DecayQuantity decay_quantity_from_string(const std::string& s) {
    if (s == "e0") return DecayQuantity::e0;
    if (s == "e") return DecayQuantity::e;
    if (s == "z") return DecayQuantity::z;
    throw Error(ErrorClass::config, "UNKNOWN_QUANTITY", "decay quantity must be e0, e or z");
}

DecayFit decay_fit(const EnergyTrace& trace, DecayQuantity q, double t_lo, double t_hi) {
    auto value = [&](const TraceRow& r) {
        switch (q) {
            case DecayQuantity::e0: return r.e[0];
            case DecayQuantity::e: return r.e[3];
            case DecayQuantity::z: return r.z[3];
        }
        return 0.0;
    };
    std::vector<double> ts, ys;
    for (const TraceRow& r : trace.rows) {
        if (r.t < t_lo - 1e-12 || r.t > t_hi + 1e-12) continue;
        const double v = value(r);
        if (v <= 0.0)
            throw Error(ErrorClass::verification, "NONPOSITIVE_VALUES",
                        "decay fit window contains nonpositive values");
        ts.push_back(r.t);
        ys.push_back(std::log(v));
    }
    if (ts.size() < 2)
        throw Error(ErrorClass::verification, "NONPOSITIVE_VALUES",
                    "decay fit window holds fewer than two rows");
    const double nr = static_cast<double>(ts.size());
    double st = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        st += ts[i];
        sy += ys[i];
    }
    const double mt = st / nr, my = sy / nr;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        sxx += (ts[i] - mt) * (ts[i] - mt);
        sxy += (ts[i] - mt) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    const double slope = sxy / sxx;
    DecayFit fit;
    fit.omega = -slope;
    fit.prefactor = std::exp(my - slope * mt);
    double ssres = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const double pred = my + slope * (ts[i] - mt);
        ssres += (ys[i] - pred) * (ys[i] - pred);
    }
    fit.r2 = syy <= 1e-28 ? 1.0 : 1.0 - ssres / syy;
    fit.t_lo = t_lo;
    fit.t_hi = t_hi;
    fit.rows_used = static_cast<int>(ts.size());
    return fit;
}

RegularityFit regularity_fit(const std::vector<const EnergyTrace*>& traces) {
    std::vector<double> zs, es;
    double zmax = 0.0;
    for (const EnergyTrace* t : traces)
        for (const TraceRow& r : t->rows) zmax = std::max(zmax, r.z[3]);
    if (zmax <= 1e-28)
        throw Error(ErrorClass::verification, "DEGENERATE_FIT", "all z values vanish");
    for (const EnergyTrace* t : traces)
        for (const TraceRow& r : t->rows) {
            if (r.z[3] <= 1e-12 * zmax) continue;  // noise floor rows carry no signal
            zs.push_back(r.z[3]);
            es.push_back(r.e[3]);
        }
    if (zs.size() < 2)
        throw Error(ErrorClass::verification, "DEGENERATE_FIT", "not enough usable rows");

    // Weighted nonnegative least squares of 1 ~ c5 (e/z) + c6 z.
    auto fit_ls = [&](bool use_c5, bool use_c6) {
        double a11 = 0, a12 = 0, a22 = 0, b1 = 0, b2 = 0;
        for (std::size_t i = 0; i < zs.size(); ++i) {
            const double x1 = es[i] / zs[i];
            const double x2 = zs[i];
            a11 += x1 * x1;
            a12 += x1 * x2;
            a22 += x2 * x2;
            b1 += x1;
            b2 += x2;
        }
        double c5 = 0.0, c6 = 0.0;
        if (use_c5 && use_c6) {
            const double det = a11 * a22 - a12 * a12;
            if (std::abs(det) > 1e-300) {
                c5 = (b1 * a22 - b2 * a12) / det;
                c6 = (a11 * b2 - a12 * b1) / det;
            }
        } else if (use_c5) {
            c5 = a11 > 0 ? b1 / a11 : 0.0;
        } else if (use_c6) {
            c6 = a22 > 0 ? b2 / a22 : 0.0;
        }
        return std::make_pair(c5, c6);
    };
    auto [c5, c6] = fit_ls(true, true);
    if (c5 < 0.0 || c6 < 0.0) {
        auto [c5a, c6a] = fit_ls(true, false);
        auto [c5b, c6b] = fit_ls(false, true);
        auto score = [&](double a, double b) {
            double s = 0.0;
            for (std::size_t i = 0; i < zs.size(); ++i) {
                const double r = 1.0 - a * es[i] / zs[i] - b * zs[i];
                s += r * r;
            }
            return s;
        };
        if (c5a >= 0.0 && (c6b < 0.0 || score(c5a, 0.0) <= score(0.0, c6b))) {
            c5 = std::max(0.0, c5a);
            c6 = 0.0;
        } else {
            c5 = 0.0;
            c6 = std::max(0.0, c6b);
        }
    }

    // Minimal inflation clearing the hinge violations to <= 1% of z.
    double rho = 1.0;
    for (std::size_t i = 0; i < zs.size(); ++i) {
        const double denom = c5 * es[i] + c6 * zs[i] * zs[i];
        if (denom <= 0.0)
            throw Error(ErrorClass::verification, "DEGENERATE_FIT", "fit collapsed to zero");
        rho = std::max(rho, zs[i] / denom / 1.01);
    }
    c5 *= rho;
    c6 *= rho;

    RegularityFit out;
    out.c5 = c5;
    out.c6 = c6;
    out.rows = zs.size();
    double viol = 0.0;
    for (std::size_t i = 0; i < zs.size(); ++i) {
        const double v = (zs[i] - c5 * es[i] - c6 * zs[i] * zs[i]) / zs[i];
        viol = std::max(viol, v);
    }
    out.max_violation_rel = std::max(0.0, viol);
    return out;
}

// ---- CSV --------------------------------------------------------------------

const char* kTraceCsvHeader = "t,e0,e1,e2,e3,d0,d1,d2,d3,z0,z1,z2,z3,divD,divB,bc_residual";

void write_trace_csv(const std::string& path, const EnergyTrace& trace) {
    std::ofstream os(path);
    if (!os) throw Error(ErrorClass::config, "IO_ERROR", "cannot open " + path);
    os << kTraceCsvHeader << "\n";
    char buf[32];
    auto put = [&](double v, char sep) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << buf << sep;
    };
    for (const TraceRow& r : trace.rows) {
        put(r.t, ',');
        for (int k = 0; k < 4; ++k) put(r.e[k], ',');
        for (int k = 0; k < 4; ++k) put(r.d[k], ',');
        for (int k = 0; k < 4; ++k) put(r.z[k], ',');
        put(r.divD, ',');
        put(r.divB, ',');
        std::snprintf(buf, sizeof buf, "%.17g", r.bc_residual);
        os << buf << "\n";
    }
    if (!os) throw Error(ErrorClass::config, "IO_ERROR", "write failed: " + path);
}

EnergyTrace read_trace_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        throw Error(ErrorClass::verification, "MISSING_ARTIFACTS", "cannot open " + path);
    std::string line;
    if (!std::getline(is, line) || line != kTraceCsvHeader)
        throw Error(ErrorClass::config, "BAD_CSV", "unexpected header in " + path);
    EnergyTrace trace;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
        if (vals.size() != 16)
            throw Error(ErrorClass::config, "BAD_CSV", "malformed row in " + path);
        TraceRow r;
        r.t = vals[0];
        for (int k = 0; k < 4; ++k) r.e[k] = vals[1 + k];
        for (int k = 0; k < 4; ++k) r.d[k] = vals[5 + k];
        for (int k = 0; k < 4; ++k) r.z[k] = vals[9 + k];
        r.divD = vals[13];
        r.divB = vals[14];
        r.bc_residual = vals[15];
        trace.rows.push_back(r);
    }
    return trace;
}

}  // namespace qmxw
