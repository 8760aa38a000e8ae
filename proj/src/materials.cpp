#include "qmxw/materials.hpp"

#include <algorithm>
#include <cmath>

#include "qmxw/rng.hpp"

namespace qmxw {

Mat33 MaterialLaw::eps_xgrad_dir(const Vec3&, const Vec3&) const {
    throw Error(ErrorClass::config, "NO_ANALYTIC_GRADIENT",
                "law does not provide analytic spatial gradients");
}
Mat33 MaterialLaw::mu_xgrad_dir(const Vec3&, const Vec3&) const {
    throw Error(ErrorClass::config, "NO_ANALYTIC_GRADIENT",
                "law does not provide analytic spatial gradients");
}

Mat33 eval_linearized(const MaterialLaw& law, Tensor which, const Vec3& x, const Vec3& xi) {
    const Mat33 t = which == Tensor::eps ? law.eval_eps(x, xi) : law.eval_mu(x, xi);
    const Rank3 d = which == Tensor::eps ? law.deps_dxi(x, xi) : law.dmu_dxi(x, xi);
    Mat33 lin = t;
    for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) {
            double s = 0.0;
            for (int l = 0; l < 3; ++l) s += d[k](j, l) * xi[l];
            lin(j, k) += s;
        }
    return lin;
}

Rank3 linearized_xi_derivative(const MaterialLaw& law, Tensor which, const Vec3& x,
                               const Vec3& xi, double step) {
    Rank3 out;
    for (int i = 0; i < 3; ++i) {
        Vec3 p = xi, m = xi;
        p[i] += step;
        m[i] -= step;
        const Mat33 lp = eval_linearized(law, which, x, p);
        const Mat33 lm = eval_linearized(law, which, x, m);
        out[i] = (1.0 / (2.0 * step)) * (lp - lm);
    }
    return out;
}

namespace {

Vec3 sample_in_box(Rng& rng, const BoxDomain& box) {
    return {rng.next_in(box.corner.x, box.corner.x + box.extent.x),
            rng.next_in(box.corner.y, box.corner.y + box.extent.y),
            rng.next_in(box.corner.z, box.corner.z + box.extent.z)};
}

void record_worst(AssumptionReport& rep, const Vec3& x, const Vec3& xi, double margin) {
    rep.worst_samples.push_back({x, xi, margin});
    std::sort(rep.worst_samples.begin(), rep.worst_samples.end(),
              [](const WorstSample& a, const WorstSample& b) { return a.margin < b.margin; });
    if (rep.worst_samples.size() > 3) rep.worst_samples.resize(3);
}

}  // namespace

AssumptionReport check_linearized_symmetry(const MaterialLaw& law, const BoxDomain& box,
                                           int sample_count, std::uint64_t seed) {
    if (sample_count < 1)
        throw Error(ErrorClass::config, "BAD_SAMPLE_COUNT", "sample_count must be >= 1");
    AssumptionReport rep;
    rep.check = "linearized_symmetry";
    Rng rng(seed);
    double worst = -1.0;
    for (int s = 0; s < sample_count; ++s) {
        const Vec3 x = sample_in_box(rng, box);
        const Vec3 xi = rng.next_in_ball(1.0);
        for (Tensor which : {Tensor::eps, Tensor::mu}) {
            const Mat33 lin = eval_linearized(law, which, x, xi);
            const double asym = max_abs_entry(lin - transpose(lin));
            if (asym > worst) {
                worst = asym;
                record_worst(rep, x, xi, -asym);
            }
        }
    }
    rep.worst_value = std::max(worst, 0.0);
    rep.passed = worst <= 1e-12;
    rep.detail = "max ||lin - lin^T||_inf over samples";
    return rep;
}

AssumptionReport check_local_positivity(const MaterialLaw& law, const BoxDomain& box,
                                        double eta, int sample_count, std::uint64_t seed) {
    if (eta <= 0.0) throw Error(ErrorClass::config, "BAD_ETA", "eta must be positive");
    if (sample_count < 1)
        throw Error(ErrorClass::config, "BAD_SAMPLE_COUNT", "sample_count must be >= 1");
    AssumptionReport rep;
    rep.check = "local_positivity";
    rep.eta = eta;

    // Reference positivity at xi = 0 must hold with margin 2 eta.
    {
        Rng rng(seed);
        for (int s = 0; s < sample_count; ++s) {
            const Vec3 x = sample_in_box(rng, box);
            for (Tensor which : {Tensor::eps, Tensor::mu}) {
                const Mat33 t = which == Tensor::eps ? law.eval_eps(x, {0, 0, 0})
                                                     : law.eval_mu(x, {0, 0, 0});
                const double lo = sym_eigenvalues(t)[0];
                if (lo < 2.0 * eta)
                    throw Error(ErrorClass::assumption, "FAILS_AT_ZERO",
                                "tensor at xi = 0 is below 2 eta I (law '" + law.name() + "')");
            }
        }
    }

    // All-samples minimum eigenvalue margin at radius r. Half the xi samples
    // sit exactly on the sphere |xi| = r where positivity is typically lost
    // first.
    auto min_margin = [&](double r) {
        Rng rng(seed + 1);
        double margin = 1e300;
        Vec3 wx{}, wxi{};
        for (int s = 0; s < sample_count; ++s) {
            const Vec3 x = sample_in_box(rng, box);
            Vec3 xi = rng.next_in_ball(1.0);
            if (s % 2 == 0) {
                const double n = norm(xi);
                if (n > 1e-12) xi = (1.0 / n) * xi;
            }
            xi *= r;
            for (Tensor which : {Tensor::eps, Tensor::mu}) {
                const Mat33 t =
                    which == Tensor::eps ? law.eval_eps(x, xi) : law.eval_mu(x, xi);
                const Mat33 lin = eval_linearized(law, which, x, xi);
                const double lo = std::min(sym_eigenvalues(t)[0], sym_eigenvalues(lin)[0]);
                if (lo - eta < margin) {
                    margin = lo - eta;
                    wx = x;
                    wxi = xi;
                }
            }
        }
        return std::make_pair(margin, WorstSample{wx, wxi, margin});
    };

    // Dyadic search for the largest admissible radius in (0, 1].
    const int kDepth = 12;
    double delta = 0.0;
    WorstSample worst{};
    auto full = min_margin(1.0);
    if (full.first >= 0.0) {
        delta = 1.0;
        worst = full.second;
    } else {
        double lo = 0.0, hi = 1.0;
        for (int d = 0; d < kDepth; ++d) {
            const double mid = 0.5 * (lo + hi);
            auto res = min_margin(mid);
            if (res.first >= 0.0) {
                lo = mid;
                worst = res.second;
            } else {
                hi = mid;
            }
        }
        delta = lo;
    }
    rep.delta_tilde = delta;
    rep.passed = delta > 0.0;
    rep.worst_value = worst.margin;
    rep.worst_samples.push_back(worst);
    rep.detail = "largest dyadic radius with min-eig margin >= 0";
    return rep;
}

AssumptionReport check_starshape_coercivity(const MaterialLaw& law, const BoxDomain& box,
                                            double fd_step) {
    box.validate();
    AssumptionReport rep;
    rep.check = "starshape_coercivity";
    double kappa = 1e300;
    const Vec3 zero{0, 0, 0};
    const std::size_t nn = box.node_count();
    for (std::size_t idx = 0; idx < nn; ++idx) {
        const Vec3 x = box.position(idx);
        const Vec3 m = box.multiplier(x);
        for (Tensor which : {Tensor::eps, Tensor::mu}) {
            const Mat33 ref =
                which == Tensor::eps ? law.eval_eps(x, zero) : law.eval_mu(x, zero);
            Mat33 mgrad;
            if (law.has_spatial_gradient()) {
                mgrad = which == Tensor::eps ? law.eps_xgrad_dir(x, m) : law.mu_xgrad_dir(x, m);
            } else {
                const Vec3 xp = x + fd_step * m;
                const Vec3 xm = x - fd_step * m;
                const Mat33 tp =
                    which == Tensor::eps ? law.eval_eps(xp, zero) : law.eval_mu(xp, zero);
                const Mat33 tm =
                    which == Tensor::eps ? law.eval_eps(xm, zero) : law.eval_mu(xm, zero);
                mgrad = (1.0 / (2.0 * fd_step)) * (tp - tm);
            }
            double lo = 0.0;
            if (!min_generalized_eigenvalue(ref + mgrad, ref, lo))
                throw Error(ErrorClass::assumption, "SINGULAR_REFERENCE",
                            "tensor at xi = 0 is numerically singular");
            if (lo < kappa) {
                kappa = lo;
                rep.worst_samples.clear();
                rep.worst_samples.push_back({x, zero, lo});
            }
        }
    }
    rep.kappa = kappa;
    rep.worst_value = kappa;
    rep.passed = kappa > 0.0;
    rep.detail = "min generalized eigenvalue of (T + (m.grad)T) vs T";
    return rep;
}

AssumptionReport check_impedance(const Impedance& lambda, const BoxDomain& box, double eta) {
    AssumptionReport rep;
    rep.check = "impedance";
    rep.eta = eta;
    BoundaryFrame bf(box);
    double worst_tangentiality = 0.0;
    double worst_eig = 1e300;
    for (const auto& bn : bf.nodes()) {
        const FaceFrame& fr = bf.frame(bn.face);
        const Vec3 x = box.position(bn.node);
        const Mat33 lam = lambda.eval_lambda(x);
        for (const Vec3& tau : {fr.tau1, fr.tau2}) {
            const double leak = std::abs(dot(lam * tau, fr.nu));
            if (leak > worst_tangentiality) {
                worst_tangentiality = leak;
                record_worst(rep, x, tau, -leak);
            }
        }
        // Tangential 2x2 block eigenvalues.
        const double a = dot(fr.tau1, lam * fr.tau1);
        const double b = dot(fr.tau1, lam * fr.tau2);
        const double c = dot(fr.tau2, lam * fr.tau2);
        const double disc = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
        const double lo = 0.5 * (a + c) - disc;
        if (lo < worst_eig) {
            worst_eig = lo;
            record_worst(rep, x, fr.nu, lo - eta);
        }
    }
    const bool tangential = worst_tangentiality <= 1e-12;
    const bool positive = worst_eig >= eta;
    rep.passed = tangential && positive;
    rep.worst_value = tangential ? worst_eig : -worst_tangentiality;
    rep.detail = tangential ? "min tangential eigenvalue"
                            : "tangentiality violated: max |(lambda w) . nu|";
    return rep;
}

// ---- Catalog ---------------------------------------------------------------

namespace {

class ConstantLaw final : public MaterialLaw {
public:
    ConstantLaw(const Mat33& eps, const Mat33& mu, std::string name)
        : eps_(eps), mu_(mu), name_(std::move(name)) {}
    std::string name() const override { return name_; }
    Mat33 eval_eps(const Vec3&, const Vec3&) const override { return eps_; }
    Mat33 eval_mu(const Vec3&, const Vec3&) const override { return mu_; }
    Rank3 deps_dxi(const Vec3&, const Vec3&) const override { return {}; }
    Rank3 dmu_dxi(const Vec3&, const Vec3&) const override { return {}; }
    bool has_spatial_gradient() const override { return true; }
    Mat33 eps_xgrad_dir(const Vec3&, const Vec3&) const override { return {}; }
    Mat33 mu_xgrad_dir(const Vec3&, const Vec3&) const override { return {}; }

private:
    Mat33 eps_, mu_;
    std::string name_;
};

class VaryingIsotropicLaw final : public MaterialLaw {
public:
    VaryingIsotropicLaw(std::string profile, double base, double coeff, const Vec3& x0)
        : profile_(std::move(profile)), base_(base), coeff_(coeff), x0_(x0) {
        if (profile_ != "quadratic" && profile_ != "exp_m1")
            throw Error(ErrorClass::config, "UNKNOWN_PROFILE",
                        "varying-isotropic profile must be quadratic or exp_m1");
    }
    std::string name() const override { return "var_iso_" + profile_; }
    Mat33 eval_eps(const Vec3& x, const Vec3&) const override {
        return Mat33::scaled_identity(value(x));
    }
    Mat33 eval_mu(const Vec3&, const Vec3&) const override { return Mat33::identity(); }
    Rank3 deps_dxi(const Vec3&, const Vec3&) const override { return {}; }
    Rank3 dmu_dxi(const Vec3&, const Vec3&) const override { return {}; }
    bool has_spatial_gradient() const override { return true; }
    Mat33 eps_xgrad_dir(const Vec3& x, const Vec3& d) const override {
        const Vec3 m = x - x0_;
        double g = 0.0;
        if (profile_ == "quadratic")
            g = base_ * coeff_ * 2.0 * dot(d, m);
        else
            g = coeff_ * d.x * value(x);
        return Mat33::scaled_identity(g);
    }
    Mat33 mu_xgrad_dir(const Vec3&, const Vec3&) const override { return {}; }

private:
    double value(const Vec3& x) const {
        const Vec3 m = x - x0_;
        if (profile_ == "quadratic") return base_ * (1.0 + coeff_ * norm2(m));
        return base_ * std::exp(coeff_ * m.x);
    }
    std::string profile_;
    double base_, coeff_;
    Vec3 x0_;
};

class KerrIsotropicLaw final : public MaterialLaw {
public:
    KerrIsotropicLaw(double eb, double ek, double mb, double mk)
        : eb_(eb), ek_(ek), mb_(mb), mk_(mk) {}
    std::string name() const override { return "kerr_iso"; }
    Mat33 eval_eps(const Vec3&, const Vec3& xi) const override {
        return Mat33::scaled_identity(eb_ + ek_ * norm2(xi));
    }
    Mat33 eval_mu(const Vec3&, const Vec3& xi) const override {
        return Mat33::scaled_identity(mb_ + mk_ * norm2(xi));
    }
    Rank3 deps_dxi(const Vec3&, const Vec3& xi) const override { return iso_deriv(ek_, xi); }
    Rank3 dmu_dxi(const Vec3&, const Vec3& xi) const override { return iso_deriv(mk_, xi); }
    bool has_spatial_gradient() const override { return true; }
    Mat33 eps_xgrad_dir(const Vec3&, const Vec3&) const override { return {}; }
    Mat33 mu_xgrad_dir(const Vec3&, const Vec3&) const override { return {}; }

private:
    static Rank3 iso_deriv(double k, const Vec3& xi) {
        Rank3 d;
        for (int i = 0; i < 3; ++i) d[i] = Mat33::scaled_identity(2.0 * k * xi[i]);
        return d;
    }
    double eb_, ek_, mb_, mk_;
};

class KerrAnisotropicLaw final : public MaterialLaw {
public:
    KerrAnisotropicLaw(const Mat33& e0, double ec, const Mat33& m0, double mc)
        : e0_(e0), ec_(ec), m0_(m0), mc_(mc) {}
    std::string name() const override { return "kerr_aniso"; }
    Mat33 eval_eps(const Vec3&, const Vec3& xi) const override { return kerr(e0_, ec_, xi); }
    Mat33 eval_mu(const Vec3&, const Vec3& xi) const override { return kerr(m0_, mc_, xi); }
    Rank3 deps_dxi(const Vec3&, const Vec3& xi) const override { return deriv(ec_, xi); }
    Rank3 dmu_dxi(const Vec3&, const Vec3& xi) const override { return deriv(mc_, xi); }
    bool has_spatial_gradient() const override { return true; }
    Mat33 eps_xgrad_dir(const Vec3&, const Vec3&) const override { return {}; }
    Mat33 mu_xgrad_dir(const Vec3&, const Vec3&) const override { return {}; }

private:
    static Mat33 kerr(const Mat33& a, double c, const Vec3& xi) {
        return a + c * (Mat33::outer(xi, xi) + Mat33::scaled_identity(norm2(xi)));
    }
    // d/dxi_k [a (xi_j xi_l + |xi|^2 d_jl)] = a (d_jk xi_l + xi_j d_lk + 2 xi_k d_jl)
    static Rank3 deriv(double a, const Vec3& xi) {
        Rank3 d;
        for (int k = 0; k < 3; ++k) {
            Mat33 m;
            for (int j = 0; j < 3; ++j)
                for (int l = 0; l < 3; ++l) {
                    double v = 0.0;
                    if (j == k) v += xi[l];
                    if (l == k) v += xi[j];
                    if (j == l) v += 2.0 * xi[k];
                    m(j, l) = a * v;
                }
            d[k] = m;
        }
        return d;
    }
    Mat33 e0_;
    double ec_;
    Mat33 m0_;
    double mc_;
};

class AsymmetricTestLaw final : public MaterialLaw {
public:
    explicit AsymmetricTestLaw(double c) : c_(c) {
        s_ = Mat33{};
        s_(0, 1) = s_(1, 0) = c_;
    }
    std::string name() const override { return "asymmetric_test"; }
    Mat33 eval_eps(const Vec3&, const Vec3& xi) const override {
        return Mat33::identity() + xi.x * s_;
    }
    Mat33 eval_mu(const Vec3&, const Vec3&) const override { return Mat33::identity(); }
    Rank3 deps_dxi(const Vec3&, const Vec3&) const override {
        Rank3 d{};
        d[0] = s_;
        return d;
    }
    Rank3 dmu_dxi(const Vec3&, const Vec3&) const override { return {}; }

private:
    double c_;
    Mat33 s_;
};

class ScalarImpedance final : public Impedance {
public:
    explicit ScalarImpedance(double v) : v_(v) {}
    std::string name() const override { return "scalar"; }
    Mat33 eval_lambda(const Vec3&) const override { return Mat33::scaled_identity(v_); }

private:
    double v_;
};

class DiagImpedance final : public Impedance {
public:
    DiagImpedance(double a, double b, double c) : a_(a), b_(b), c_(c) {}
    std::string name() const override { return "diag"; }
    Mat33 eval_lambda(const Vec3&) const override { return Mat33::diag(a_, b_, c_); }

private:
    double a_, b_, c_;
};

class NonTangentialImpedance final : public Impedance {
public:
    explicit NonTangentialImpedance(double c) : c_(c) {}
    std::string name() const override { return "nontangential"; }
    Mat33 eval_lambda(const Vec3&) const override {
        Mat33 m = Mat33::identity();
        m(0, 1) += c_;
        m(1, 0) += c_;
        m(0, 2) += c_;
        m(2, 0) += c_;
        return m;
    }

private:
    double c_;
};

}  // namespace

std::unique_ptr<MaterialLaw> make_constant_isotropic(double eps_scale, double mu_scale) {
    return std::make_unique<ConstantLaw>(Mat33::scaled_identity(eps_scale),
                                         Mat33::scaled_identity(mu_scale), "const_iso");
}
std::unique_ptr<MaterialLaw> make_constant_anisotropic(const Mat33& eps, const Mat33& mu) {
    return std::make_unique<ConstantLaw>(eps, mu, "const_aniso");
}
std::unique_ptr<MaterialLaw> make_varying_isotropic(const std::string& profile, double base,
                                                    double coeff, const Vec3& x0) {
    return std::make_unique<VaryingIsotropicLaw>(profile, base, coeff, x0);
}
std::unique_ptr<MaterialLaw> make_kerr_isotropic(double eps_base, double eps_kerr,
                                                 double mu_base, double mu_kerr) {
    return std::make_unique<KerrIsotropicLaw>(eps_base, eps_kerr, mu_base, mu_kerr);
}
std::unique_ptr<MaterialLaw> make_kerr_anisotropic(const Mat33& eps0, double eps_coupling,
                                                   const Mat33& mu0, double mu_coupling) {
    return std::make_unique<KerrAnisotropicLaw>(eps0, eps_coupling, mu0, mu_coupling);
}
std::unique_ptr<MaterialLaw> make_asymmetric_test_law(double coupling) {
    return std::make_unique<AsymmetricTestLaw>(coupling);
}

std::unique_ptr<Impedance> make_impedance_scalar(double value) {
    return std::make_unique<ScalarImpedance>(value);
}
std::unique_ptr<Impedance> make_impedance_diag(double d0, double d1, double d2) {
    return std::make_unique<DiagImpedance>(d0, d1, d2);
}
std::unique_ptr<Impedance> make_impedance_nontangential(double coupling) {
    return std::make_unique<NonTangentialImpedance>(coupling);
}

}  // namespace qmxw
