#ifndef QMXW_MATERIALS_HPP
#define QMXW_MATERIALS_HPP

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "qmxw/geometry.hpp"
#include "qmxw/vec3.hpp"

namespace qmxw {

/// Rank-3 array d[k](j,l) = d(eps_{jl}) / d(xi_k).
using Rank3 = std::array<Mat33, 3>;

/// Constitutive law: tensor fields eps(x, xi) and mu(x, xi) with their
/// xi-derivatives. Normalized units (vacuum permittivity/permeability = 1).
/// All evaluators are pure and thread-safe.
class MaterialLaw {
public:
    virtual ~MaterialLaw() = default;

    virtual std::string name() const = 0;

    virtual Mat33 eval_eps(const Vec3& x, const Vec3& xi) const = 0;
    virtual Mat33 eval_mu(const Vec3& x, const Vec3& xi) const = 0;

    /// deps[k](j,l) = d eps_{jl} / d xi_k (analytic for all built-ins).
    virtual Rank3 deps_dxi(const Vec3& x, const Vec3& xi) const = 0;
    virtual Rank3 dmu_dxi(const Vec3& x, const Vec3& xi) const = 0;

    /// Directional spatial derivative (d . grad_x) eps(x, 0) when available
    /// analytically; otherwise callers fall back to central differences.
    virtual bool has_spatial_gradient() const { return false; }
    virtual Mat33 eps_xgrad_dir(const Vec3& x, const Vec3& d) const;
    virtual Mat33 mu_xgrad_dir(const Vec3& x, const Vec3& d) const;
};

/// Which of the two constitutive tensors an operation refers to.
enum class Tensor { eps, mu };

/// Linearization of xi |-> T(x, xi) xi, the Jacobian that governs both
/// hyperbolicity and the Newton inversion:
///   lin_{jk} = T_{jk} + sum_l dT_{jl}/dxi_k xi_l.
Mat33 eval_linearized(const MaterialLaw& law, Tensor which, const Vec3& x, const Vec3& xi);

/// d(eval_linearized)/dxi_i (j,k)-entry by central differences of the
/// linearized tensor; used by compatibility-field construction.
Rank3 linearized_xi_derivative(const MaterialLaw& law, Tensor which, const Vec3& x,
                               const Vec3& xi, double step = 1e-4);

/// Boundary impedance tensor field. Must map the tangent plane into itself.
class Impedance {
public:
    virtual ~Impedance() = default;
    virtual std::string name() const = 0;
    virtual Mat33 eval_lambda(const Vec3& x) const = 0;
};

/// One worst-case sample recorded by a certification sampler.
struct WorstSample {
    Vec3 x{};
    Vec3 xi{};
    double margin = 0.0;
};

/// Certified constants with the samples attaining them. Reproducible
/// bit-for-bit for a fixed seed.
struct AssumptionReport {
    std::string check;
    bool passed = false;
    double eta = 0.0;
    double delta_tilde = 0.0;   // positivity radius in (0, 1]
    double kappa = 0.0;         // star-shape coercivity constant
    double worst_value = 0.0;   // check-specific extremal value
    std::vector<WorstSample> worst_samples;
    std::string detail;
};

/// Max over samples of the linearized-tensor asymmetry ||lin - lin^T||_inf,
/// x in the domain, |xi| <= 1. Passed iff <= 1e-12.
AssumptionReport check_linearized_symmetry(const MaterialLaw& law, const BoxDomain& box,
                                           int sample_count, std::uint64_t seed);

/// Largest dyadic radius delta in (0, 1] such that eps, mu and their
/// linearizations stay >= eta I for all sampled |xi| <= delta. Throws
/// FAILS_AT_ZERO when eps(x,0) or mu(x,0) < 2 eta I at a sample.
AssumptionReport check_local_positivity(const MaterialLaw& law, const BoxDomain& box,
                                        double eta, int sample_count, std::uint64_t seed);

/// kappa = min over grid samples of the smallest generalized eigenvalue of
/// (T(x,0) + (m . grad_x) T(x,0)) relative to T(x,0), over both tensors.
/// Spatial gradient analytic when the law provides it, else central
/// difference with the given step. Throws SINGULAR_REFERENCE when T(x,0) is
/// numerically singular.
AssumptionReport check_starshape_coercivity(const MaterialLaw& law, const BoxDomain& box,
                                            double fd_step = 1e-6);

/// Impedance checks: tangentiality ((lambda w) . nu = 0 for w in the tangent
/// plane) and lambda >= eta I on the tangent plane, over all boundary nodes.
AssumptionReport check_impedance(const Impedance& lambda, const BoxDomain& box, double eta);

// ---- Built-in law catalog -------------------------------------------------

/// eps = eps_scale I, mu = mu_scale I.
std::unique_ptr<MaterialLaw> make_constant_isotropic(double eps_scale, double mu_scale);

/// Constant symmetric positive definite tensors.
std::unique_ptr<MaterialLaw> make_constant_anisotropic(const Mat33& eps, const Mat33& mu);

/// Spatially varying isotropic a(x) I with a from a named profile:
///   quadratic: a(x) = base * (1 + coeff |x - x0|^2)
///   exp_m1:    a(x) = base * exp(coeff * (x - x0).e1)
std::unique_ptr<MaterialLaw> make_varying_isotropic(const std::string& profile, double base,
                                                    double coeff, const Vec3& x0);

/// Scalar Kerr: eps = (eps_base + eps_kerr |xi|^2) I, mu likewise.
std::unique_ptr<MaterialLaw> make_kerr_isotropic(double eps_base, double eps_kerr,
                                                 double mu_base, double mu_kerr);

/// Anisotropic Kerr: eps = A + a (xi xi^T + |xi|^2 I), mu = B + b (...).
std::unique_ptr<MaterialLaw> make_kerr_anisotropic(const Mat33& eps0, double eps_coupling,
                                                   const Mat33& mu0, double mu_coupling);

/// Law with a deliberately asymmetric linearization (single-entry coupling),
/// used to exercise the symmetry checker's failure path.
std::unique_ptr<MaterialLaw> make_asymmetric_test_law(double coupling);

// ---- Built-in impedance catalog -------------------------------------------

std::unique_ptr<Impedance> make_impedance_scalar(double value);
std::unique_ptr<Impedance> make_impedance_diag(double d0, double d1, double d2);
/// lambda = I + c (nu_ref tau^T + tau nu_ref^T): symmetric but not
/// tangential on faces orthogonal to nu_ref. Counterexample for the checker.
std::unique_ptr<Impedance> make_impedance_nontangential(double coupling);

}  // namespace qmxw

#endif
