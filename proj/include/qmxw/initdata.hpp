#ifndef QMXW_INITDATA_HPP
#define QMXW_INITDATA_HPP

#include <cstdint>
#include <string>

#include "qmxw/materials.hpp"
#include "qmxw/sbp.hpp"

namespace qmxw {

/// Initial data with the formal time derivatives at t = 0 built from it.
struct InitialData {
    Field3 E0, H0;
    Field3 E1, H1, E2, H2;
    double compat_residual[3] = {0, 0, 0};  // boundary residual per order
    double div_residual_eps = 0.0;          // weak divergence after enforcement
    double div_residual_mu = 0.0;
    int sweeps_eps = 0;
    int sweeps_mu = 0;
    double r_proxy = 0.0;  // sqrt of the discrete H^3 energy of (E0, H0)
};

/// First and second formal time derivatives at t = 0:
///   E1 = lin_eps(E0)^{-1} curl H0,
///   H1 = -lin_mu(H0)^{-1} curl E0,
///   E2 = lin_eps(E0)^{-1} [curl H1 - (grad_xi lin_eps(E0) E1) . E1],
///   H2 = -lin_mu(H0)^{-1} [curl E1 + (grad_xi lin_mu(H0) H1) . H1],
/// with ((grad A) xi . eta)_j = sum_{i,k} dA_{jk}/dxi_i xi_k eta_i and all
/// curls discrete. The xi-derivative of the linearized tensor comes from
/// central differences of eval_linearized (step 1e-4).
void build_compat_fields(const SbpOperators& ops, const MaterialLaw& law, InitialData& data);

/// Boundary quadrature norm of H x nu + (lambda (E x nu)) x nu.
double boundary_condition_residual(const SbpOperators& ops, const BoundaryFrame& frames,
                                   const Impedance& lambda, const Field3& E, const Field3& H);

struct ProjectionResult {
    int sweeps = 0;
    double residual = 0.0;
};

/// Removes the discrete gradient part of T(x, field) field: fixed-point
/// sweeps solving the variable-coefficient Neumann problem
///   divW(lin(field) grad phi) = divW(T(field) field),  field -= grad phi,
/// until the weak divergence norm drops below tol_div. The weak divergence
/// divW (zero-flux closure) is used throughout: it is the adjoint-consistent
/// divergence for which the SPD Poisson solve and the residual agree exactly.
/// Throws NO_CONVERGENCE after max_sweeps.
ProjectionResult project_solenoidal(const SbpOperators& ops, const MaterialLaw& law,
                                    Tensor which, Field3& field, double tol_div,
                                    int max_sweeps = 25);

enum class InitialKind { gaussian_bump, modulated_wave, random_smooth };

InitialKind initial_kind_from_string(const std::string& s);
std::string to_string(InitialKind kind);

struct InitialParams {
    InitialKind kind = InitialKind::gaussian_bump;
    double amplitude = 0.1;
    std::uint64_t seed = 1;
    double width_frac = 0.25;  // support half-width as a fraction of the extent
    int mode_count = 3;        // random_smooth only
};

/// Deterministic initial data: compactly supported vector potentials (hence
/// exactly solenoidal discrete curls and vanishing boundary traces), then
/// solenoidal projection for the nonlinear flux densities, then the
/// compatibility fields.
InitialData make_scenario(const SbpOperators& ops, const BoundaryFrame& frames,
                          const MaterialLaw& law, const Impedance& lambda,
                          const InitialParams& params);

}  // namespace qmxw

#endif
