#ifndef QMXW_SBP_HPP
#define QMXW_SBP_HPP

#include <vector>

#include "qmxw/geometry.hpp"
#include "qmxw/parallel.hpp"
#include "qmxw/vec3.hpp"

namespace qmxw {

using ScalarField = std::vector<double>;  // one value per node
using Field3 = std::vector<Vec3>;         // one 3-vector per node

/// First-derivative closure variant.
///  - sbp: summation-by-parts rows (first-order one-sided at the ends);
///    satisfies W D1 + D1^T W = diag(-1,0,...,0,1) exactly and powers all
///    quadrature-coupled operators (energies, fluxes, Sobolev norms).
///  - pointwise: second-order one-sided end rows; used where pointwise
///    accuracy at the boundary matters (normal-derivative reconstruction).
enum class D1Variant { sbp, pointwise };

/// Tensor-product difference operators on a box grid: 2nd-order interior
/// stencils with diagonal norm. Exact on linear functions in every row.
class SbpOperators {
public:
    SbpOperators(const BoxDomain& box, const Workers& workers);

    const BoxDomain& box() const { return box_; }
    const Workers& workers() const { return workers_; }
    std::size_t node_count() const { return box_.node_count(); }

    /// Diagonal quadrature weight of a node (product of 1D weights).
    double weight(std::size_t idx) const { return w_[idx]; }
    const ScalarField& weights() const { return w_; }

    /// d/dx_axis of a scalar field.
    void d1(int axis, D1Variant variant, const ScalarField& in, ScalarField& out) const;
    /// Componentwise d/dx_axis of a vector field.
    void d1(int axis, D1Variant variant, const Field3& in, Field3& out) const;

    /// curl F = sum_j J_j (d_j F).
    void curl(const Field3& in, Field3& out, D1Variant variant = D1Variant::sbp) const;
    /// div F = sum_j d_j F_j.
    void div(const Field3& in, ScalarField& out, D1Variant variant = D1Variant::sbp) const;
    /// grad phi = (d_1 phi, d_2 phi, d_3 phi).
    void grad(const ScalarField& in, Field3& out, D1Variant variant = D1Variant::sbp) const;

    /// Weak divergence with the zero-flux (Neumann) closure built in:
    /// divW F = -W^{-1} sum_j D_j^T W F_j. Coincides with div at interior
    /// nodes; at boundary nodes it differs by the normal flux term
    /// F.nu / w_normal, which the SBP identity makes exact.
    void div_weak(const Field3& in, ScalarField& out) const;

    // Deterministic quadrature reductions.
    double dot_w(const ScalarField& a, const ScalarField& b) const;
    double dot_w(const Field3& a, const Field3& b) const;
    double norm_w(const ScalarField& a) const { return std::sqrt(dot_w(a, a)); }
    double norm_w(const Field3& a) const { return std::sqrt(dot_w(a, a)); }

    /// Volume of the box as seen by the quadrature (exact).
    double volume() const;

    /// Verifies W D1 + D1^T W = B entrywise on the unit-spacing reference
    /// operators, where every entry is a small dyadic rational and floating
    /// point arithmetic is exact. Returns the max absolute defect.
    static double sbp_identity_defect(int n);

private:
    void apply_line(int axis, D1Variant variant, const double* in, double* out,
                    std::ptrdiff_t stride, int n, double inv_h) const;

    BoxDomain box_;
    Workers workers_;
    ScalarField w_;
};

/// Discrete Sobolev seminorm stack: sum over all multi-indices |alpha| <= m
/// of ||D^alpha u||_W^2 (repeated SBP derivatives, boundary closures
/// included). Returns the squared norm.
double sobolev_norm2(const SbpOperators& ops, const Field3& u, int m);

}  // namespace qmxw

#endif
