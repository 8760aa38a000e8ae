#ifndef QMXW_DIVCURL_HPP
#define QMXW_DIVCURL_HPP

#include <functional>
#include <string>
#include <vector>

#include "qmxw/materials.hpp"
#include "qmxw/sbp.hpp"

namespace qmxw {

/// Closed-form test field with analytic first derivatives, evaluated on the
/// grid on demand.
struct ManufacturedField {
    std::string name;
    std::function<Vec3(const Vec3&)> value;
    std::function<Mat33(const Vec3&)> jacobian;  // J(i,j) = d u_i / d x_j

    Vec3 analytic_curl(const Vec3& x) const {
        const Mat33 j = jacobian(x);
        return {j(2, 1) - j(1, 2), j(0, 2) - j(2, 0), j(1, 0) - j(0, 1)};
    }
    double analytic_div(const Vec3& x) const {
        const Mat33 j = jacobian(x);
        return j(0, 0) + j(1, 1) + j(2, 2);
    }

    void sample(const BoxDomain& box, Field3& out) const;
};

/// Standard corpus: linear fields, gradients, curls and trigonometric
/// combinations. Deterministic.
std::vector<ManufacturedField> manufactured_corpus();

struct H1BoundReport {
    double lhs = 0.0;          // ||u||_H1 + ||v||_H1
    double rhs = 0.0;          // curl/div volume norms + boundary-datum norm
    double empirical_c = 0.0;  // lhs / rhs
    double h_half_norm = 0.0;  // interpolation-norm surrogate of the datum
};

/// Both sides of the div-curl reconstruction bound with the impedance datum
/// h = v x nu + (lambda (u x nu)) x nu. The fractional boundary norm uses
/// the interpolation surrogate sqrt(||h||_L2 ||h||_H1(Gamma)) with
/// tangential derivatives per face. Throws ZERO_RHS when the right side
/// vanishes (and asserts the left side vanishes too).
H1BoundReport h1_bound_check(const SbpOperators& ops, const BoundaryFrame& frames,
                             const Field3& u, const Field3& v,
                             const std::vector<Mat33>& alpha, const std::vector<Mat33>& beta,
                             const Impedance& lambda);

/// Normal derivative of the tangential components on boundary nodes,
/// reconstructed from the curl and tangential derivatives:
///   dn u^tau = R(nu) (curl u - sum_i J(tau_i) d_{tau_i} u).
/// Face frames are constant, so no lower-order terms appear. Uses
/// second-order one-sided closures for pointwise accuracy. Returns one value
/// per boundary node (in frames.nodes() order).
std::vector<Vec3> normal_from_curl(const SbpOperators& ops, const BoundaryFrame& frames,
                                   const Field3& u);

/// Direct one-sided differencing of the same quantity (comparison baseline).
std::vector<Vec3> normal_direct(const SbpOperators& ops, const BoundaryFrame& frames,
                                const Field3& u, bool tangential_part);

/// Normal derivative of the normal component from the divergence identity:
///   a_nn dn u_n = div(alpha u) - sum_{(xi,zeta) != (n,n)} a_xz d_xi u_zeta
///                 - sum_{xi,zeta} (d_xi a_xz) u_zeta,
/// (frame divergence terms vanish on box faces). alpha_grad[axis] holds the
/// spatial derivative of alpha along that axis, sampled on the grid; empty
/// means a constant alpha. Throws SMALL_PIVOT when a_nn < eta/2.
std::vector<double> normalnormal_from_div(const SbpOperators& ops, const BoundaryFrame& frames,
                                          const Field3& u, const std::vector<Mat33>& alpha,
                                          const std::array<std::vector<Mat33>, 3>& alpha_grad,
                                          double eta);

}  // namespace qmxw

#endif
