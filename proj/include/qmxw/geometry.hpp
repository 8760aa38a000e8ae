#ifndef QMXW_GEOMETRY_HPP
#define QMXW_GEOMETRY_HPP

#include <cstddef>
#include <vector>

#include "qmxw/error.hpp"
#include "qmxw/vec3.hpp"

namespace qmxw {

/// Axis-aligned box, discretized with cell-vertex collocated nodes
/// (cells[a] + 1 nodes per axis). Strictly star-shaped about x0.
struct BoxDomain {
    Vec3 corner{0, 0, 0};
    Vec3 extent{1, 1, 1};
    int cells[3] = {8, 8, 8};
    Vec3 x0{0.5, 0.5, 0.5};

    void validate() const;

    int nodes(int axis) const { return cells[axis] + 1; }
    std::size_t node_count() const {
        return static_cast<std::size_t>(nodes(0)) * nodes(1) * nodes(2);
    }
    double spacing(int axis) const { return (&extent.x)[axis] / cells[axis]; }
    double min_spacing() const;

    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(nodes(0)) *
                   (static_cast<std::size_t>(j) + static_cast<std::size_t>(nodes(1)) * k);
    }
    Vec3 position(int i, int j, int k) const {
        return {corner.x + i * spacing(0), corner.y + j * spacing(1), corner.z + k * spacing(2)};
    }
    Vec3 position(std::size_t idx) const;

    /// Star-shape multiplier m(x) = x - x0.
    Vec3 multiplier(const Vec3& x) const { return x - x0; }
};

/// One collocation node on one face. Nodes on edges and corners appear once
/// per incident face; boundary quadrature is summed face-wise.
struct BoundaryNode {
    std::size_t node = 0;   // volume index
    int face = 0;           // 0..5: -x,+x,-y,+y,-z,+z
    double w_surf = 0.0;    // product of the two transverse 1D weights
    double w_normal = 0.0;  // 1D boundary weight along the face normal (h_n/2)
};

/// Per-face orthonormal right-handed frame {tau1, tau2, nu}; constant on each
/// box face, so frame derivatives vanish identically.
struct FaceFrame {
    Vec3 nu, tau1, tau2;
};

/// Boundary discretization: per-face frames plus the face-wise node lists.
class BoundaryFrame {
public:
    explicit BoundaryFrame(const BoxDomain& box);

    const FaceFrame& frame(int face) const { return frames_[face]; }
    const std::vector<BoundaryNode>& nodes() const { return nodes_; }

    /// Total face-wise quadrature measure (sums to the surface area).
    double surface_measure() const;

private:
    FaceFrame frames_[6];
    std::vector<BoundaryNode> nodes_;
};

/// Cross-product matrix: J_of(xi) w = xi x w. For xi = e3 this reproduces
/// [[0,-1,0],[1,0,0],[0,0,0]].
Mat33 J_of(const Vec3& xi);

/// Inverse of J_of(nu) on the tangent plane, vanishing on span{nu}.
/// Equals -J_of(nu) because J(nu)^2 = nu nu^T - I. Throws NON_UNIT_NORMAL
/// when |nu| deviates from 1 by more than 1e-10.
Mat33 R_of(const Vec3& nu);

/// Tangential trace u x nu.
Vec3 tangential_trace(const Vec3& u, const Vec3& nu);

/// Tangential component nu x (u x nu) = u - (u.nu) nu.
Vec3 tangential_component(const Vec3& u, const Vec3& nu);

/// Minimum of nu . m over all boundary nodes (face-wise). Positive for any
/// box with interior x0; throws NOT_STAR_SHAPED otherwise.
double check_star_shaped(const BoxDomain& box);

}  // namespace qmxw

#endif
