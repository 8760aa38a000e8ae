#include "qmxw/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace qmxw {

void BoxDomain::validate() const {
    for (int a = 0; a < 3; ++a) {
        if ((&extent.x)[a] <= 0.0)
            throw Error(ErrorClass::config, "BAD_DOMAIN", "extent must be positive");
        if (cells[a] < 4)
            throw Error(ErrorClass::config, "BAD_DOMAIN", "need at least 4 cells per axis");
    }
    for (int a = 0; a < 3; ++a) {
        const double lo = (&corner.x)[a];
        const double hi = lo + (&extent.x)[a];
        const double c = (&x0.x)[a];
        if (!(c > lo && c < hi))
            throw Error(ErrorClass::config, "BAD_DOMAIN", "x0 must be strictly interior");
    }
}

double BoxDomain::min_spacing() const {
    return std::min({spacing(0), spacing(1), spacing(2)});
}

Vec3 BoxDomain::position(std::size_t idx) const {
    const int n0 = nodes(0), n1 = nodes(1);
    const int i = static_cast<int>(idx % n0);
    const int j = static_cast<int>((idx / n0) % n1);
    const int k = static_cast<int>(idx / (static_cast<std::size_t>(n0) * n1));
    return position(i, j, k);
}

namespace {

// Right-handed face frames with tau1 x tau2 = nu, using positively oriented
// coordinate directions.
FaceFrame make_frame(int face) {
    static const Vec3 e[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    const int axis = face / 2;
    const bool positive = face % 2 == 1;
    FaceFrame f;
    f.nu = positive ? e[axis] : -1.0 * e[axis];
    const int a1 = (axis + 1) % 3;
    const int a2 = (axis + 2) % 3;
    if (positive) {
        f.tau1 = e[a1];
        f.tau2 = e[a2];
    } else {
        f.tau1 = e[a2];
        f.tau2 = e[a1];
    }
    return f;
}

// 1D quadrature weight of node i on an axis with n+1 nodes and spacing h.
double weight_1d(int i, int n, double h) {
    return (i == 0 || i == n) ? 0.5 * h : h;
}

}  // namespace

BoundaryFrame::BoundaryFrame(const BoxDomain& box) {
    for (int f = 0; f < 6; ++f) frames_[f] = make_frame(f);
    for (int face = 0; face < 6; ++face) {
        const int axis = face / 2;
        const bool positive = face % 2 == 1;
        const int a1 = (axis + 1) % 3;
        const int a2 = (axis + 2) % 3;
        const int n1 = box.cells[a1], n2 = box.cells[a2];
        const double h1 = box.spacing(a1), h2 = box.spacing(a2);
        const double wn = 0.5 * box.spacing(axis);
        int ijk[3];
        ijk[axis] = positive ? box.cells[axis] : 0;
        for (int q = 0; q <= n2; ++q)
            for (int p = 0; p <= n1; ++p) {
                ijk[a1] = p;
                ijk[a2] = q;
                BoundaryNode bn;
                bn.node = box.index(ijk[0], ijk[1], ijk[2]);
                bn.face = face;
                bn.w_surf = weight_1d(p, n1, h1) * weight_1d(q, n2, h2);
                bn.w_normal = wn;
                nodes_.push_back(bn);
            }
    }
}

double BoundaryFrame::surface_measure() const {
    double s = 0.0;
    for (const auto& bn : nodes_) s += bn.w_surf;
    return s;
}

Mat33 J_of(const Vec3& xi) {
    Mat33 j;
    j(0, 1) = -xi.z; j(0, 2) = xi.y;
    j(1, 0) = xi.z;  j(1, 2) = -xi.x;
    j(2, 0) = -xi.y; j(2, 1) = xi.x;
    return j;
}

Mat33 R_of(const Vec3& nu) {
    if (std::abs(norm(nu) - 1.0) > 1e-10)
        throw Error(ErrorClass::config, "NON_UNIT_NORMAL", "R_of requires a unit normal");
    Mat33 r = J_of(nu);
    r *= -1.0;
    return r;
}

Vec3 tangential_trace(const Vec3& u, const Vec3& nu) { return cross(u, nu); }

Vec3 tangential_component(const Vec3& u, const Vec3& nu) {
    return u - dot(u, nu) * nu;
}

double check_star_shaped(const BoxDomain& box) {
    box.validate();
    BoundaryFrame bf(box);
    double eta_bar = 1e300;
    for (const auto& bn : bf.nodes()) {
        const Vec3 m = box.multiplier(box.position(bn.node));
        eta_bar = std::min(eta_bar, dot(bf.frame(bn.face).nu, m));
    }
    if (eta_bar <= 0.0)
        throw Error(ErrorClass::assumption, "NOT_STAR_SHAPED",
                    "nu . m is not positive on the boundary");
    return eta_bar;
}

}  // namespace qmxw
