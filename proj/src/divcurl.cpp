#include "qmxw/divcurl.hpp"

#include <cmath>

namespace qmxw {

void ManufacturedField::sample(const BoxDomain& box, Field3& out) const {
    const std::size_t n = box.node_count();
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = value(box.position(i));
}

std::vector<ManufacturedField> manufactured_corpus() {
    const double pi = std::acos(-1.0);
    std::vector<ManufacturedField> fields;

    fields.push_back({"linear",
                      [](const Vec3& p) {
                          return Vec3{p.x + 2.0 * p.y - p.z, 3.0 * p.x - p.y, 2.0 * p.z + p.y};
                      },
                      [](const Vec3&) {
                          Mat33 j;
                          j(0, 0) = 1; j(0, 1) = 2; j(0, 2) = -1;
                          j(1, 0) = 3; j(1, 1) = -1; j(1, 2) = 0;
                          j(2, 0) = 0; j(2, 1) = 1; j(2, 2) = 2;
                          return j;
                      }});

    // Gradient of psi = sin(pi x) sin(pi y) sin(pi z): curl-free.
    fields.push_back({"gradient",
                      [pi](const Vec3& p) {
                          return Vec3{pi * std::cos(pi * p.x) * std::sin(pi * p.y) * std::sin(pi * p.z),
                                      pi * std::sin(pi * p.x) * std::cos(pi * p.y) * std::sin(pi * p.z),
                                      pi * std::sin(pi * p.x) * std::sin(pi * p.y) * std::cos(pi * p.z)};
                      },
                      [pi](const Vec3& p) {
                          const double sx = std::sin(pi * p.x), cx = std::cos(pi * p.x);
                          const double sy = std::sin(pi * p.y), cy = std::cos(pi * p.y);
                          const double sz = std::sin(pi * p.z), cz = std::cos(pi * p.z);
                          const double p2 = pi * pi;
                          Mat33 j;
                          j(0, 0) = -p2 * sx * sy * sz;
                          j(0, 1) = p2 * cx * cy * sz;
                          j(0, 2) = p2 * cx * sy * cz;
                          j(1, 0) = p2 * cx * cy * sz;
                          j(1, 1) = -p2 * sx * sy * sz;
                          j(1, 2) = p2 * sx * cy * cz;
                          j(2, 0) = p2 * cx * sy * cz;
                          j(2, 1) = p2 * sx * cy * cz;
                          j(2, 2) = -p2 * sx * sy * sz;
                          return j;
                      }});

    // Divergence-free trigonometric field.
    fields.push_back({"solenoidal",
                      [pi](const Vec3& p) {
                          return Vec3{std::sin(pi * p.y) * std::cos(pi * p.z),
                                      std::sin(pi * p.z) * std::cos(pi * p.x),
                                      std::sin(pi * p.x) * std::cos(pi * p.y)};
                      },
                      [pi](const Vec3& p) {
                          const double sx = std::sin(pi * p.x), cx = std::cos(pi * p.x);
                          const double sy = std::sin(pi * p.y), cy = std::cos(pi * p.y);
                          const double sz = std::sin(pi * p.z), cz = std::cos(pi * p.z);
                          Mat33 j;
                          j(0, 0) = 0;
                          j(0, 1) = pi * cy * cz;
                          j(0, 2) = -pi * sy * sz;
                          j(1, 0) = -pi * sz * sx;
                          j(1, 1) = 0;
                          j(1, 2) = pi * cz * cx;
                          j(2, 0) = pi * cx * cy;
                          j(2, 1) = -pi * sx * sy;
                          j(2, 2) = 0;
                          return j;
                      }});

    // General mixed-mode field: nonzero curl and divergence.
    fields.push_back({"mixed",
                      [pi](const Vec3& p) {
                          return Vec3{std::sin(pi * p.x) * std::cos(2.0 * pi * p.y),
                                      std::cos(pi * p.z) + 0.5 * std::sin(pi * p.y),
                                      std::sin(pi * (p.x + p.z))};
                      },
                      [pi](const Vec3& p) {
                          Mat33 j;
                          j(0, 0) = pi * std::cos(pi * p.x) * std::cos(2.0 * pi * p.y);
                          j(0, 1) = -2.0 * pi * std::sin(pi * p.x) * std::sin(2.0 * pi * p.y);
                          j(0, 2) = 0;
                          j(1, 0) = 0;
                          j(1, 1) = 0.5 * pi * std::cos(pi * p.y);
                          j(1, 2) = -pi * std::sin(pi * p.z);
                          j(2, 0) = pi * std::cos(pi * (p.x + p.z));
                          j(2, 1) = 0;
                          j(2, 2) = pi * std::cos(pi * (p.x + p.z));
                          return j;
                      }});

    return fields;
}

H1BoundReport h1_bound_check(const SbpOperators& ops, const BoundaryFrame& frames,
                             const Field3& u, const Field3& v,
                             const std::vector<Mat33>& alpha, const std::vector<Mat33>& beta,
                             const Impedance& lambda) {
    const BoxDomain& box = ops.box();
    const std::size_t n = u.size();

    H1BoundReport rep;
    rep.lhs = std::sqrt(sobolev_norm2(ops, u, 1)) + std::sqrt(sobolev_norm2(ops, v, 1));

    Field3 cu, cv;
    ops.curl(u, cu);
    ops.curl(v, cv);
    Field3 au(n), bv(n);
    ops.workers().parallel_for(n, [&](std::size_t i) {
        au[i] = alpha.empty() ? u[i] : alpha[i] * u[i];
        bv[i] = beta.empty() ? v[i] : beta[i] * v[i];
    });
    ScalarField dau, dbv;
    ops.div(au, dau);
    ops.div(bv, dbv);

    // Boundary datum h per face node, then the interpolation-norm surrogate
    // sqrt(||h||_L2 ||h||_H1) with tangential derivatives face by face.
    const auto& nodes = frames.nodes();
    std::vector<Vec3> hvals(nodes.size());
    double l2 = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& bn = nodes[i];
        const Vec3 nu = frames.frame(bn.face).nu;
        const Vec3 x = box.position(bn.node);
        const Vec3 h =
            cross(v[bn.node], nu) + cross(lambda.eval_lambda(x) * cross(u[bn.node], nu), nu);
        hvals[i] = h;
        l2 += bn.w_surf * norm2(h);
    }

    // Tangential H1 seminorm: per face, differentiate the 2D array of h
    // values along the two face axes (second-order one-sided closures).
    double h1semi = 0.0;
    std::size_t cursor = 0;
    for (int face = 0; face < 6; ++face) {
        const int axis = face / 2;
        const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
        const int n1 = box.cells[a1] + 1, n2 = box.cells[a2] + 1;
        const double h1 = box.spacing(a1), h2 = box.spacing(a2);
        const std::size_t count = static_cast<std::size_t>(n1) * n2;
        auto at = [&](int p, int q) -> const Vec3& { return hvals[cursor + p + n1 * q]; };
        auto w1 = [&](int p) { return (p == 0 || p == n1 - 1) ? 0.5 * h1 : h1; };
        auto w2 = [&](int q) { return (q == 0 || q == n2 - 1) ? 0.5 * h2 : h2; };
        for (int q = 0; q < n2; ++q)
            for (int p = 0; p < n1; ++p) {
                Vec3 d1v, d2v;
                if (p == 0)
                    d1v = (1.0 / h1) * (-1.5 * at(0, q) + 2.0 * at(1, q) - 0.5 * at(2, q));
                else if (p == n1 - 1)
                    d1v = (1.0 / h1) *
                          (1.5 * at(p, q) - 2.0 * at(p - 1, q) + 0.5 * at(p - 2, q));
                else
                    d1v = (0.5 / h1) * (at(p + 1, q) - at(p - 1, q));
                if (q == 0)
                    d2v = (1.0 / h2) * (-1.5 * at(p, 0) + 2.0 * at(p, 1) - 0.5 * at(p, 2));
                else if (q == n2 - 1)
                    d2v = (1.0 / h2) *
                          (1.5 * at(p, q) - 2.0 * at(p, q - 1) + 0.5 * at(p, q - 2));
                else
                    d2v = (0.5 / h2) * (at(p, q + 1) - at(p, q - 1));
                h1semi += w1(p) * w2(q) * (norm2(d1v) + norm2(d2v));
            }
        cursor += count;
    }
    const double h_l2 = std::sqrt(l2);
    const double h_h1 = std::sqrt(l2 + h1semi);
    rep.h_half_norm = std::sqrt(h_l2 * h_h1);

    rep.rhs = ops.norm_w(cu) + ops.norm_w(cv) + ops.norm_w(dau) + ops.norm_w(dbv) +
              rep.h_half_norm;
    if (rep.rhs < 1e-14) {
        if (rep.lhs > 1e-12)
            throw Error(ErrorClass::verification, "INCONSISTENT_ZERO",
                        "rhs vanished while lhs did not");
        throw Error(ErrorClass::verification, "ZERO_RHS", "both sides vanish");
    }
    rep.empirical_c = rep.lhs / rep.rhs;
    return rep;
}

std::vector<Vec3> normal_from_curl(const SbpOperators& ops, const BoundaryFrame& frames,
                                   const Field3& u) {
    Field3 cu;
    ops.curl(u, cu, D1Variant::pointwise);
    Field3 d[3];
    for (int a = 0; a < 3; ++a) ops.d1(a, D1Variant::pointwise, u, d[a]);

    const auto& nodes = frames.nodes();
    std::vector<Vec3> out(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& bn = nodes[i];
        const FaceFrame& fr = frames.frame(bn.face);
        const Mat33 r = R_of(fr.nu);
        Vec3 rhs = cu[bn.node];
        for (const Vec3& tau : {fr.tau1, fr.tau2}) {
            Vec3 dtau{};
            for (int a = 0; a < 3; ++a) dtau += tau[a] * d[a][bn.node];
            rhs -= J_of(tau) * dtau;
        }
        out[i] = r * rhs;
    }
    return out;
}

std::vector<Vec3> normal_direct(const SbpOperators& ops, const BoundaryFrame& frames,
                                const Field3& u, bool tangential_part) {
    Field3 d[3];
    for (int a = 0; a < 3; ++a) ops.d1(a, D1Variant::pointwise, u, d[a]);
    const auto& nodes = frames.nodes();
    std::vector<Vec3> out(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& bn = nodes[i];
        const Vec3 nu = frames.frame(bn.face).nu;
        Vec3 dn{};
        for (int a = 0; a < 3; ++a) dn += nu[a] * d[a][bn.node];
        out[i] = tangential_part ? tangential_component(dn, nu) : dn;
    }
    return out;
}

std::vector<double> normalnormal_from_div(const SbpOperators& ops, const BoundaryFrame& frames,
                                          const Field3& u, const std::vector<Mat33>& alpha,
                                          const std::array<std::vector<Mat33>, 3>& alpha_grad,
                                          double eta) {
    const std::size_t n = u.size();
    Field3 au(n);
    ops.workers().parallel_for(n, [&](std::size_t i) {
        au[i] = alpha.empty() ? u[i] : alpha[i] * u[i];
    });
    ScalarField divau;
    ops.div(au, divau, D1Variant::pointwise);
    Field3 d[3];
    for (int a = 0; a < 3; ++a) ops.d1(a, D1Variant::pointwise, u, d[a]);
    const std::vector<Vec3> dn_tau = normal_from_curl(ops, frames, u);

    const auto& nodes = frames.nodes();
    std::vector<double> out(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& bn = nodes[i];
        const FaceFrame& fr = frames.frame(bn.face);
        const Vec3 frame[3] = {fr.tau1, fr.tau2, fr.nu};
        const Mat33 a = alpha.empty() ? Mat33::identity() : alpha[bn.node];
        const double a_nn = dot(fr.nu, a * fr.nu);
        if (a_nn < 0.5 * eta)
            throw Error(ErrorClass::verification, "SMALL_PIVOT",
                        "alpha_nn fell below eta/2 at a boundary node");

        double sum = divau[bn.node];
        // Directional derivatives: tangential ones from the grid, the
        // normal-tangential block from the curl reconstruction.
        auto du_xi = [&](const Vec3& xi) {
            Vec3 v{};
            for (int ax = 0; ax < 3; ++ax) v += xi[ax] * d[ax][bn.node];
            return v;
        };
        for (int xi_i = 0; xi_i < 3; ++xi_i)
            for (int ze_i = 0; ze_i < 3; ++ze_i) {
                if (xi_i == 2 && ze_i == 2) continue;  // the unknown
                const Vec3 xi = frame[xi_i];
                const Vec3 ze = frame[ze_i];
                const double a_xz = dot(xi, a * ze);
                double du;
                if (xi_i == 2)
                    du = dot(dn_tau[i], ze);  // dn u^tau component
                else
                    du = dot(du_xi(xi), ze);
                sum -= a_xz * du;
            }
        if (!alpha_grad[0].empty()) {
            for (int xi_i = 0; xi_i < 3; ++xi_i)
                for (int ze_i = 0; ze_i < 3; ++ze_i) {
                    const Vec3 xi = frame[xi_i];
                    const Vec3 ze = frame[ze_i];
                    Mat33 da{};
                    for (int ax = 0; ax < 3; ++ax) da += xi[ax] * alpha_grad[ax][bn.node];
                    sum -= dot(xi, da * ze) * dot(u[bn.node], ze);
                }
        }
        out[i] = sum / a_nn;
    }
    return out;
}

}  // namespace qmxw
