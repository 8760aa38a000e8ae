#include "qmxw/vec3.hpp"

#include <algorithm>

namespace qmxw {

bool invert(const Mat33& m, Mat33& out) {
    const double d = det(m);
    double scale = max_abs_entry(m);
    if (scale == 0.0 || std::abs(d) < 1e-300 * std::max(1.0, scale * scale * scale)) return false;
    const double id = 1.0 / d;
    out(0, 0) = (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) * id;
    out(0, 1) = (m(0, 2) * m(2, 1) - m(0, 1) * m(2, 2)) * id;
    out(0, 2) = (m(0, 1) * m(1, 2) - m(0, 2) * m(1, 1)) * id;
    out(1, 0) = (m(1, 2) * m(2, 0) - m(1, 0) * m(2, 2)) * id;
    out(1, 1) = (m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0)) * id;
    out(1, 2) = (m(0, 2) * m(1, 0) - m(0, 0) * m(1, 2)) * id;
    out(2, 0) = (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0)) * id;
    out(2, 1) = (m(0, 1) * m(2, 0) - m(0, 0) * m(2, 1)) * id;
    out(2, 2) = (m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0)) * id;
    return true;
}

bool solve3(const Mat33& m, const Vec3& b, Vec3& x) {
    double a[3][4] = {{m(0, 0), m(0, 1), m(0, 2), b.x},
                      {m(1, 0), m(1, 1), m(1, 2), b.y},
                      {m(2, 0), m(2, 1), m(2, 2), b.z}};
    for (int c = 0; c < 3; ++c) {
        int p = c;
        for (int r = c + 1; r < 3; ++r)
            if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
        if (std::abs(a[p][c]) < 1e-300) return false;
        if (p != c)
            for (int k = c; k < 4; ++k) std::swap(a[p][k], a[c][k]);
        for (int r = c + 1; r < 3; ++r) {
            const double f = a[r][c] / a[c][c];
            for (int k = c; k < 4; ++k) a[r][k] -= f * a[c][k];
        }
    }
    double v[3];
    for (int r = 2; r >= 0; --r) {
        double s = a[r][3];
        for (int k = r + 1; k < 3; ++k) s -= a[r][k] * v[k];
        v[r] = s / a[r][r];
    }
    x = {v[0], v[1], v[2]};
    return true;
}

std::array<double, 3> sym_eigenvalues(const Mat33& m) {
    // Cyclic Jacobi on the symmetrized matrix; converges in a handful of
    // sweeps for 3x3.
    Mat33 a = m;
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) {
            const double s = 0.5 * (a(i, j) + a(j, i));
            a(i, j) = a(j, i) = s;
        }
    for (int sweep = 0; sweep < 32; ++sweep) {
        double off = std::abs(a(0, 1)) + std::abs(a(0, 2)) + std::abs(a(1, 2));
        if (off < 1e-15 * (1.0 + max_abs_entry(a))) break;
        for (int p = 0; p < 3; ++p)
            for (int q = p + 1; q < 3; ++q) {
                if (a(p, q) == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                Mat33 r = Mat33::identity();
                r(p, p) = c; r(q, q) = c; r(p, q) = s; r(q, p) = -s;
                a = transpose(r) * a * r;
                a(p, q) = a(q, p) = 0.5 * (a(p, q) + a(q, p));
            }
    }
    std::array<double, 3> ev = {a(0, 0), a(1, 1), a(2, 2)};
    std::sort(ev.begin(), ev.end());
    return ev;
}

bool min_generalized_eigenvalue(const Mat33& a, const Mat33& b, double& out) {
    // Cholesky b = L L^T.
    Mat33 l;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = b(i, j);
            for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            if (i == j) {
                if (s <= 1e-14 * std::max(1.0, max_abs_entry(b))) return false;
                l(i, i) = std::sqrt(s);
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    // c = L^{-1} a L^{-T}, built column by column.
    auto fwd = [&](Vec3 v) {
        Vec3 y;
        y.x = v.x / l(0, 0);
        y.y = (v.y - l(1, 0) * y.x) / l(1, 1);
        y.z = (v.z - l(2, 0) * y.x - l(2, 1) * y.y) / l(2, 2);
        return y;
    };
    Mat33 ai = a;
    // Symmetrize a defensively before the similarity transform.
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) {
            const double s = 0.5 * (ai(i, j) + ai(j, i));
            ai(i, j) = ai(j, i) = s;
        }
    Mat33 t;  // t = L^{-1} a
    for (int j = 0; j < 3; ++j) {
        Vec3 col = {ai(0, j), ai(1, j), ai(2, j)};
        Vec3 y = fwd(col);
        t(0, j) = y.x; t(1, j) = y.y; t(2, j) = y.z;
    }
    Mat33 c;  // c = t L^{-T} = (L^{-1} t^T)^T
    Mat33 tt = transpose(t);
    for (int j = 0; j < 3; ++j) {
        Vec3 col = {tt(0, j), tt(1, j), tt(2, j)};
        Vec3 y = fwd(col);
        c(j, 0) = y.x; c(j, 1) = y.y; c(j, 2) = y.z;
    }
    out = sym_eigenvalues(c)[0];
    return true;
}

}  // namespace qmxw
