#ifndef QMXW_VEC3_HPP
#define QMXW_VEC3_HPP

#include <array>
#include <cmath>
#include <cstddef>

namespace qmxw {

/// 3-vector with value semantics. Fields are stored as arrays of Vec3.
struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    constexpr Vec3() = default;
    constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    double& operator[](int i) { return (&x)[i]; }
    double operator[](int i) const { return (&x)[i]; }

    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
};

inline Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
inline Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
inline Vec3 operator*(double s, Vec3 a) { return a *= s; }
inline Vec3 operator*(Vec3 a, double s) { return a *= s; }
inline Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline double norm2(const Vec3& a) { return dot(a, a); }

/// Dense 3x3 matrix, row-major.
struct Mat33 {
    std::array<double, 9> a{};

    double& operator()(int i, int j) { return a[3 * i + j]; }
    double operator()(int i, int j) const { return a[3 * i + j]; }

    static Mat33 identity() {
        Mat33 m;
        m(0, 0) = m(1, 1) = m(2, 2) = 1.0;
        return m;
    }
    static Mat33 scaled_identity(double s) {
        Mat33 m;
        m(0, 0) = m(1, 1) = m(2, 2) = s;
        return m;
    }
    static Mat33 diag(double d0, double d1, double d2) {
        Mat33 m;
        m(0, 0) = d0; m(1, 1) = d1; m(2, 2) = d2;
        return m;
    }
    /// xi * eta^T
    static Mat33 outer(const Vec3& xi, const Vec3& eta) {
        Mat33 m;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) m(i, j) = xi[i] * eta[j];
        return m;
    }

    Mat33& operator+=(const Mat33& o) {
        for (int i = 0; i < 9; ++i) a[i] += o.a[i];
        return *this;
    }
    Mat33& operator-=(const Mat33& o) {
        for (int i = 0; i < 9; ++i) a[i] -= o.a[i];
        return *this;
    }
    Mat33& operator*=(double s) {
        for (int i = 0; i < 9; ++i) a[i] *= s;
        return *this;
    }
};

inline Mat33 operator+(Mat33 a, const Mat33& b) { return a += b; }
inline Mat33 operator-(Mat33 a, const Mat33& b) { return a -= b; }
inline Mat33 operator*(double s, Mat33 a) { return a *= s; }

inline Vec3 operator*(const Mat33& m, const Vec3& v) {
    return {m(0, 0) * v.x + m(0, 1) * v.y + m(0, 2) * v.z,
            m(1, 0) * v.x + m(1, 1) * v.y + m(1, 2) * v.z,
            m(2, 0) * v.x + m(2, 1) * v.y + m(2, 2) * v.z};
}

inline Mat33 operator*(const Mat33& a, const Mat33& b) {
    Mat33 c;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

inline Mat33 transpose(const Mat33& m) {
    Mat33 t;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) t(i, j) = m(j, i);
    return t;
}

inline double max_abs_entry(const Mat33& m) {
    double r = 0.0;
    for (double v : m.a) r = std::max(r, std::abs(v));
    return r;
}

/// Largest singular-value-like bound: max row sum of absolute values.
inline double inf_norm(const Mat33& m) {
    double r = 0.0;
    for (int i = 0; i < 3; ++i)
        r = std::max(r, std::abs(m(i, 0)) + std::abs(m(i, 1)) + std::abs(m(i, 2)));
    return r;
}

inline double det(const Mat33& m) {
    return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1))
         - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
         + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
}

/// Inverse via adjugate; caller is responsible for conditioning.
/// Returns false when the determinant is numerically zero.
bool invert(const Mat33& m, Mat33& out);

/// Solve m x = b with partial pivoting. Returns false on singular pivot.
bool solve3(const Mat33& m, const Vec3& b, Vec3& x);

/// Eigenvalues of a symmetric 3x3 matrix, ascending, by cyclic Jacobi iteration.
std::array<double, 3> sym_eigenvalues(const Mat33& m);

/// Smallest generalized eigenvalue of the symmetric pencil (a, b) with b SPD,
/// i.e. min eig of L^{-1} a L^{-T} where b = L L^T. Returns false when the
/// Cholesky factorization of b breaks down.
bool min_generalized_eigenvalue(const Mat33& a, const Mat33& b, double& out);

}  // namespace qmxw

#endif
