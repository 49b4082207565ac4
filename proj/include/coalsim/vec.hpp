#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace coalsim {

/// Fixed-size 3-vector. Deliberately minimal: the hot loops only need
/// arithmetic, dot products and norms, and keeping the type trivially
/// copyable lets the particle arrays live in flat contiguous storage.
struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    double& operator[](std::size_t i) { return (&x)[i]; }
    double operator[](std::size_t i) const { return (&x)[i]; }

    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
};

inline Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
inline Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
inline Vec3 operator*(double s, Vec3 a) { return a *= s; }
inline Vec3 operator*(Vec3 a, double s) { return a *= s; }

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm2(const Vec3& a) { return dot(a, a); }
inline double norm(const Vec3& a) { return std::sqrt(norm2(a)); }

/// Symmetric 3x3 matrix stored as the six independent entries.
/// Order: xx, yy, zz, xy, xz, yz.
struct Sym3 {
    double xx = 0.0, yy = 0.0, zz = 0.0, xy = 0.0, xz = 0.0, yz = 0.0;

    static Sym3 identity() { return {1.0, 1.0, 1.0, 0.0, 0.0, 0.0}; }

    /// Rank-one symmetric product v v^T scaled by s.
    static Sym3 outer(const Vec3& v, double s = 1.0) {
        return {s * v.x * v.x, s * v.y * v.y, s * v.z * v.z,
                s * v.x * v.y, s * v.x * v.z, s * v.y * v.z};
    }

    Sym3& operator+=(const Sym3& o) {
        xx += o.xx; yy += o.yy; zz += o.zz;
        xy += o.xy; xz += o.xz; yz += o.yz;
        return *this;
    }
    Sym3& operator-=(const Sym3& o) {
        xx -= o.xx; yy -= o.yy; zz -= o.zz;
        xy -= o.xy; xz -= o.xz; yz -= o.yz;
        return *this;
    }
    Sym3& operator*=(double s) {
        xx *= s; yy *= s; zz *= s; xy *= s; xz *= s; yz *= s;
        return *this;
    }

    double trace() const { return xx + yy + zz; }

    Vec3 apply(const Vec3& v) const {
        return {xx * v.x + xy * v.y + xz * v.z,
                xy * v.x + yy * v.y + yz * v.z,
                xz * v.x + yz * v.y + zz * v.z};
    }

    double quad(const Vec3& v) const { return dot(v, apply(v)); }
};

inline Sym3 operator+(Sym3 a, const Sym3& b) { return a += b; }
inline Sym3 operator-(Sym3 a, const Sym3& b) { return a -= b; }
inline Sym3 operator*(double s, Sym3 a) { return a *= s; }

/// Eigenvalues of a symmetric 3x3 matrix, ascending. Closed-form
/// trigonometric solution of the characteristic cubic on the deviatoric
/// part; exact for multiples of the identity. Good to ~1e-14 absolute
/// relative to the matrix norm, which is all the PSD checks need.
inline std::array<double, 3> eigenvalues(const Sym3& m) {
    const double q = m.trace() / 3.0;
    const double bxx = m.xx - q, byy = m.yy - q, bzz = m.zz - q;
    const double p2 = bxx * bxx + byy * byy + bzz * bzz
                    + 2.0 * (m.xy * m.xy + m.xz * m.xz + m.yz * m.yz);
    if (p2 <= 0.0)
        return {q, q, q};
    const double p = std::sqrt(p2 / 6.0);
    // det(B)/2 with B the deviatoric part scaled by 1/p.
    const double det = bxx * (byy * bzz - m.yz * m.yz)
                     - m.xy * (m.xy * bzz - m.yz * m.xz)
                     + m.xz * (m.xy * m.yz - byy * m.xz);
    double r = det / (2.0 * p * p * p);
    r = std::fmin(1.0, std::fmax(-1.0, r));
    const double phi = std::acos(r) / 3.0;
    const double e2 = q + 2.0 * p * std::cos(phi);
    const double e0 = q + 2.0 * p * std::cos(phi + 2.0 * M_PI / 3.0);
    const double e1 = 3.0 * q - e0 - e2;
    return {e0, e1, e2};
}

inline double min_eigenvalue(const Sym3& m) { return eigenvalues(m)[0]; }

/// 3x3 rotation matrix (general, row-major).
struct Mat3 {
    std::array<double, 9> a{};

    Vec3 apply(const Vec3& v) const {
        return {a[0] * v.x + a[1] * v.y + a[2] * v.z,
                a[3] * v.x + a[4] * v.y + a[5] * v.z,
                a[6] * v.x + a[7] * v.y + a[8] * v.z};
    }

    Vec3 row(int i) const { return {a[3 * i], a[3 * i + 1], a[3 * i + 2]}; }

    /// R M R^T for symmetric M; used to check frame covariance.
    Sym3 conjugate(const Sym3& m) const {
        const Vec3 r0 = m.apply(row(0)), r1 = m.apply(row(1)), r2 = m.apply(row(2));
        return {dot(row(0), r0), dot(row(1), r1), dot(row(2), r2),
                dot(row(0), r1), dot(row(0), r2), dot(row(1), r2)};
    }
};

/// Rotation from a unit quaternion (w, x, y, z); callers normalize.
inline Mat3 rotation_from_quaternion(double w, double x, double y, double z) {
    Mat3 r;
    r.a = {1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
           2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
           2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)};
    return r;
}

} // namespace coalsim
