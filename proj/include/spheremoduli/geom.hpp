#pragma once

#include <array>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <vector>

#include "spheremoduli/errors.hpp"

namespace spheremoduli {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Global geometric tolerance (radians) for equality/antipodality predicates.
// Overridable once at startup via the SPHEREMODULI_TOL environment variable.
inline double& geom_tolerance() {
    static double tol = [] {
        if (const char* s = std::getenv("SPHEREMODULI_TOL")) {
            double v = std::atof(s);
            if (v > 0) return v;
        }
        return 1e-9;
    }();
    return tol;
}

struct Vec3 {
    double x = 0, y = 0, z = 0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const {
        double n = norm();
        return {x / n, y / n, z / n};
    }
};

inline double det3(const Vec3& a, const Vec3& b, const Vec3& c) {
    return a.dot(b.cross(c));
}

// Point on the unit sphere. Construction normalizes; inputs must be within
// geom_tolerance of unit length already (callers pass directions, not data
// needing repair).
struct UnitVec {
    double x = 0, y = 0, z = 1;

    UnitVec() = default;
    UnitVec(double X, double Y, double Z) : x(X), y(Y), z(Z) {
        double n = std::sqrt(x * x + y * y + z * z);
        if (!(n > 1e-12)) throw InvalidTuple("cannot normalize near-zero vector");
        x /= n;
        y /= n;
        z /= n;
    }
    explicit UnitVec(const Vec3& v) : UnitVec(v.x, v.y, v.z) {}

    Vec3 vec() const { return {x, y, z}; }
    double dot(const UnitVec& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const UnitVec& o) const { return vec().cross(o.vec()); }
    UnitVec antipode() const {
        UnitVec p;
        p.x = -x;
        p.y = -y;
        p.z = -z;
        return p;
    }
};

inline UnitVec ex() { return {1, 0, 0}; }
inline UnitVec ey() { return {0, 1, 0}; }
inline UnitVec ez() { return {0, 0, 1}; }

inline double clamp1(double t) { return t < -1 ? -1 : (t > 1 ? 1 : t); }

// Spherical distance in [0, pi]; inner product clamped before arccos.
inline double dist(const UnitVec& a, const UnitVec& b) {
    // atan2 form is accurate near 0 and pi where arccos loses digits.
    double c = a.dot(b);
    double s = a.cross(b).norm();
    return std::atan2(s, c);
}

inline bool same_point(const UnitVec& a, const UnitVec& b, double tol) {
    return dist(a, b) <= tol;
}
inline bool same_point(const UnitVec& a, const UnitVec& b) {
    return same_point(a, b, geom_tolerance());
}
inline bool antipodal(const UnitVec& a, const UnitVec& b, double tol) {
    return dist(a, b) >= kPi - tol;
}
inline bool antipodal(const UnitVec& a, const UnitVec& b) {
    return antipodal(a, b, geom_tolerance());
}

// Unit tangent at `a` of the minimizing arc toward `b`; requires
// 0 < dist(a,b) < pi.
inline Vec3 tangent_toward(const UnitVec& a, const UnitVec& b) {
    Vec3 t = b.vec() - a.vec() * a.dot(b);
    double n = t.norm();
    if (n <= 1e-300) throw DegenerateTriangle("tangent undefined: points equal or antipodal");
    return t * (1.0 / n);
}

// Point at arclength s along the great circle through `a` with initial unit
// tangent `dir` (dir must be orthogonal to a).
inline UnitVec walk(const UnitVec& a, const Vec3& dir, double s) {
    Vec3 p = a.vec() * std::cos(s) + dir * std::sin(s);
    return UnitVec(p);
}

// Point at arc fraction along the minimizing arc a->b.
inline UnitVec slerp(const UnitVec& a, const UnitVec& b, double t) {
    double d = dist(a, b);
    if (d < geom_tolerance()) return a;
    return walk(a, tangent_toward(a, b), t * d);
}

// Unsigned angle between the arcs a->b and a->c at vertex a, in [0, pi].
inline double corner_angle(const UnitVec& a, const UnitVec& b, const UnitVec& c) {
    Vec3 u = tangent_toward(a, b);
    Vec3 w = tangent_toward(a, c);
    double cosang = clamp1(u.dot(w));
    double sinang = u.cross(w).norm();
    return std::atan2(sinang, cosang);
}

// Signed CCW angle (about the outward normal at a) from arc a->b to arc a->c,
// reduced to [0, 2pi).
inline double ccw_angle(const UnitVec& a, const UnitVec& b, const UnitVec& c) {
    Vec3 u = tangent_toward(a, b);
    Vec3 w = tangent_toward(a, c);
    double ang = std::atan2(a.vec().dot(u.cross(w)), u.dot(w));
    if (ang < 0) ang += kTwoPi;
    return ang;
}

struct TriangleMeasures {
    std::array<double, 3> angles; // at a, b, c
    double area;                  // spherical excess
    int orientation;              // sign of det(a,b,c)
};

// Angles and spherical excess of the triangle with vertices a,b,c (minor
// arcs). Orientation is reported separately; the excess is the area of the
// lesser region.
inline TriangleMeasures triangle_measures(const UnitVec& a, const UnitVec& b,
                                          const UnitVec& c) {
    double tol = geom_tolerance();
    const UnitVec* v[3] = {&a, &b, &c};
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) {
            double d = dist(*v[i], *v[j]);
            if (d <= tol) throw DegenerateTriangle("coincident vertices");
            if (d >= kPi - tol) throw DegenerateTriangle("antipodal vertices");
        }
    TriangleMeasures m;
    m.angles[0] = corner_angle(a, b, c);
    m.angles[1] = corner_angle(b, c, a);
    m.angles[2] = corner_angle(c, a, b);
    m.area = m.angles[0] + m.angles[1] + m.angles[2] - kPi;
    double d = det3(a.vec(), b.vec(), c.vec());
    m.orientation = d > 0 ? 1 : (d < 0 ? -1 : 0);
    return m;
}

// Rotation in SO(3), stored as a row-major 3x3 matrix.
struct Rotation {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Rotation identity() { return {}; }

    static Rotation about_axis(const UnitVec& axis, double angle) {
        double c = std::cos(angle), s = std::sin(angle), t = 1 - c;
        double x = axis.x, y = axis.y, z = axis.z;
        Rotation r;
        r.m = {t * x * x + c,     t * x * y - s * z, t * x * z + s * y,
               t * x * y + s * z, t * y * y + c,     t * y * z - s * x,
               t * x * z - s * y, t * y * z + s * x, t * z * z + c};
        return r;
    }

    // Minimal rotation taking a to b.
    static Rotation align(const UnitVec& a, const UnitVec& b) {
        double d = dist(a, b);
        if (d < 1e-9) return identity();
        if (d > kPi - 1e-9) {
            // antipodal: rotate by pi about any axis orthogonal to a
            Vec3 h = std::fabs(a.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
            return about_axis(UnitVec(a.cross(UnitVec(h))), kPi);
        }
        return about_axis(UnitVec(a.cross(b)), d);
    }

    // Unique rotation taking the ordered pair (a1,a2) to (b1,b2); requires
    // dist(a1,a2) == dist(b1,b2) in (0,pi).
    static Rotation align_pair(const UnitVec& a1, const UnitVec& a2,
                               const UnitVec& b1, const UnitVec& b2) {
        double da = dist(a1, a2), db = dist(b1, b2);
        if (std::fabs(da - db) > 1e-7)
            throw LengthMismatch("pair distances differ");
        if (da < geom_tolerance() || da > kPi - geom_tolerance())
            throw UnresolvedSymmetry("pair degenerate for alignment");
        Rotation r1 = align(a1, b1);
        UnitVec a2r = r1.apply(a2);
        double ang = ccw_angle(b1, a2r, b2);
        return about_axis(b1, ang).compose(r1);
    }

    Vec3 apply(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }
    UnitVec apply(const UnitVec& p) const { return UnitVec(apply(p.vec())); }

    // this after other: (this*other)(x) = this(other(x))
    Rotation compose(const Rotation& o) const {
        Rotation r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0;
                for (int k = 0; k < 3; ++k) s += m[3 * i + k] * o.m[3 * k + j];
                r.m[3 * i + j] = s;
            }
        return r;
    }

    Rotation transpose() const {
        Rotation r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r.m[3 * i + j] = m[3 * j + i];
        return r;
    }

    bool is_special_orthogonal(double tol) const {
        Rotation rt = compose(transpose());
        double err = 0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                err = std::max(err, std::fabs(rt.m[3 * i + j] - (i == j ? 1.0 : 0.0)));
        double d = m[0] * (m[4] * m[8] - m[5] * m[7]) -
                   m[1] * (m[3] * m[8] - m[5] * m[6]) +
                   m[2] * (m[3] * m[7] - m[4] * m[6]);
        return err <= tol && std::fabs(d - 1.0) <= tol;
    }
};

// Riemann sphere value: finite complex number or the point at infinity.
// Infinity is a tag, never a float sentinel.
struct ExtendedComplex {
    double re = 0, im = 0;
    bool infinite = false;

    static ExtendedComplex infinity() {
        ExtendedComplex z;
        z.infinite = true;
        return z;
    }
    static ExtendedComplex of(double re, double im = 0) { return {re, im, false}; }

    double abs() const {
        if (infinite) throw InternalError("abs of infinity");
        return std::hypot(re, im);
    }
};

// Stereographic projection sending `pole` to infinity, -pole to 0, and the
// equator of the pole to the unit circle. The chart direction (real axis) is
// fixed by rotating pole to the north pole along the shortest arc.
inline ExtendedComplex stereo(const UnitVec& p, const UnitVec& pole) {
    Rotation r = Rotation::align(pole, ez());
    UnitVec q = r.apply(p);
    if (1.0 - q.z <= geom_tolerance() * geom_tolerance()) return ExtendedComplex::infinity();
    return ExtendedComplex::of(q.x / (1 - q.z), q.y / (1 - q.z));
}

inline UnitVec stereo_inverse(const ExtendedComplex& w, const UnitVec& pole) {
    Rotation r = Rotation::align(pole, ez());
    UnitVec q = w.infinite
                    ? ez()
                    : UnitVec(2 * w.re, 2 * w.im, w.re * w.re + w.im * w.im - 1);
    return r.transpose().apply(q);
}

// Normal form for a tuple of points modulo rotation: p1 at the north pole,
// the first point off the p1-axis in the half-plane {y=0, x>0}.
struct CanonicalForm {
    Rotation rotation;
    std::vector<UnitVec> points;
};

inline CanonicalForm canonical_rotation(const std::vector<UnitVec>& pts) {
    if (pts.empty()) throw InvalidTuple("empty tuple");
    Rotation r1 = Rotation::align(pts[0], ez());
    std::optional<UnitVec> meridian;
    for (size_t i = 1; i < pts.size(); ++i) {
        UnitVec q = r1.apply(pts[i]);
        if (std::fabs(q.z) < 1.0 - 1e-12 &&
            !same_point(q, ez()) && !antipodal(q, ez())) {
            meridian = q;
            break;
        }
    }
    if (!meridian)
        throw UnresolvedSymmetry("all points on the p1 axis; meridian not fixed");
    double az = std::atan2(meridian->y, meridian->x);
    Rotation r = Rotation::about_axis(ez(), -az).compose(r1);
    CanonicalForm cf;
    cf.rotation = r;
    cf.points.reserve(pts.size());
    for (const auto& p : pts) cf.points.push_back(r.apply(p));
    return cf;
}

} // namespace spheremoduli
