#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace needleplan {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double squared_norm() const { return dot(*this); }
    double norm() const { return std::sqrt(squared_norm()); }
    Vec3 normalized() const {
        const double n = norm();
        return {x / n, y / n, z / n};
    }
    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }

    static Vec3 zero() { return {}; }
    static Vec3 unit_x() { return {1, 0, 0}; }
    static Vec3 unit_y() { return {0, 1, 0}; }
    static Vec3 unit_z() { return {0, 0, 1}; }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

/// Unit quaternion (w, x, y, z); composes intrinsically: a * b applies b in a's local frame.
struct Quat {
    double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

    Quat operator*(const Quat& o) const {
        return {w * o.w - x * o.x - y * o.y - z * o.z,
                w * o.x + x * o.w + y * o.z - z * o.y,
                w * o.y - x * o.z + y * o.w + z * o.x,
                w * o.z + x * o.y - y * o.x + z * o.w};
    }
    Quat conjugate() const { return {w, -x, -y, -z}; }
    double dot(const Quat& o) const { return w * o.w + x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }
    Quat normalized() const {
        const double n = norm();
        return {w / n, x / n, y / n, z / n};
    }
    bool finite() const {
        return std::isfinite(w) && std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }

    Vec3 rotate(const Vec3& v) const {
        const Vec3 u{x, y, z};
        const Vec3 t = u.cross(v) * 2.0;
        return v + t * w + u.cross(t);
    }
    Vec3 inverse_rotate(const Vec3& v) const { return conjugate().rotate(v); }

    static Quat identity() { return {}; }
    static Quat from_axis_angle(const Vec3& axis, double angle) {
        const Vec3 a = axis.normalized();
        const double s = std::sin(angle / 2);
        return {std::cos(angle / 2), a.x * s, a.y * s, a.z * s};
    }
    static Quat rot_x(double a) { return {std::cos(a / 2), std::sin(a / 2), 0, 0}; }
    static Quat rot_y(double a) { return {std::cos(a / 2), 0, std::sin(a / 2), 0}; }
    static Quat rot_z(double a) { return {std::cos(a / 2), 0, 0, std::sin(a / 2)}; }
};

/// Geodesic angle between two unit quaternions, in [0, pi]. Equivalent to
/// 2*acos(|<a,b>|) but exact at zero and accurate for small angles where the
/// acos form loses half the significant digits.
inline double quat_angle(const Quat& a, const Quat& b) {
    const double sign = a.dot(b) < 0.0 ? -1.0 : 1.0;
    const double dw = a.w - sign * b.w, dx = a.x - sign * b.x, dy = a.y - sign * b.y,
                 dz = a.z - sign * b.z;
    const double sw = a.w + sign * b.w, sx = a.x + sign * b.x, sy = a.y + sign * b.y,
                 sz = a.z + sign * b.z;
    const double diff = std::sqrt(dw * dw + dx * dx + dy * dy + dz * dz);
    const double sum = std::sqrt(sw * sw + sx * sx + sy * sy + sz * sz);
    return 4.0 * std::atan2(diff, sum);
}

/// Wrap an angle into [0, 2*pi).
inline double wrap_two_pi(double a) {
    double m = std::fmod(a, kTwoPi);
    if (m < 0) m += kTwoPi;
    if (m >= kTwoPi) m = 0.0;
    return m;
}

/// Wrap an angle difference into [0, pi].
inline double wrap_pi(double a) {
    const double m = wrap_two_pi(a);
    return m > kPi ? kTwoPi - m : m;
}

struct Aabb {
    Vec3 min, max;

    bool contains(const Vec3& p) const {
        return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y &&
               p.z >= min.z && p.z <= max.z;
    }
    Vec3 extent() const { return max - min; }
    void expand(const Vec3& p) {
        min.x = std::min(min.x, p.x); min.y = std::min(min.y, p.y); min.z = std::min(min.z, p.z);
        max.x = std::max(max.x, p.x); max.y = std::max(max.y, p.y); max.z = std::max(max.z, p.z);
    }
    Aabb inflated(double r) const { return {min - Vec3{r, r, r}, max + Vec3{r, r, r}}; }
};

}  // namespace needleplan
