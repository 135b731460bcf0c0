#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "needleplan/math.hpp"
#include "needleplan/primitives.hpp"

namespace needleplan {

// Below this swept angle the arc formulas lose digits to cancellation and the
// straight-line formula is exact to double precision.
inline constexpr double kStraightEta = 1e-10;

/// Needle-tip pose; the local +Z axis of the orientation frame is the heading.
struct Pose {
    Vec3 position;
    Quat orientation;

    Vec3 heading() const { return orientation.rotate(Vec3::unit_z()); }
    Vec3 to_local(const Vec3& world) const {
        return orientation.inverse_rotate(world - position);
    }

    static Pose identity() { return {Vec3::zero(), Quat::identity()}; }
};

struct UndefinedDirectionError : std::domain_error {
    UndefinedDirectionError() : std::domain_error("goal lies exactly on the backward axis") {}
};

/// Extends a pose by one motion primitive: pre-rotate about local Z by
/// delta_theta, then follow the circular arc of curvature kappa and length
/// delta_ell in the rotated frame's XZ-plane, bending toward local +X.
inline Pose apply_primitive(const Pose& pose, const MotionPrimitive& m) {
    if (!pose.position.finite() || !pose.orientation.finite() || !std::isfinite(m.kappa) ||
        !std::isfinite(m.delta_ell) || !std::isfinite(m.delta_theta))
        throw std::invalid_argument("apply_primitive: non-finite input");
    if (m.delta_ell <= 0.0) throw std::invalid_argument("apply_primitive: delta_ell must be > 0");

    const Quat base = pose.orientation * Quat::rot_z(m.delta_theta);
    const double eta = m.kappa * m.delta_ell;
    if (std::abs(eta) < kStraightEta) {
        return {pose.position + base.rotate({0, 0, m.delta_ell}), base.normalized()};
    }
    const double r = 1.0 / m.kappa;
    const Vec3 local{r * (1.0 - std::cos(eta)), 0.0, r * std::sin(eta)};
    return {pose.position + base.rotate(local), (base * Quat::rot_y(eta)).normalized()};
}

/// Poses along the single arc at arc-length parameters {0, step, 2*step, ...,
/// delta_ell}; the final element equals apply_primitive(pose, m).
inline std::vector<Pose> interpolate_arc(const Pose& pose, const MotionPrimitive& m,
                                         double step) {
    if (step <= 0.0) throw std::invalid_argument("interpolate_arc: step must be > 0");
    const double tol = 1e-9 * std::max(1.0, m.delta_ell);
    const int full = static_cast<int>(std::floor(m.delta_ell / step + 1e-9));
    std::vector<Pose> out;
    out.reserve(full + 2);
    out.push_back(pose);
    for (int i = 1; i <= full; ++i) {
        const double s = i * step;
        if (s >= m.delta_ell - tol) break;
        out.push_back(apply_primitive(pose, {m.kappa, s, m.delta_theta}));
    }
    out.push_back(apply_primitive(pose, m));
    return out;
}

/// Visits positions at the same parameters as interpolate_arc without building
/// full poses; used on the collision-checking hot path.
template <typename F>
inline void for_each_arc_position(const Pose& pose, const MotionPrimitive& m, double step,
                                  F&& visit) {
    const Quat base = pose.orientation * Quat::rot_z(m.delta_theta);
    const Vec3 ex = base.rotate(Vec3::unit_x());
    const Vec3 ez = base.rotate(Vec3::unit_z());
    const double tol = 1e-9 * std::max(1.0, m.delta_ell);
    const int full = static_cast<int>(std::floor(m.delta_ell / step + 1e-9));
    const bool straight = std::abs(m.kappa * m.delta_ell) < kStraightEta;
    const double r = straight ? 0.0 : 1.0 / m.kappa;
    auto at = [&](double s) -> Vec3 {
        if (straight) return pose.position + s * ez;
        const double eta = m.kappa * s;
        return pose.position + r * (1.0 - std::cos(eta)) * ex + r * std::sin(eta) * ez;
    };
    visit(pose.position);
    for (int i = 1; i <= full; ++i) {
        const double s = i * step;
        if (s >= m.delta_ell - tol) break;
        visit(at(s));
    }
    visit(at(m.delta_ell));
}

/// Configuration-space metric: Euclidean position distance plus alpha times
/// the geodesic quaternion angle.
inline double distance(const Pose& a, const Pose& b, double alpha) {
    return (a.position - b.position).norm() + alpha * quat_angle(a.orientation, b.orientation);
}

struct PointArc {
    double kappa = 0.0;       // 1/mm
    double delta_theta = 0.0; // rad, plane rotation about local Z
    double arc_len = 0.0;     // mm
};

// Swept angle of the arc through local in-plane point (a, b), a >= 0, for the
// circle of radius r tangent to the heading at the origin. In [0, 2*pi).
namespace detail {
inline double sweep_angle(double a, double b, double r) {
    return wrap_two_pi(std::atan2(b, r - a));
}
}  // namespace detail

/// The unique circular arc from the pose to a point: curvature, curving-plane
/// angle and arc length. Errors when the point lies exactly behind the tip.
inline PointArc curvature_to_point(const Pose& pose, const Vec3& goal) {
    const Vec3 g = pose.to_local(goal);
    const double a = std::hypot(g.x, g.y);
    const double b = g.z;
    if (a < 1e-12) {
        if (b < 0.0) throw UndefinedDirectionError{};
        if (b < 1e-12)
            throw std::invalid_argument("curvature_to_point: goal coincides with pose");
        return {0.0, 0.0, b};
    }
    const double kappa = 2.0 * a / (a * a + b * b);
    const double r = 1.0 / kappa;
    const double eta = detail::sweep_angle(a, b, r);
    return {kappa, wrap_two_pi(std::atan2(g.y, g.x)), eta * r};
}

/// Tests whether the goal can still be reached from the pose: it must not lie
/// deeper than tau inside the unreachable torus of radius 1/kappa_max, and the
/// connecting arc must not sweep past a 90-degree tip turn.
inline bool goal_reachable(const Pose& pose, const Vec3& goal, double kappa_max, double tau) {
    const Vec3 g = pose.to_local(goal);
    const double a = std::hypot(g.x, g.y);
    const double b = g.z;
    const double r = 1.0 / kappa_max;
    const double torus_depth = r - std::hypot(a - r, b);
    if (torus_depth > tau) return false;
    if (a < 1e-12) return b >= 0.0;
    const double kappa = 2.0 * a / (a * a + b * b);
    return detail::sweep_angle(a, b, 1.0 / kappa) <= kPi / 2 + 1e-9;
}

/// A cached circular-arc edge.
struct Arc {
    Pose start;
    MotionPrimitive primitive;
    Pose end;
};

inline Arc make_arc(const Pose& start, const MotionPrimitive& m) {
    return {start, m, apply_primitive(start, m)};
}

/// Attempts a single-arc connection to the goal. Returns the exact arc when
/// the required curvature is feasible; otherwise, when the goal is within tau
/// of the reachable-region boundary, the kappa_max arc in the goal's plane
/// stopped at its closest point. Collision is not checked here.
inline std::optional<Arc> direct_connect(const Pose& pose, const Vec3& goal, double kappa_max,
                                         double tau) {
    const PointArc exact = curvature_to_point(pose, goal);
    const double eta_exact = exact.kappa * exact.arc_len;
    if (exact.kappa <= kappa_max && eta_exact <= kPi / 2 + 1e-9)
        return make_arc(pose, {exact.kappa, exact.arc_len, exact.delta_theta});

    // Fall back to the maximum-curvature arc in the same plane, stopped at the
    // point closest to the goal (the radial projection onto the circle).
    const Vec3 g = pose.to_local(goal);
    const double a = std::hypot(g.x, g.y);
    const double b = g.z;
    const double r = 1.0 / kappa_max;
    if (std::hypot(a - r, b) < 1e-12) return std::nullopt;  // goal at the arc's center
    double eta = detail::sweep_angle(a, b, r);
    if (eta > kPi / 2) eta = kPi / 2;
    if (eta * r < 1e-9) return std::nullopt;  // closest approach is the start itself
    const Arc arc =
        make_arc(pose, {kappa_max, eta * r, wrap_two_pi(std::atan2(g.y, g.x))});
    if ((arc.end.position - goal).norm() <= tau + 1e-9) return arc;
    return std::nullopt;
}

}  // namespace needleplan
