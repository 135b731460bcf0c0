#pragma once

#include <array>
#include <cmath>

#include "needleplan/geometry.hpp"

namespace needleplan {

/// Independent check of the circular-arc kinematics: pre-rotates about local Z
/// by delta_theta, then integrates the tip ODE (advance along the local
/// heading while the heading rotates about the local binormal at rate kappa
/// per unit arc length) with a fixed-step classical 4th-order scheme. Shares
/// no code path with apply_primitive.
inline Pose ode_oracle(const Pose& pose, double kappa, double delta_ell, double delta_theta,
                       double step) {
    using State = std::array<double, 7>;  // px py pz qw qx qy qz

    const Quat q0 = pose.orientation * Quat::rot_z(delta_theta);
    State s{pose.position.x, pose.position.y, pose.position.z, q0.w, q0.x, q0.y, q0.z};

    // q' = 0.5 * q * (0, omega_body), omega_body = (0, kappa, 0)
    auto deriv = [kappa](const State& u) -> State {
        const Quat q{u[3], u[4], u[5], u[6]};
        const Vec3 dp = q.rotate(Vec3::unit_z());
        const Quat dq = q * Quat{0.0, 0.0, kappa, 0.0};
        return {dp.x, dp.y, dp.z, 0.5 * dq.w, 0.5 * dq.x, 0.5 * dq.y, 0.5 * dq.z};
    };
    auto axpy = [](const State& a, double h, const State& d) -> State {
        State r;
        for (int i = 0; i < 7; ++i) r[i] = a[i] + h * d[i];
        return r;
    };

    const int n = std::max(1, static_cast<int>(std::ceil(delta_ell / step)));
    const double h = delta_ell / n;
    for (int i = 0; i < n; ++i) {
        const State k1 = deriv(s);
        const State k2 = deriv(axpy(s, h / 2, k1));
        const State k3 = deriv(axpy(s, h / 2, k2));
        const State k4 = deriv(axpy(s, h, k3));
        for (int j = 0; j < 7; ++j) s[j] += h / 6 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
        const double qn = std::sqrt(s[3] * s[3] + s[4] * s[4] + s[5] * s[5] + s[6] * s[6]);
        for (int j = 3; j < 7; ++j) s[j] /= qn;
    }
    return {{s[0], s[1], s[2]}, {s[3], s[4], s[5], s[6]}};
}

}  // namespace needleplan
