#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "needleplan/trajectory.hpp"

namespace needleplan {

/// The deviation ceiling of the straight/max-curvature/straight approximation
/// of one arc chunk with central angle eta and curvature radius r: the chunk's
/// corner apex sits r*(1/cos(eta/2) - 1) outside the target circle.
inline double duty_cycle_chunk_bound(double r, double eta) {
    return r * (1.0 / std::cos(eta / 2.0) - 1.0);
}

/// Decomposes an arbitrary-curvature arc into primitives whose curvature is
/// either 0 or kappa_max, keeping the whole chain in the original curving
/// plane. The target arc is cut into equal chunks short enough that each
/// chunk's three-segment approximation stays within eps_d, so the chain's
/// endpoints match the target arc's exactly and its one-way Hausdorff
/// deviation stays below eps_d.
inline std::vector<MotionPrimitive> duty_cycle_decompose(double kappa_target, double length,
                                                         double delta_theta_initial,
                                                         double kappa_max, double eps_d) {
    if (kappa_target < 0 || kappa_target > kappa_max)
        throw std::invalid_argument("duty_cycle_decompose: kappa_target outside [0, kappa_max]");
    if (length <= 0 || eps_d <= 0)
        throw std::invalid_argument("duty_cycle_decompose: length and eps_d must be > 0");

    if (kappa_target < 1e-15) return {{0.0, length, delta_theta_initial}};
    if (std::abs(kappa_target - kappa_max) < 1e-15)
        return {{kappa_max, length, delta_theta_initial}};

    const double r = 1.0 / kappa_target;
    const double r_max = 1.0 / kappa_max;
    // Largest chunk angle with duty_cycle_chunk_bound(r, eta) < eps_d; ties
    // round toward more chunks.
    const double eta_limit = 2.0 * std::acos(r / (r + eps_d));
    int n = std::max(1, static_cast<int>(std::ceil(length / (eta_limit * r))));
    while (duty_cycle_chunk_bound(r, (length / n) * kappa_target) >= eps_d) ++n;

    const double eta = (length / n) * kappa_target;
    const double straight = (r - r_max) * std::tan(eta / 2.0);
    const double bend = eta * r_max;

    std::vector<MotionPrimitive> out;
    out.reserve(3 * n);
    double theta = delta_theta_initial;
    for (int i = 0; i < n; ++i) {
        if (straight > 0.0) {
            out.push_back({0.0, straight, theta});
            theta = 0.0;
        }
        out.push_back({kappa_max, bend, theta});
        theta = 0.0;
        if (straight > 0.0) out.push_back({0.0, straight, 0.0});
    }
    return out;
}

/// Distance between two primitives as actions: the two-way Hausdorff distance
/// between their resultant trajectories anchored at the canonical pose,
/// densely sampled at 0.1 mm.
inline double action_distance(const MotionPrimitive& m1, const MotionPrimitive& m2,
                              double alpha = 0.05) {
    const Pose anchor = Pose::identity();
    const auto a = sample_chain(anchor, {m1}, 0.1);
    const auto b = sample_chain(anchor, {m2}, 0.1);
    return hausdorff_two_way(a, b, alpha);
}

}  // namespace needleplan
