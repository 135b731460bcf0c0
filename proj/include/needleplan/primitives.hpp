#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "needleplan/math.hpp"

namespace needleplan {

/// A circular-arc motion: curvature (1/mm), arc length (mm) and the angle (rad)
/// of the curving plane about the tip's local Z axis.
struct MotionPrimitive {
    double kappa = 0.0;
    double delta_ell = 0.0;
    double delta_theta = 0.0;
    std::uint64_t id = 0;  // unique per (kappa, delta_ell, delta_theta) within a run
};

/// Action-space resolution: finest insertion step (mm) and rotation step (rad).
struct Resolution {
    double r_ell = 0.0;
    double r_theta = 0.0;
};

struct NoLevelError : std::runtime_error {
    explicit NoLevelError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

// Dyadic level of `value` relative to `coarsest`: smallest l >= 0 such that
// value is a multiple of 2^-l * coarsest, with a tolerance of 1e-9 relative to
// the grid being tested. Planner-generated values sit exactly on the grid; the
// tolerance only absorbs floating drift.
inline int dyadic_level(double value, double coarsest, const char* what) {
    for (int l = 0; l <= 60; ++l) {
        const double grid = std::ldexp(coarsest, -l);
        const double tol = 1e-9 * grid;
        const double rem = std::fmod(value, grid);
        if (rem <= tol || grid - rem <= tol) return l;
    }
    throw NoLevelError(std::string(what) + " value " + std::to_string(value) +
                       " is not on the dyadic grid of " + std::to_string(coarsest));
}

inline long dyadic_numerator(double value, double coarsest, int level) {
    return std::lround(value / std::ldexp(coarsest, -level));
}

}  // namespace detail

inline int length_level(const MotionPrimitive& m, double delta_ell_max) {
    return detail::dyadic_level(m.delta_ell, delta_ell_max, "delta_ell");
}

inline int angle_level(const MotionPrimitive& m, double delta_theta_max) {
    return detail::dyadic_level(m.delta_theta, delta_theta_max, "delta_theta");
}

/// Packs (curvature index, dyadic delta_ell, dyadic delta_theta) into one
/// injective hashable id. Levels beyond 17 exceed the packing width; cutoffs
/// that deep are far below any physical control resolution.
inline std::uint64_t primitive_id(int kappa_index, const MotionPrimitive& m,
                                  double delta_ell_max, double delta_theta_max) {
    const int ll = length_level(m, delta_ell_max);
    const int lt = angle_level(m, delta_theta_max);
    if (ll > 17 || lt > 17)
        throw std::invalid_argument("primitive level too deep for id packing");
    const std::uint64_t nl = static_cast<std::uint64_t>(
        detail::dyadic_numerator(m.delta_ell, delta_ell_max, ll));
    const std::uint64_t nt = static_cast<std::uint64_t>(
        detail::dyadic_numerator(m.delta_theta, delta_theta_max, lt));
    return (static_cast<std::uint64_t>(kappa_index) << 56) |
           (static_cast<std::uint64_t>(ll) << 51) | (nl << 32) |
           (static_cast<std::uint64_t>(lt) << 27) | nt;
}

/// The level-(0,0) primitive set: every curvature paired with every coarsest
/// plane angle, all at the maximal arc length.
inline std::vector<MotionPrimitive> coarsest_primitives(const std::vector<double>& curvatures,
                                                        double delta_ell_max,
                                                        const std::vector<double>& thetas,
                                                        double delta_theta_max = kPi / 2) {
    if (curvatures.empty() || thetas.empty())
        throw std::invalid_argument("coarsest_primitives: empty curvature or angle set");
    std::vector<MotionPrimitive> out;
    out.reserve(curvatures.size() * thetas.size());
    for (std::size_t ki = 0; ki < curvatures.size(); ++ki)
        for (double th : thetas) {
            MotionPrimitive m{curvatures[ki], delta_ell_max, th, 0};
            m.id = primitive_id(static_cast<int>(ki), m, delta_ell_max, delta_theta_max);
            out.push_back(m);
        }
    return out;
}

/// One refinement step of a primitive: halve the grid in each coordinate and
/// step up/down by the new half-grid. At level 0 the upward length step and
/// the downward angle step leave the explored range and are omitted.
inline std::vector<MotionPrimitive> refine(const MotionPrimitive& m, double delta_ell_max,
                                           double delta_theta_max) {
    const int ll = length_level(m, delta_ell_max);
    const int lt = angle_level(m, delta_theta_max);
    const double dl = std::ldexp(delta_ell_max, -(ll + 1));
    const double dt = std::ldexp(delta_theta_max, -(lt + 1));
    const int kappa_index = static_cast<int>(m.id >> 56);

    std::vector<MotionPrimitive> out;
    out.reserve(4);
    auto emit = [&](double ell, double theta) {
        MotionPrimitive r{m.kappa, ell, wrap_two_pi(theta), 0};
        r.id = primitive_id(kappa_index, r, delta_ell_max, delta_theta_max);
        out.push_back(r);
    };
    emit(m.delta_ell - dl, m.delta_theta);
    if (ll > 0) emit(m.delta_ell + dl, m.delta_theta);
    if (lt > 0) emit(m.delta_ell, m.delta_theta - dt);
    emit(m.delta_ell, m.delta_theta + dt);
    return out;
}

inline int rank_of(int parent_rank, const MotionPrimitive& m, double delta_ell_max,
                   double delta_theta_max) {
    if (parent_rank < 0) throw std::invalid_argument("rank_of: negative parent rank");
    return parent_rank + length_level(m, delta_ell_max) + angle_level(m, delta_theta_max) + 1;
}

/// True when the primitive's grid in either coordinate is already finer than
/// the cutoff resolution; such refinements are never enqueued.
inline bool below_cutoff(const MotionPrimitive& m, const Resolution& cutoff,
                         double delta_ell_max, double delta_theta_max) {
    const double grid_ell = std::ldexp(delta_ell_max, -length_level(m, delta_ell_max));
    const double grid_theta = std::ldexp(delta_theta_max, -angle_level(m, delta_theta_max));
    return grid_ell < cutoff.r_ell || grid_theta < cutoff.r_theta;
}

/// The finest primitive set at resolution r: all curvatures, arc length r_ell,
/// plane angles n * r_theta for n in [0, floor(2*pi / r_theta)].
inline std::vector<MotionPrimitive> finest_set(const Resolution& r,
                                               const std::vector<double>& curvatures) {
    if (r.r_ell <= 0 || r.r_theta <= 0)
        throw std::invalid_argument("finest_set: resolution must be positive");
    const int n_max = static_cast<int>(std::floor(kTwoPi / r.r_theta));
    std::vector<MotionPrimitive> out;
    out.reserve(curvatures.size() * (n_max + 1));
    std::uint64_t next_id = 0;
    for (double kappa : curvatures)
        for (int n = 0; n <= n_max; ++n)
            out.push_back({kappa, r.r_ell, n * r.r_theta, next_id++});
    return out;
}

/// Diagnostic similar-node radius bound; the second term is evaluated in log
/// space so deep search horizons flag a numerically-zero bound instead of
/// silently losing it. The flag trips once the bound drops below 1e-30 mm,
/// far beyond any distance double-precision poses can resolve.
struct DsimBound {
    double value = 0.0;
    bool underflow = false;
};

inline DsimBound d_sim_bound(double tau, double ell_max, double delta_ell_min, double l_s) {
    if (l_s <= 1.0) throw std::invalid_argument("d_sim_bound: requires L_s > 1");
    if (tau <= 0 || ell_max <= 0 || delta_ell_min <= 0)
        throw std::invalid_argument("d_sim_bound: lengths must be positive");
    const double h = std::ceil(ell_max / delta_ell_min);
    const double log_ls = std::log(l_s);
    // log of tau*(L_s - 1) / (2*(L_s^H - 1))
    const double log_term = std::log(tau) + std::log(l_s - 1.0) - std::log(2.0) -
                            (h * log_ls + std::log1p(-std::exp(-h * log_ls)));
    if (log_term < std::log(1e-30)) return {0.0, true};
    return {std::min(delta_ell_min, std::exp(log_term)), false};
}

}  // namespace needleplan
