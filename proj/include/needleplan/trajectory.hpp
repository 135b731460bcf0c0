#pragma once

#include <algorithm>
#include <vector>

#include "needleplan/geometry.hpp"

namespace needleplan {

/// Poses sampled along a primitive chain at (at most) the given arc-length
/// step, starting with `start` and including every primitive endpoint.
inline std::vector<Pose> sample_chain(const Pose& start,
                                      const std::vector<MotionPrimitive>& chain, double step) {
    std::vector<Pose> out{start};
    Pose cur = start;
    for (const auto& m : chain) {
        const int n = std::max(1, static_cast<int>(std::ceil(m.delta_ell / step)));
        for (int i = 1; i <= n; ++i)
            out.push_back(apply_primitive(cur, {m.kappa, m.delta_ell * i / n, m.delta_theta}));
        cur = out.back();
    }
    return out;
}

/// max over b of (min over a) of the weighted pose metric: how far the
/// trajectory b strays from a.
inline double hausdorff_one_way(const std::vector<Pose>& a, const std::vector<Pose>& b,
                                double alpha) {
    double worst = 0.0;
    for (const auto& pb : b) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& pa : a) {
            best = std::min(best, distance(pa, pb, alpha));
            if (best == 0.0) break;
        }
        worst = std::max(worst, best);
    }
    return worst;
}

inline double hausdorff_two_way(const std::vector<Pose>& a, const std::vector<Pose>& b,
                                double alpha) {
    return std::max(hausdorff_one_way(a, b, alpha), hausdorff_one_way(b, a, alpha));
}

/// Positional one-way Hausdorff (orientation ignored).
inline double hausdorff_one_way_position(const std::vector<Pose>& a,
                                         const std::vector<Pose>& b) {
    double worst = 0.0;
    for (const auto& pb : b) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& pa : a)
            best = std::min(best, (pa.position - pb.position).squared_norm());
        worst = std::max(worst, best);
    }
    return std::sqrt(worst);
}

}  // namespace needleplan
