#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <unordered_map>
#include <vector>

#include "needleplan/math.hpp"

namespace needleplan {

/// Exact fixed-radius neighbor index over 3D points: a uniform hash grid whose
/// queries enumerate every cell overlapping the ball and compare true
/// distances. No approximation anywhere; the planner's duplicate and
/// similarity checks rely on exactness.
class PointGrid {
  public:
    explicit PointGrid(double cell_size = 1.0) : cell_(cell_size) {}

    int size() const { return static_cast<int>(points_.size()); }
    const Vec3& point(int i) const { return points_[i]; }

    int insert(const Vec3& p) {
        const int id = static_cast<int>(points_.size());
        points_.push_back(p);
        cells_[key_of(p)].push_back(id);
        const std::int64_t x = coord(p.x), y = coord(p.y), z = coord(p.z);
        if (id == 0) {
            cell_lo_[0] = cell_hi_[0] = x;
            cell_lo_[1] = cell_hi_[1] = y;
            cell_lo_[2] = cell_hi_[2] = z;
        } else {
            cell_lo_[0] = std::min(cell_lo_[0], x); cell_hi_[0] = std::max(cell_hi_[0], x);
            cell_lo_[1] = std::min(cell_lo_[1], y); cell_hi_[1] = std::max(cell_hi_[1], y);
            cell_lo_[2] = std::min(cell_lo_[2], z); cell_hi_[2] = std::max(cell_hi_[2], z);
        }
        return id;
    }

    void insert_all(const std::vector<Vec3>& pts) {
        points_.reserve(points_.size() + pts.size());
        for (const auto& p : pts) insert(p);
    }

    /// Indices of all points with dist(p, q) <= r, in insertion order.
    std::vector<int> radius_query(const Vec3& q, double r) const {
        std::vector<int> out;
        const double r2 = r * r;
        visit_cells(q, r, [&](int id) {
            if ((points_[id] - q).squared_norm() <= r2) out.push_back(id);
            return false;
        });
        std::sort(out.begin(), out.end());
        return out;
    }

    /// True when any point lies within r of q (early exit).
    bool any_within(const Vec3& q, double r) const {
        const double r2 = r * r;
        return visit_cells(q, r, [&](int id) {
            return (points_[id] - q).squared_norm() <= r2;
        });
    }

    /// Calls f(index) for points within r of q until f returns true; reports
    /// whether any call did.
    template <typename F>
    bool for_each_within(const Vec3& q, double r, F&& f) const {
        const double r2 = r * r;
        return visit_cells(q, r, [&](int id) {
            return (points_[id] - q).squared_norm() <= r2 && f(id);
        });
    }

    /// Index and distance of the closest point; {-1, +inf} when empty.
    std::pair<int, double> nearest(const Vec3& q) const {
        if (points_.empty()) return {-1, std::numeric_limits<double>::infinity()};
        int best = -1;
        double best2 = std::numeric_limits<double>::infinity();
        const std::int64_t cx = coord(q.x), cy = coord(q.y), cz = coord(q.z);
        // nearest and farthest occupied cells, in Chebyshev cell distance;
        // rings inside the gap to the occupied box are empty by construction
        auto axis_gap = [](std::int64_t c, std::int64_t lo, std::int64_t hi) {
            return c < lo ? lo - c : (c > hi ? c - hi : std::int64_t{0});
        };
        const std::int64_t ring_lo = std::max({axis_gap(cx, cell_lo_[0], cell_hi_[0]),
                                               axis_gap(cy, cell_lo_[1], cell_hi_[1]),
                                               axis_gap(cz, cell_lo_[2], cell_hi_[2])});
        const std::int64_t ring_hi = std::max(
            {std::max(cx - cell_lo_[0], cell_hi_[0] - cx),
             std::max(cy - cell_lo_[1], cell_hi_[1] - cy),
             std::max(cz - cell_lo_[2], cell_hi_[2] - cz), std::int64_t{0}});
        // expanding cube rings; a ring at Chebyshev distance k holds no point
        // closer than (k-1)*cell, so stop once that exceeds the best found
        for (std::int64_t ring = ring_lo; ring <= ring_hi; ++ring) {
            if (best >= 0) {
                const double lower = (static_cast<double>(ring) - 1.0) * cell_;
                if (lower > 0 && lower * lower > best2) break;
            }
            for_ring(cx, cy, cz, ring, [&](std::int64_t x, std::int64_t y, std::int64_t z) {
                if (x < cell_lo_[0] || x > cell_hi_[0] || y < cell_lo_[1] ||
                    y > cell_hi_[1] || z < cell_lo_[2] || z > cell_hi_[2])
                    return;
                const auto it = cells_.find(pack(x, y, z));
                if (it == cells_.end()) return;
                for (int id : it->second) {
                    const double d2 = (points_[id] - q).squared_norm();
                    if (d2 < best2) {
                        best2 = d2;
                        best = id;
                    }
                }
            });
        }
        return {best, std::sqrt(best2)};
    }

    double nearest_distance(const Vec3& q) const { return nearest(q).second; }

  private:
    std::int64_t coord(double v) const {
        return static_cast<std::int64_t>(std::floor(v / cell_));
    }
    static std::uint64_t pack(std::int64_t x, std::int64_t y, std::int64_t z) {
        // 21 bits per axis, offset to keep coordinates positive
        const std::uint64_t bias = 1u << 20;
        return ((static_cast<std::uint64_t>(x + bias) & 0x1FFFFF) << 42) |
               ((static_cast<std::uint64_t>(y + bias) & 0x1FFFFF) << 21) |
               (static_cast<std::uint64_t>(z + bias) & 0x1FFFFF);
    }
    std::uint64_t key_of(const Vec3& p) const {
        return pack(coord(p.x), coord(p.y), coord(p.z));
    }

    template <typename F>
    bool visit_cells(const Vec3& q, double r, F&& f) const {
        const std::int64_t x0 = coord(q.x - r), x1 = coord(q.x + r);
        const std::int64_t y0 = coord(q.y - r), y1 = coord(q.y + r);
        const std::int64_t z0 = coord(q.z - r), z1 = coord(q.z + r);
        for (std::int64_t x = x0; x <= x1; ++x)
            for (std::int64_t y = y0; y <= y1; ++y)
                for (std::int64_t z = z0; z <= z1; ++z) {
                    const auto it = cells_.find(pack(x, y, z));
                    if (it == cells_.end()) continue;
                    for (int id : it->second)
                        if (f(id)) return true;
                }
        return false;
    }

    // visits exactly the cells of the cube shell at Chebyshev distance k
    template <typename F>
    static void for_ring(std::int64_t cx, std::int64_t cy, std::int64_t cz, std::int64_t k,
                         F&& f) {
        if (k == 0) {
            f(cx, cy, cz);
            return;
        }
        for (std::int64_t y = cy - k; y <= cy + k; ++y)
            for (std::int64_t z = cz - k; z <= cz + k; ++z) {
                f(cx - k, y, z);
                f(cx + k, y, z);
            }
        for (std::int64_t x = cx - k + 1; x <= cx + k - 1; ++x)
            for (std::int64_t z = cz - k; z <= cz + k; ++z) {
                f(x, cy - k, z);
                f(x, cy + k, z);
            }
        for (std::int64_t x = cx - k + 1; x <= cx + k - 1; ++x)
            for (std::int64_t y = cy - k + 1; y <= cy + k - 1; ++y) {
                f(x, y, cz - k);
                f(x, y, cz + k);
            }
    }

    double cell_;
    std::vector<Vec3> points_;
    std::unordered_map<std::uint64_t, std::vector<int>> cells_;
    std::int64_t cell_lo_[3] = {0, 0, 0};
    std::int64_t cell_hi_[3] = {0, 0, 0};
};

}  // namespace needleplan
