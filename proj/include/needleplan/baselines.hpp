#pragma once

#include <atomic>
#include <thread>

#include "needleplan/planner.hpp"

namespace needleplan {

/// RRT baseline parameters; the reference configuration is 5% goal biasing
/// with a direct goal connection attempted for every new node.
struct RrtConfig {
    double goal_bias = 0.05;
    double direct_connect_ratio = 1.0;
    double max_extend = 20.0;
    std::uint64_t rng_seed = 0;
    double time_budget_s = 100.0;
    double collision_step = 0.5;
    double alpha = 0.05;
    bool anytime = false;
    int thread_count = 1;
};

namespace detail {

struct RrtNode {
    Pose pose;
    MotionPrimitive extending;
    int parent = -1;
    double accumulated_length = 0.0;
};

inline PlanResult rrt_run(const ProblemInstance& problem, const RrtConfig& cfg,
                          std::uint64_t seed, const std::atomic<bool>* stop) {
    if (cfg.goal_bias < 0 || cfg.goal_bias > 1 || cfg.direct_connect_ratio < 0 ||
        cfg.direct_connect_ratio > 1)
        throw std::invalid_argument("rrt config: probabilities must lie in [0,1]");
    if (cfg.max_extend <= 0 || cfg.collision_step <= 0)
        throw std::invalid_argument("rrt config: lengths must be positive");

    const Clock::time_point t0 = Clock::now();
    Rng rng(seed);
    const Aabb& box = problem.env->bounds;

    std::deque<RrtNode> tree;
    PointGrid positions(std::max(1.0, cfg.max_extend / 4.0));
    tree.push_back({problem.start, {}, -1, 0.0});
    positions.insert(problem.start.position);

    PlanStats stats;
    bool have_solution = false;
    Trajectory best;
    double best_cost = 0.0;

    auto retrieve = [&](int idx, const std::optional<Arc>& goal_arc) {
        Trajectory t;
        for (int i = idx; i >= 0; i = tree[i].parent) {
            t.waypoints.push_back(tree[i].pose);
            if (tree[i].parent >= 0) t.primitives.push_back(tree[i].extending);
        }
        std::reverse(t.waypoints.begin(), t.waypoints.end());
        std::reverse(t.primitives.begin(), t.primitives.end());
        if (goal_arc) {
            t.primitives.push_back(goal_arc->primitive);
            t.waypoints.push_back(goal_arc->end);
        }
        for (const auto& m : t.primitives) t.length_mm += m.delta_ell;
        t.targeting_error_mm = (t.waypoints.back().position - problem.goal).norm();
        return t;
    };
    auto commit = [&](int idx, const std::optional<Arc>& goal_arc) {
        Trajectory t = retrieve(idx, goal_arc);
        const double c = t.length_mm / problem.ell_max + t.targeting_error_mm / problem.tau;
        if (!have_solution) stats.time_to_first_solution_s = seconds_since(t0);
        if (!have_solution || c < best_cost) {
            best = std::move(t);
            best_cost = c;
        }
        have_solution = true;
        return !cfg.anytime;
    };

    for (long iter = 0;; ++iter) {
        if ((iter & 63) == 0) {
            if (stop && stop->load(std::memory_order_relaxed)) break;
            if (cfg.time_budget_s > 0 && seconds_since(t0) > cfg.time_budget_s) break;
        }
        const bool to_goal = rng.uniform(0, 1) < cfg.goal_bias;
        const Vec3 sample = to_goal ? problem.goal
                                    : Vec3{rng.uniform(box.min.x, box.max.x),
                                           rng.uniform(box.min.y, box.max.y),
                                           rng.uniform(box.min.z, box.max.z)};
        const int ni = positions.nearest(sample).first;
        const RrtNode& near = tree[ni];

        // steer: the exact arc when feasible, else the max-curvature arc in
        // the sample's plane stopped at its closest approach to the sample
        MotionPrimitive m;
        try {
            const PointArc pa = curvature_to_point(near.pose, sample);
            const double eta = pa.kappa * pa.arc_len;
            if (pa.kappa <= problem.kappa_max && eta <= kPi / 2 + 1e-9) {
                m = {pa.kappa, std::min(pa.arc_len, cfg.max_extend), pa.delta_theta};
            } else {
                const Vec3 g = near.pose.to_local(sample);
                const double a = std::hypot(g.x, g.y);
                const double r = 1.0 / problem.kappa_max;
                if (std::hypot(a - r, g.z) < 1e-12) continue;  // sample at the arc center
                double eta_cp = sweep_angle(a, g.z, r);
                if (eta_cp > kPi / 2) eta_cp = kPi / 2;
                m = {problem.kappa_max, std::min(eta_cp * r, cfg.max_extend),
                     wrap_two_pi(std::atan2(g.y, g.x))};
            }
        } catch (const std::exception&) {
            continue;  // sample exactly behind or coincident
        }
        if (m.delta_ell < 1e-6) continue;  // already at the closest approach
        m.delta_ell = std::min(m.delta_ell, problem.ell_max - near.accumulated_length);
        if (m.delta_ell < 1e-6) continue;
        if (!arc_free(*problem.env, near.pose, m, cfg.collision_step)) continue;

        RrtNode u{apply_primitive(near.pose, m), m, ni,
                  near.accumulated_length + m.delta_ell};
        const int ui = static_cast<int>(tree.size());
        tree.push_back(u);
        positions.insert(u.pose.position);
        ++stats.nodes_expanded;

        if ((u.pose.position - problem.goal).norm() <= problem.tau) {
            if (commit(ui, std::nullopt)) break;
            continue;
        }
        if (rng.uniform(0, 1) < cfg.direct_connect_ratio) {
            std::optional<Arc> arc;
            try {
                arc = direct_connect(u.pose, problem.goal, problem.kappa_max, problem.tau);
            } catch (const UndefinedDirectionError&) {
            }
            if (arc && u.accumulated_length + arc->primitive.delta_ell <= problem.ell_max &&
                (arc->end.position - problem.goal).norm() <= problem.tau &&
                arc_free(*problem.env, u.pose, arc->primitive, cfg.collision_step)) {
                if (commit(ui, arc)) break;
            }
        }
    }

    PlanResult r;
    r.stats = stats;
    r.stats.wall_time_s = seconds_since(t0);
    if (have_solution) {
        r.status = PlanStatus::Solved;
        r.trajectory = best;
    } else {
        r.status = PlanStatus::TimedOut;  // sampling offers no exhaustion certificate
    }
    return r;
}

}  // namespace detail

/// Workspace-sampling RRT: samples points (the goal with probability
/// goal_bias), grows the nearest node by tip position toward them under the
/// curvature bound, and attempts direct goal connections per the ratio.
inline PlanResult plan_rrt(const ProblemInstance& problem, const RrtConfig& cfg) {
    return detail::rrt_run(problem, cfg, cfg.rng_seed, nullptr);
}

/// Independent trees, one per thread; the first solution wins (best cost wins
/// in anytime mode).
inline PlanResult plan_rrt_parallel(const ProblemInstance& problem, const RrtConfig& cfg) {
    const int n = std::max(1, cfg.thread_count);
    std::vector<PlanResult> results(n);
    std::atomic<bool> stop{false};
    std::vector<std::thread> pool;
    pool.reserve(n);
    for (int i = 0; i < n; ++i)
        pool.emplace_back([&, i]() {
            results[i] = detail::rrt_run(problem, cfg, cfg.rng_seed + 7919ull * i, &stop);
            if (results[i].status == PlanStatus::Solved && !cfg.anytime) stop = true;
        });
    for (auto& t : pool) t.join();

    PlanResult out = results[0];
    for (int i = 1; i < n; ++i) {
        const auto& r = results[i];
        out.stats.nodes_expanded += r.stats.nodes_expanded;
        if (r.status != PlanStatus::Solved) continue;
        const bool better =
            out.status != PlanStatus::Solved ||
            (cfg.anytime &&
             r.trajectory->length_mm / problem.ell_max +
                     r.trajectory->targeting_error_mm / problem.tau <
                 out.trajectory->length_mm / problem.ell_max +
                     out.trajectory->targeting_error_mm / problem.tau) ||
            (!cfg.anytime && (out.stats.time_to_first_solution_s < 0 ||
                              r.stats.time_to_first_solution_s <
                                  out.stats.time_to_first_solution_s));
        if (better) {
            out.status = PlanStatus::Solved;
            out.trajectory = r.trajectory;
            out.stats.time_to_first_solution_s = r.stats.time_to_first_solution_s;
        }
    }
    return out;
}

/// Search at a single, finest resolution: best-first by accumulated length,
/// every accepted node expanded with the whole finest primitive set, with
/// reachability pruning, direct goal connection, duplicate rejection and
/// similar-node rejection. No refinement happens, so exhaustion certifies
/// nothing was reachable at that resolution.
inline PlanResult plan_single_res(const ProblemInstance& problem, const PlannerConfig& cfg) {
    validate_config(cfg);
    const auto t0 = detail::Clock::now();

    struct Entry {
        double length;
        long serial;
        int node;
    };
    struct Order {
        bool operator()(const Entry& a, const Entry& b) const {
            if (a.length != b.length) return a.length > b.length;
            return a.serial > b.serial;
        }
    };

    const std::vector<MotionPrimitive> prims =
        finest_set(cfg.cutoff, {0.0, problem.kappa_max});
    std::deque<SearchNode> arena;
    std::priority_queue<Entry, std::vector<Entry>, Order> open;
    ClosedSet closed(cfg.d_sim);
    long serial = 0;
    PlanStats stats;
    bool have_solution = false;
    Trajectory best;
    double best_cost = 0.0;
    bool timed_out = false;

    arena.push_back(SearchNode{problem.start, {}, -1, 0, 0.0, serial++, {}});
    open.push({0.0, 0, 0});

    auto commit = [&](int idx, const std::optional<Arc>& goal_arc) {
        Trajectory t = retrieve_plan(arena, idx, problem.goal);
        if (goal_arc) {
            t.primitives.push_back(goal_arc->primitive);
            t.waypoints.push_back(goal_arc->end);
            t.length_mm += goal_arc->primitive.delta_ell;
            t.targeting_error_mm = (goal_arc->end.position - problem.goal).norm();
        }
        const double c = t.length_mm / problem.ell_max + t.targeting_error_mm / problem.tau;
        if (!have_solution) stats.time_to_first_solution_s = detail::seconds_since(t0);
        if (!have_solution || c < best_cost) {
            best = std::move(t);
            best_cost = c;
        }
        have_solution = true;
        return !cfg.anytime;
    };

    while (!open.empty()) {
        if (cfg.time_budget_s > 0 && detail::seconds_since(t0) > cfg.time_budget_s) {
            timed_out = true;
            break;
        }
        const Entry e = open.top();
        open.pop();
        const int vi = e.node;

        RejectReason reason = RejectReason::None;
        if (arena[vi].accumulated_length > problem.ell_max + 1e-9)
            reason = RejectReason::Length;
        else if (!goal_reachable(arena[vi].pose, problem.goal, problem.kappa_max, problem.tau))
            reason = RejectReason::Reachability;
        else if (closed.contains_duplicate(arena[vi].pose))
            reason = RejectReason::Duplicate;
        else if (!arena[vi].is_root() &&
                 !arc_free(*problem.env, arena[arena[vi].parent].pose, arena[vi].extending,
                           cfg.collision_step))
            reason = RejectReason::Collision;

        if (reason == RejectReason::Reachability) ++stats.nodes_pruned_reachability;
        if (reason != RejectReason::None) continue;
        if (exists_similar(arena[vi].pose, closed, cfg.d_sim, cfg.alpha)) {
            ++stats.nodes_pruned_similar;
            continue;
        }

        closed.insert(arena[vi].pose);
        ++stats.nodes_expanded;
        if ((arena[vi].pose.position - problem.goal).norm() <= problem.tau) {
            if (commit(vi, std::nullopt)) break;
        } else {
            std::optional<Arc> arc;
            try {
                arc = direct_connect(arena[vi].pose, problem.goal, problem.kappa_max,
                                     problem.tau);
            } catch (const UndefinedDirectionError&) {
            }
            if (arc &&
                arena[vi].accumulated_length + arc->primitive.delta_ell <=
                    problem.ell_max + 1e-9 &&
                (arc->end.position - problem.goal).norm() <= problem.tau &&
                arc_free(*problem.env, arena[vi].pose, arc->primitive, cfg.collision_step)) {
                if (commit(vi, arc)) break;
            }
        }

        for (const auto& m : prims) {
            SearchNode child;
            child.pose = apply_primitive(arena[vi].pose, m);
            child.extending = m;
            child.parent = vi;
            child.accumulated_length = arena[vi].accumulated_length + m.delta_ell;
            child.insertion_serial = serial++;
            const int idx = static_cast<int>(arena.size());
            arena.push_back(std::move(child));
            open.push({arena[idx].accumulated_length, arena[idx].insertion_serial, idx});
        }
    }

    PlanResult r;
    r.stats = stats;
    r.stats.wall_time_s = detail::seconds_since(t0);
    if (have_solution) {
        r.status = PlanStatus::Solved;
        r.trajectory = best;
    } else {
        r.status = timed_out ? PlanStatus::TimedOut : PlanStatus::ExhaustedNoPlan;
    }
    return r;
}

}  // namespace needleplan
