#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <mutex>
#include <optional>
#include <queue>
#include <thread>

#include <json.hpp>

#include "needleplan/environment.hpp"
#include "needleplan/geometry.hpp"
#include "needleplan/primitives.hpp"

namespace needleplan {

enum class Variant { RcsB, RcsNr, Rcs, RcsPar };

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::RcsB: return "rcs-b";
        case Variant::RcsNr: return "rcs-nr";
        case Variant::Rcs: return "rcs";
        case Variant::RcsPar: return "rcs-par";
    }
    return "?";
}

/// Planner knobs; defaults follow the reference needle system (20 mm maximal
/// step, 0.125 mm / 0.157 rad cutoff, alpha = 0.05, d_sim = 5.5e-5).
struct PlannerConfig {
    double delta_ell_max = 20.0;
    double delta_theta_max = kPi / 2;
    Resolution cutoff{0.125, 0.157};
    double d_sim = 5.5e-5;
    double alpha = 0.05;
    double collision_step = 0.5;
    Variant variant = Variant::Rcs;
    int thread_count = 1;
    double time_budget_s = 100.0;  // <= 0 disables the budget
    std::uint64_t rng_seed = 0;
    bool anytime = false;  // keep searching after the first solution, return the best cost
    std::vector<int>* rank_trace = nullptr;  // test hook: extraction ranks, serial variants
};

inline void validate_config(const PlannerConfig& cfg) {
    if (cfg.delta_ell_max <= 0 || cfg.delta_theta_max <= 0 || cfg.cutoff.r_ell <= 0 ||
        cfg.cutoff.r_theta <= 0 || cfg.collision_step <= 0 || cfg.alpha <= 0 ||
        cfg.d_sim < 0 || cfg.thread_count < 1)
        throw std::invalid_argument("planner config: lengths, angles and counts must be positive");
}

enum class PlanStatus { Solved, ExhaustedNoPlan, TimedOut };

inline const char* status_name(PlanStatus s) {
    switch (s) {
        case PlanStatus::Solved: return "Solved";
        case PlanStatus::ExhaustedNoPlan: return "ExhaustedNoPlan";
        case PlanStatus::TimedOut: return "TimedOut";
    }
    return "?";
}

struct Trajectory {
    std::vector<MotionPrimitive> primitives;
    std::vector<Pose> waypoints;  // primitives.size() + 1 poses, starting at the start pose
    double length_mm = 0.0;
    double targeting_error_mm = 0.0;
};

struct PlanStats {
    long nodes_expanded = 0;
    long nodes_pruned_similar = 0;
    long nodes_pruned_reachability = 0;
    double wall_time_s = 0.0;
    double time_to_first_solution_s = -1.0;  // negative: no solution found
};

struct PlanResult {
    PlanStatus status = PlanStatus::ExhaustedNoPlan;
    std::optional<Trajectory> trajectory;
    PlanStats stats;
};

/// Search-tree node. explored_primitive_ids lives on the parent role: ids of
/// extending primitives already enqueued for this node's children.
struct SearchNode {
    Pose pose;
    MotionPrimitive extending;
    int parent = -1;
    int rank = 0;
    double accumulated_length = 0.0;
    long insertion_serial = 0;
    std::vector<std::uint64_t> explored_primitive_ids;

    bool is_root() const { return parent < 0; }
};

enum class RejectReason { None, Length, Reachability, Duplicate, Collision };

/// CLOSED set: accepted configurations with an exact position index so the
/// similarity radius query stays sublinear.
class ClosedSet {
  public:
    explicit ClosedSet(double d_sim = 5.5e-5)
        : grid_(std::max(2.0 * d_sim, 1e-3)) {}

    void insert(const Pose& p) {
        grid_.insert(p.position);
        poses_.push_back(p);
    }
    std::size_t size() const { return poses_.size(); }

    /// Any closed configuration within d_sim under the weighted metric? The
    /// position grid prunes first (positions lower-bound the metric), then the
    /// exact metric decides.
    bool contains_similar(const Pose& p, double d_sim, double alpha) const {
        return grid_.for_each_within(p.position, d_sim, [&](int i) {
            return distance(poses_[i], p, alpha) < d_sim;
        });
    }

    /// Exact-configuration duplicate (equivalent-node pruning).
    bool contains_duplicate(const Pose& p, double tol = 1e-9) const {
        return grid_.for_each_within(p.position, tol, [&](int i) {
            return quat_angle(poses_[i].orientation, p.orientation) <= tol;
        });
    }

  private:
    PointGrid grid_;
    std::vector<Pose> poses_;
};

inline bool exists_similar(const Pose& pose, const ClosedSet& closed, double d_sim,
                           double alpha) {
    if (d_sim <= 0.0) return false;
    return closed.contains_similar(pose, d_sim, alpha);
}

namespace detail {

struct Features {
    bool similar_rejection = false;
    bool reachability = false;
    bool direct_connect = false;
    bool equivalent_prune = false;
};

inline Features features_of(Variant v) {
    switch (v) {
        case Variant::RcsB: return {true, false, false, false};
        case Variant::RcsNr: return {false, false, false, false};
        case Variant::Rcs:
        case Variant::RcsPar: return {true, true, true, true};
    }
    return {};
}

}  // namespace detail

/// Lazy validation of an extracted node, in order: insertion-length bound,
/// goal reachability (optimized variants), duplicate rejection (optimized
/// variants), extending-arc collision. Returns the first failed check.
inline RejectReason validate_node(const SearchNode& node, const Pose* parent_pose,
                                  const ProblemInstance& problem, const PlannerConfig& cfg,
                                  const ClosedSet& closed, const detail::Features& feat) {
    if (node.accumulated_length > problem.ell_max + 1e-9) return RejectReason::Length;
    if (feat.reachability &&
        !goal_reachable(node.pose, problem.goal, problem.kappa_max, problem.tau))
        return RejectReason::Reachability;
    if (feat.equivalent_prune && closed.contains_duplicate(node.pose))
        return RejectReason::Duplicate;
    if (parent_pose &&
        !arc_free(*problem.env, *parent_pose, node.extending, cfg.collision_step))
        return RejectReason::Collision;
    return RejectReason::None;
}

/// Refinement insertion (Alg. 1's finer-sibling step): every refined primitive
/// of the node's extending primitive that is not below the cutoff and whose id
/// the parent has not explored yet is handed to `push` and recorded. Returns
/// the number pushed. Callers guard the root.
template <typename PushFn>
inline int insert_refined_primitives(SearchNode& parent, const MotionPrimitive& extending,
                                     const PlannerConfig& cfg, PushFn&& push) {
    int inserted = 0;
    for (const auto& m : refine(extending, cfg.delta_ell_max, cfg.delta_theta_max)) {
        if (below_cutoff(m, cfg.cutoff, cfg.delta_ell_max, cfg.delta_theta_max)) continue;
        auto& ids = parent.explored_primitive_ids;
        const auto it = std::lower_bound(ids.begin(), ids.end(), m.id);
        if (it != ids.end() && *it == m.id) continue;
        ids.insert(it, m.id);
        push(m);
        ++inserted;
    }
    return inserted;
}

namespace detail {

struct OpenEntry {
    int rank;
    long serial;
    int node;
};
struct OpenOrder {
    bool operator()(const OpenEntry& a, const OpenEntry& b) const {
        if (a.rank != b.rank) return a.rank > b.rank;
        return a.serial > b.serial;  // FIFO among equal ranks
    }
};

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Shared mechanics of the serial and parallel searches.
struct SearchState {
    const ProblemInstance& problem;
    const PlannerConfig& cfg;
    Features feat;
    std::deque<SearchNode> arena;
    std::priority_queue<OpenEntry, std::vector<OpenEntry>, OpenOrder> open;
    ClosedSet closed;
    std::vector<MotionPrimitive> coarsest;
    long serial_counter = 0;
    PlanStats stats;
    Clock::time_point t0 = Clock::now();

    // best solution so far (anytime keeps improving it)
    bool have_solution = false;
    Trajectory best;
    double best_cost = 0.0;

    SearchState(const ProblemInstance& pb, const PlannerConfig& c)
        : problem(pb), cfg(c), feat(features_of(c.variant)), closed(c.d_sim) {
        coarsest = coarsest_primitives(
            {0.0, pb.kappa_max}, cfg.delta_ell_max,
            {0.0, cfg.delta_theta_max, 2.0 * cfg.delta_theta_max, 3.0 * cfg.delta_theta_max},
            cfg.delta_theta_max);
        arena.push_back(SearchNode{pb.start, {}, -1, 0, 0.0, serial_counter++, {}});
        open.push({0, 0, 0});
    }

    bool budget_exceeded() const {
        return cfg.time_budget_s > 0 && seconds_since(t0) > cfg.time_budget_s;
    }

    void push_child(int parent_idx, const MotionPrimitive& m) {
        const SearchNode& par = arena[parent_idx];
        SearchNode child;
        child.pose = apply_primitive(par.pose, m);
        child.extending = m;
        child.parent = parent_idx;
        child.rank = rank_of(par.rank, m, cfg.delta_ell_max, cfg.delta_theta_max);
        child.accumulated_length = par.accumulated_length + m.delta_ell;
        child.insertion_serial = serial_counter++;
        const int idx = static_cast<int>(arena.size());
        arena.push_back(std::move(child));
        open.push({arena[idx].rank, arena[idx].insertion_serial, idx});
    }

    Trajectory retrieve(int node_idx, const std::optional<Arc>& goal_arc) const {
        Trajectory t;
        for (int i = node_idx; i >= 0; i = arena[i].parent) {
            t.waypoints.push_back(arena[i].pose);
            if (!arena[i].is_root()) t.primitives.push_back(arena[i].extending);
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
    }

    double cost_of(const Trajectory& t) const {
        return t.length_mm / problem.ell_max + t.targeting_error_mm / problem.tau;
    }

    // records a solution; returns true when the search should stop
    bool commit_solution(int node_idx, const std::optional<Arc>& goal_arc) {
        Trajectory t = retrieve(node_idx, goal_arc);
        const double c = cost_of(t);
        if (!have_solution) stats.time_to_first_solution_s = seconds_since(t0);
        if (!have_solution || c < best_cost) {
            best = std::move(t);
            best_cost = c;
        }
        have_solution = true;
        return !cfg.anytime;
    }

    // direct goal connection from an accepted node; the arc's length counts
    // toward the insertion budget and the arc is collision checked
    std::optional<Arc> try_direct_connect(const SearchNode& v) const {
        if (!feat.direct_connect) return std::nullopt;
        std::optional<Arc> arc;
        try {
            arc = direct_connect(v.pose, problem.goal, problem.kappa_max, problem.tau);
        } catch (const UndefinedDirectionError&) {
            return std::nullopt;
        }
        if (!arc) return std::nullopt;
        if (v.accumulated_length + arc->primitive.delta_ell > problem.ell_max + 1e-9)
            return std::nullopt;
        if ((arc->end.position - problem.goal).norm() > problem.tau) return std::nullopt;
        if (!arc_free(*problem.env, v.pose, arc->primitive, cfg.collision_step))
            return std::nullopt;
        return arc;
    }

    PlanResult finish(PlanStatus status_when_empty) {
        PlanResult r;
        r.stats = stats;
        r.stats.wall_time_s = seconds_since(t0);
        if (have_solution) {
            r.status = PlanStatus::Solved;
            r.trajectory = best;
        } else {
            r.status = status_when_empty;
        }
        return r;
    }
};

}  // namespace detail

inline PlanResult plan_parallel(const ProblemInstance& problem, const PlannerConfig& cfg);

/// Rank-ordered multi-resolution search over motion primitives with lazy
/// validation; coarse children are enqueued on acceptance and finer siblings
/// on every extraction, so resolution deepens only where the search looks.
inline PlanResult plan(const ProblemInstance& problem, const PlannerConfig& cfg) {
    validate_config(cfg);
    if (cfg.variant == Variant::RcsPar) return plan_parallel(problem, cfg);

    detail::SearchState s(problem, cfg);
    bool timed_out = false;

    while (!s.open.empty()) {
        if (s.budget_exceeded()) {
            timed_out = true;
            break;
        }
        const detail::OpenEntry e = s.open.top();
        s.open.pop();
        if (cfg.rank_trace) cfg.rank_trace->push_back(e.rank);

        const int vi = e.node;
        const Pose* parent_pose =
            s.arena[vi].is_root() ? nullptr : &s.arena[s.arena[vi].parent].pose;
        const RejectReason reason =
            validate_node(s.arena[vi], parent_pose, problem, cfg, s.closed, s.feat);

        if (reason == RejectReason::None) {
            if (s.feat.similar_rejection &&
                exists_similar(s.arena[vi].pose, s.closed, cfg.d_sim, cfg.alpha)) {
                ++s.stats.nodes_pruned_similar;
            } else {
                // accepted
                s.closed.insert(s.arena[vi].pose);
                ++s.stats.nodes_expanded;
                bool stop = false;
                if ((s.arena[vi].pose.position - problem.goal).norm() <= problem.tau) {
                    stop = s.commit_solution(vi, std::nullopt);
                } else if (const auto arc = s.try_direct_connect(s.arena[vi])) {
                    stop = s.commit_solution(vi, arc);
                }
                if (stop) return s.finish(PlanStatus::Solved);
                // coarsest-child expansion; refinement only ever emits deeper
                // levels, so these ids can never be re-generated
                for (const auto& m : s.coarsest) s.push_child(vi, m);
            }
        } else if (reason == RejectReason::Reachability) {
            ++s.stats.nodes_pruned_reachability;
        }

        if (!s.arena[vi].is_root()) {
            const MotionPrimitive extending = s.arena[vi].extending;
            const int pi = s.arena[vi].parent;
            insert_refined_primitives(s.arena[pi], extending, cfg,
                                      [&](const MotionPrimitive& m) { s.push_child(pi, m); });
        }
    }

    return s.finish(timed_out ? PlanStatus::TimedOut : PlanStatus::ExhaustedNoPlan);
}

/// Worker-pool variant: OPEN, CLOSED and the arena sit behind one lock; node
/// processing (validation geometry and collision checks) runs outside it. The
/// first committed solution wins unless anytime mode keeps improving the best.
inline PlanResult plan_parallel(const ProblemInstance& problem, const PlannerConfig& cfg) {
    validate_config(cfg);

    detail::SearchState s(problem, cfg);
    std::mutex mu;
    std::condition_variable cv;
    int busy = 0;
    bool stop = false;
    bool timed_out = false;

    auto worker = [&]() {
        std::unique_lock<std::mutex> lock(mu);
        for (;;) {
            if (stop) return;
            if (s.open.empty()) {
                if (busy == 0) {
                    stop = true;
                    cv.notify_all();
                    return;
                }
                cv.wait(lock);
                continue;
            }
            if (s.budget_exceeded()) {
                stop = timed_out = true;
                cv.notify_all();
                return;
            }
            const detail::OpenEntry e = s.open.top();
            s.open.pop();
            ++busy;

            // snapshot the payload needed outside the lock (not the explored
            // id list, which only matters under the lock)
            const int vi = e.node;
            SearchNode node;
            node.pose = s.arena[vi].pose;
            node.extending = s.arena[vi].extending;
            node.parent = s.arena[vi].parent;
            node.rank = s.arena[vi].rank;
            node.accumulated_length = s.arena[vi].accumulated_length;
            const Pose parent_pose = node.is_root() ? Pose{} : s.arena[node.parent].pose;
            lock.unlock();

            // checks with no shared mutable state
            RejectReason reason = RejectReason::Length;
            if (node.accumulated_length <= problem.ell_max + 1e-9) {
                reason = RejectReason::None;
                if (s.feat.reachability &&
                    !goal_reachable(node.pose, problem.goal, problem.kappa_max, problem.tau))
                    reason = RejectReason::Reachability;
                else if (!node.is_root() &&
                         !arc_free(*problem.env, parent_pose, node.extending,
                                   cfg.collision_step))
                    reason = RejectReason::Collision;
            }
            std::optional<Arc> dc;
            if (reason == RejectReason::None &&
                (node.pose.position - problem.goal).norm() > problem.tau)
                dc = s.try_direct_connect(node);

            lock.lock();
            if (reason == RejectReason::None) {
                // CLOSED-dependent checks under the lock
                if (s.feat.equivalent_prune && s.closed.contains_duplicate(node.pose)) {
                    reason = RejectReason::Duplicate;
                } else if (s.feat.similar_rejection &&
                           exists_similar(node.pose, s.closed, cfg.d_sim, cfg.alpha)) {
                    ++s.stats.nodes_pruned_similar;
                    reason = RejectReason::Duplicate;  // handled; skip acceptance
                } else {
                    s.closed.insert(node.pose);
                    ++s.stats.nodes_expanded;
                    bool request_stop = false;
                    if ((node.pose.position - problem.goal).norm() <= problem.tau)
                        request_stop = s.commit_solution(vi, std::nullopt);
                    else if (dc)
                        request_stop = s.commit_solution(vi, dc);
                    if (request_stop) {
                        stop = true;
                        --busy;
                        cv.notify_all();
                        return;
                    }
                    for (const auto& m : s.coarsest) s.push_child(vi, m);
                }
            } else if (reason == RejectReason::Reachability) {
                ++s.stats.nodes_pruned_reachability;
            }
            if (!node.is_root()) {
                const int pi = node.parent;
                insert_refined_primitives(
                    s.arena[pi], node.extending, cfg,
                    [&](const MotionPrimitive& m) { s.push_child(pi, m); });
            }
            --busy;
            cv.notify_all();
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(cfg.thread_count);
    for (int i = 0; i < cfg.thread_count; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    return s.finish(timed_out ? PlanStatus::TimedOut : PlanStatus::ExhaustedNoPlan);
}

/// Walks parent links from a goal node and emits the primitive sequence and
/// waypoints; exposed for tests, the planners call it through SearchState.
inline Trajectory retrieve_plan(const std::deque<SearchNode>& arena, int node_idx,
                                const Vec3& goal) {
    Trajectory t;
    for (int i = node_idx; i >= 0; i = arena[i].parent) {
        t.waypoints.push_back(arena[i].pose);
        if (!arena[i].is_root()) t.primitives.push_back(arena[i].extending);
    }
    std::reverse(t.waypoints.begin(), t.waypoints.end());
    std::reverse(t.primitives.begin(), t.primitives.end());
    for (const auto& m : t.primitives) t.length_mm += m.delta_ell;
    t.targeting_error_mm = (t.waypoints.back().position - goal).norm();
    return t;
}

// ---------------------------------------------------------------------------
// Plan files.
// ---------------------------------------------------------------------------

inline nlohmann::json plan_to_json(const PlanResult& r) {
    nlohmann::json j;
    j["status"] = status_name(r.status);
    j["primitives"] = nlohmann::json::array();
    j["waypoints"] = nlohmann::json::array();
    if (r.trajectory) {
        for (const auto& m : r.trajectory->primitives)
            j["primitives"].push_back({{"kappa", m.kappa},
                                       {"delta_ell", m.delta_ell},
                                       {"delta_theta", m.delta_theta}});
        for (const auto& w : r.trajectory->waypoints)
            j["waypoints"].push_back(
                {{"position", {w.position.x, w.position.y, w.position.z}},
                 {"quaternion",
                  {w.orientation.w, w.orientation.x, w.orientation.y, w.orientation.z}}});
        j["length_mm"] = r.trajectory->length_mm;
        j["targeting_error_mm"] = r.trajectory->targeting_error_mm;
    }
    j["stats"] = {{"nodes_expanded", r.stats.nodes_expanded},
                  {"nodes_pruned_similar", r.stats.nodes_pruned_similar},
                  {"nodes_pruned_reachability", r.stats.nodes_pruned_reachability},
                  {"wall_time_s", r.stats.wall_time_s},
                  {"time_to_first_solution_s", r.stats.time_to_first_solution_s}};
    return j;
}

inline void save_plan(const PlanResult& r, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write plan: " + path.string());
    out << plan_to_json(r).dump(2) << '\n';
}

inline PlanResult load_plan(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open plan: " + path.string());
    const nlohmann::json j = nlohmann::json::parse(in);
    PlanResult r;
    const std::string st = j.at("status").get<std::string>();
    r.status = st == "Solved"            ? PlanStatus::Solved
               : st == "ExhaustedNoPlan" ? PlanStatus::ExhaustedNoPlan
                                         : PlanStatus::TimedOut;
    if (!j["primitives"].empty() || !j["waypoints"].empty()) {
        Trajectory t;
        for (const auto& m : j["primitives"])
            t.primitives.push_back({m.at("kappa").get<double>(),
                                    m.at("delta_ell").get<double>(),
                                    m.at("delta_theta").get<double>()});
        for (const auto& w : j["waypoints"]) {
            Pose p;
            p.position = {w.at("position")[0].get<double>(), w.at("position")[1].get<double>(),
                          w.at("position")[2].get<double>()};
            p.orientation = {w.at("quaternion")[0].get<double>(),
                             w.at("quaternion")[1].get<double>(),
                             w.at("quaternion")[2].get<double>(),
                             w.at("quaternion")[3].get<double>()};
            t.waypoints.push_back(p);
        }
        t.length_mm = j.value("length_mm", 0.0);
        t.targeting_error_mm = j.value("targeting_error_mm", 0.0);
        r.trajectory = std::move(t);
    }
    const auto& s = j.at("stats");
    r.stats.nodes_expanded = s.value("nodes_expanded", 0L);
    r.stats.nodes_pruned_similar = s.value("nodes_pruned_similar", 0L);
    r.stats.nodes_pruned_reachability = s.value("nodes_pruned_reachability", 0L);
    r.stats.wall_time_s = s.value("wall_time_s", 0.0);
    r.stats.time_to_first_solution_s = s.value("time_to_first_solution_s", -1.0);
    return r;
}

}  // namespace needleplan
