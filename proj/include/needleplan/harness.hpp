#pragma once

#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#include "needleplan/baselines.hpp"
#include "needleplan/duty_cycle.hpp"
#include "needleplan/environment.hpp"
#include "needleplan/ode_oracle.hpp"
#include "needleplan/planner.hpp"
#include "needleplan/trajectory.hpp"

namespace needleplan {

/// Plan cost: relative insertion length plus relative targeting error.
inline double cost(const Trajectory& t, double ell_max, double tau, const Vec3& goal) {
    return t.length_mm / ell_max + (t.waypoints.back().position - goal).norm() / tau;
}

// ---------------------------------------------------------------------------
// Trajectory verification.
// ---------------------------------------------------------------------------

struct VerifyCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct VerifyReport {
    std::vector<VerifyCheck> checks;
    bool all_passed() const {
        for (const auto& c : checks)
            if (!c.passed) return false;
        return true;
    }
};

/// Independent re-validation of a claimed solution: re-simulates the primitive
/// sequence from the start pose and re-checks every Problem-1 condition plus
/// per-arc collision freedom against the environment.
inline VerifyReport verify_trajectory(const PlanResult& plan, const ProblemInstance& problem,
                                      double collision_step = 0.5) {
    VerifyReport rep;
    auto add = [&](const std::string& name, bool ok, const std::string& detail = "") {
        rep.checks.push_back({name, ok, detail});
    };
    if (plan.status != PlanStatus::Solved || !plan.trajectory) {
        add("status", false, "plan does not claim Solved");
        return rep;
    }
    const Trajectory& t = *plan.trajectory;
    if (t.waypoints.size() != t.primitives.size() + 1) {
        add("waypoint-count", false, "waypoints must be primitives + 1");
        return rep;
    }

    add("start-pose", distance(t.waypoints.front(), problem.start, 1.0) < 1e-9);

    bool curvature_ok = true, arcs_ok = true;
    double length = 0.0;
    Pose cur = problem.start;
    double waypoint_err = 0.0;
    for (std::size_t i = 0; i < t.primitives.size(); ++i) {
        const auto& m = t.primitives[i];
        if (m.kappa > problem.kappa_max + 1e-12 || m.kappa < 0.0) curvature_ok = false;
        if (!arc_free(*problem.env, cur, m, collision_step)) arcs_ok = false;
        cur = apply_primitive(cur, m);
        waypoint_err = std::max(waypoint_err, distance(cur, t.waypoints[i + 1], 1.0));
        length += m.delta_ell;
    }
    add("curvature-bound", curvature_ok);
    add("collision-free", arcs_ok);
    {
        std::ostringstream os;
        os << "max waypoint deviation " << waypoint_err;
        add("waypoint-consistency", waypoint_err < 1e-6, os.str());
    }
    add("length-bound", length <= problem.ell_max + 1e-9,
        "length " + std::to_string(length));
    const double err = (cur.position - problem.goal).norm();
    add("targeting-error", err <= problem.tau + 1e-9, "error " + std::to_string(err));
    return rep;
}

/// Minimum over the sampled trajectory of (nearest obstacle distance minus the
/// needle radius); +inf for an empty cloud.
inline double clearance(const std::vector<Pose>& traj, const Environment& env) {
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& p : traj)
        worst = std::min(worst, env.index.nearest_distance(p.position) - env.needle_radius);
    return worst;
}

// ---------------------------------------------------------------------------
// Benchmarks.
// ---------------------------------------------------------------------------

struct BenchRecord {
    std::string case_id;
    std::string planner;
    PlanStatus status = PlanStatus::TimedOut;
    double time_to_first_solution_s = -1.0;
    double best_cost = std::numeric_limits<double>::quiet_NaN();
    double length_mm = std::numeric_limits<double>::quiet_NaN();
    double targeting_error_mm = std::numeric_limits<double>::quiet_NaN();
    long nodes_expanded = 0;
};

using PlannerFn = std::function<PlanResult(const ProblemInstance&)>;

/// Named planner closures over a shared configuration; planners run in
/// anytime mode so records carry the best cost found within the budget.
inline std::vector<std::pair<std::string, PlannerFn>> make_planners(
    const std::vector<std::string>& names, PlannerConfig base, RrtConfig rrt_base) {
    base.anytime = true;
    rrt_base.anytime = true;
    std::vector<std::pair<std::string, PlannerFn>> out;
    for (const auto& name : names) {
        PlannerConfig cfg = base;
        RrtConfig rcfg = rrt_base;
        if (name == "rcs" || name == "rcs-b" || name == "rcs-nr" || name == "rcs-par") {
            cfg.variant = name == "rcs"      ? Variant::Rcs
                          : name == "rcs-b"  ? Variant::RcsB
                          : name == "rcs-nr" ? Variant::RcsNr
                                             : Variant::RcsPar;
            if (name != "rcs-par") cfg.thread_count = 1;
            out.emplace_back(name, [cfg](const ProblemInstance& p) { return plan(p, cfg); });
        } else if (name == "rrt") {
            rcfg.thread_count = 1;
            out.emplace_back(name,
                             [rcfg](const ProblemInstance& p) { return plan_rrt(p, rcfg); });
        } else if (name == "rrt-par") {
            out.emplace_back(
                name, [rcfg](const ProblemInstance& p) { return plan_rrt_parallel(p, rcfg); });
        } else if (name == "single-res") {
            cfg.thread_count = 1;
            out.emplace_back(
                name, [cfg](const ProblemInstance& p) { return plan_single_res(p, cfg); });
        } else {
            throw std::invalid_argument("unknown planner name: " + name);
        }
    }
    return out;
}

/// Runs every planner on every case under the shared time budget; per-case
/// failures become records, never abort the sweep. Wall time excludes
/// scenario loading by construction (instances are already in memory).
inline std::vector<BenchRecord> run_benchmark(
    const std::vector<ProblemInstance>& suite,
    const std::vector<std::pair<std::string, PlannerFn>>& planners,
    const std::function<void(const BenchRecord&)>& on_record = {}) {
    std::vector<BenchRecord> records;
    for (const auto& problem : suite) {
        for (const auto& [name, fn] : planners) {
            BenchRecord rec;
            rec.case_id = problem.name;
            rec.planner = name;
            try {
                const PlanResult r = fn(problem);
                rec.status = r.status;
                rec.time_to_first_solution_s = r.stats.time_to_first_solution_s;
                rec.nodes_expanded = r.stats.nodes_expanded;
                if (r.status == PlanStatus::Solved && r.trajectory) {
                    rec.best_cost = cost(*r.trajectory, problem.ell_max, problem.tau,
                                         problem.goal);
                    rec.length_mm = r.trajectory->length_mm;
                    rec.targeting_error_mm = r.trajectory->targeting_error_mm;
                }
            } catch (const std::exception& e) {
                rec.status = PlanStatus::TimedOut;
                rec.targeting_error_mm = std::numeric_limits<double>::quiet_NaN();
            }
            records.push_back(rec);
            if (on_record) on_record(records.back());
        }
    }
    return records;
}

inline void save_bench_csv(const std::vector<BenchRecord>& records,
                           const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write csv: " + path.string());
    out << "case_id,planner,status,time_to_first_solution_s,best_cost,length_mm,"
           "targeting_error_mm,nodes_expanded\n";
    out.precision(10);
    for (const auto& r : records)
        out << r.case_id << ',' << r.planner << ',' << status_name(r.status) << ','
            << r.time_to_first_solution_s << ',' << r.best_cost << ',' << r.length_mm << ','
            << r.targeting_error_mm << ',' << r.nodes_expanded << '\n';
}

/// Success fraction per planner at each grid time: the share of cases whose
/// first solution arrived within t. Monotone non-decreasing by construction.
struct SuccessCurve {
    std::vector<double> times;
    std::map<std::string, std::vector<double>> fraction;  // planner -> per-time fraction
};

inline SuccessCurve success_curve(const std::vector<BenchRecord>& records,
                                  const std::vector<double>& time_grid) {
    SuccessCurve curve;
    curve.times = time_grid;
    std::map<std::string, long> case_count;
    for (const auto& r : records) ++case_count[r.planner];
    for (const auto& [planner, total] : case_count) {
        std::vector<double> f;
        f.reserve(time_grid.size());
        for (double t : time_grid) {
            long solved = 0;
            for (const auto& r : records)
                if (r.planner == planner && r.status == PlanStatus::Solved &&
                    r.time_to_first_solution_s >= 0 && r.time_to_first_solution_s <= t)
                    ++solved;
            f.push_back(static_cast<double>(solved) / static_cast<double>(total));
        }
        curve.fraction[planner] = std::move(f);
    }
    return curve;
}

/// Table-1-style summary: success rate, mean length relative to a baseline
/// planner's per-case best, mean targeting error. Relative length averages
/// only over cases every listed planner solved.
inline std::string summarize_benchmark(const std::vector<BenchRecord>& records,
                                       const std::string& baseline_planner) {
    std::map<std::string, std::map<std::string, const BenchRecord*>> by_planner;
    std::map<std::string, long> totals, solved;
    for (const auto& r : records) {
        by_planner[r.planner][r.case_id] = &r;
        ++totals[r.planner];
        if (r.status == PlanStatus::Solved) ++solved[r.planner];
    }
    std::string base = baseline_planner;
    if (!by_planner.count(base)) base = by_planner.begin()->first;

    // cases solved by every planner
    std::vector<std::string> common;
    for (const auto& [cid, rec] : by_planner[base]) {
        bool all = true;
        for (const auto& [p, cases] : by_planner) {
            const auto it = cases.find(cid);
            if (it == cases.end() || it->second->status != PlanStatus::Solved) all = false;
        }
        if (all) common.push_back(cid);
        (void)rec;
    }

    std::ostringstream os;
    os << std::fixed << std::setprecision(3);
    os << "planner        success   rel_length   avg_error_mm   (rel. to " << base << ", "
       << common.size() << " common cases)\n";
    for (const auto& [p, cases] : by_planner) {
        double rel = 0.0, err = 0.0;
        long n = 0;
        for (const auto& cid : common) {
            const BenchRecord* r = cases.at(cid);
            const BenchRecord* b = by_planner[base].at(cid);
            rel += r->length_mm / b->length_mm;
            err += r->targeting_error_mm;
            ++n;
        }
        os << std::left << std::setw(15) << p << std::setw(10)
           << (static_cast<double>(solved[p]) / std::max(1L, totals[p])) << std::setw(13)
           << (n ? rel / n : std::numeric_limits<double>::quiet_NaN()) << std::setw(12)
           << (n ? err / n : std::numeric_limits<double>::quiet_NaN()) << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Appendix property suites (also wired to the CLI).
// ---------------------------------------------------------------------------

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// 1000 random primitives: the closed-form kinematics must match the
/// fixed-step integration oracle to 1e-6 mm / 1e-6 rad.
inline CheckResult check_kinematics_oracle(int n = 1000, std::uint64_t seed = 2024,
                                           double kappa_max = 0.01,
                                           double delta_ell_max = 20.0) {
    Rng rng(seed);
    double worst_pos = 0.0, worst_ang = 0.0;
    for (int i = 0; i < n; ++i) {
        const Pose start{{rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-50, 50)},
                         heading_to_orientation(rng.unit_vector(), rng.uniform(0, kTwoPi))};
        const MotionPrimitive m{rng.uniform(0, kappa_max),
                                rng.uniform(1e-3, delta_ell_max),
                                rng.uniform(0, kTwoPi)};
        const Pose a = apply_primitive(start, m);
        const Pose b = ode_oracle(start, m.kappa, m.delta_ell, m.delta_theta, 1e-3);
        worst_pos = std::max(worst_pos, (a.position - b.position).norm());
        worst_ang = std::max(worst_ang, quat_angle(a.orientation, b.orientation));
    }
    std::ostringstream os;
    os << "max position error " << worst_pos << " mm, max angle error " << worst_ang
       << " rad over " << n << " primitives";
    return {"kinematics-oracle", worst_pos < 1e-6 && worst_ang < 1e-6, os.str()};
}

/// Random duty-cycling decompositions: deviation below the requested eps and
/// below the per-chunk analytic bound, endpoint error below eps.
inline CheckResult check_duty_cycling(int n = 100, std::uint64_t seed = 2025,
                                      double kappa_max = 0.01) {
    Rng rng(seed);
    int failures = 0;
    double worst_ratio = 0.0;
    for (int i = 0; i < n; ++i) {
        const double kappa = rng.uniform(0.02 * kappa_max, 0.99 * kappa_max);
        const double length = rng.uniform(5.0, 60.0);
        const double eps = rng.uniform(0.05, 0.5);
        const double theta0 = rng.uniform(0, kTwoPi);
        const auto chain = duty_cycle_decompose(kappa, length, theta0, kappa_max, eps);

        const auto target = sample_chain(Pose::identity(), {{kappa, length, theta0}}, 0.05);
        const auto approx = sample_chain(Pose::identity(), chain, 0.05);
        const double dev = hausdorff_one_way(target, approx, 0.05);

        // per-chunk bound: chunks are equal, so read the swept angle off any
        // max-curvature segment (bend length = eta / kappa_max)
        double eta = length * kappa;
        for (const auto& m : chain)
            if (m.kappa == kappa_max) eta = m.delta_ell * kappa_max;
        const double bound = duty_cycle_chunk_bound(1.0 / kappa, eta);

        Pose end = Pose::identity();
        for (const auto& m : chain) end = apply_primitive(end, m);
        const Pose want = apply_primitive(Pose::identity(), {kappa, length, theta0});
        const double end_err = distance(end, want, 0.05);

        if (!(dev < eps && dev < bound && end_err < eps)) ++failures;
        worst_ratio = std::max(worst_ratio, dev / eps);
    }
    std::ostringstream os;
    os << failures << " failures over " << n << " decompositions, worst deviation/eps "
       << worst_ratio;
    return {"duty-cycling", failures == 0, os.str()};
}

/// Equal-curvature action-distance inequality with the weighted-metric
/// allowance for the orientation term.
inline CheckResult check_action_distance(int n = 500, std::uint64_t seed = 2026,
                                         double kappa_max = 0.01, double alpha = 0.05) {
    Rng rng(seed);
    int violations = 0;
    double min_margin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        const double kappa = (i % 3 == 0) ? (i % 2 ? 0.0 : kappa_max)
                                          : rng.uniform(0, kappa_max);
        const double l1 = rng.uniform(0.125, 20.0), l2 = rng.uniform(0.125, 20.0);
        const double t1 = rng.uniform(0, kTwoPi), t2 = rng.uniform(0, kTwoPi);
        const double rho = action_distance({kappa, l1, t1}, {kappa, l2, t2}, alpha);
        const double dth = std::abs(t1 - t2);
        const double bound = dth * std::min(l1, l2) + std::abs(l1 - l2) +
                             alpha * (wrap_pi(dth) + kappa * std::abs(l1 - l2));
        if (rho >= bound) ++violations;
        min_margin = std::min(min_margin, bound - rho);
    }
    std::ostringstream os;
    os << violations << " violations over " << n << " equal-curvature pairs, min margin "
       << min_margin;
    return {"action-distance", violations == 0, os.str()};
}

/// Spot checks of the similar-node radius bound, including the underflow path
/// and the L_s -> 1 limit.
inline CheckResult check_d_sim_bound() {
    bool ok = true;
    std::ostringstream os;
    const auto direct = d_sim_bound(1.0, 10.0, 5.0, 1.1);
    ok = ok && !direct.underflow && std::abs(direct.value - 0.1 / 0.42) < 1e-9;
    const auto under = d_sim_bound(1.0, 100.0, 0.125, 2.0);
    ok = ok && under.underflow && under.value == 0.0;
    const auto lim = d_sim_bound(1.0, 100.0, 0.125, 1.0 + 1e-9);
    ok = ok && !lim.underflow && std::abs(lim.value - 1.0 / 1600.0) < 1e-7;
    os << "direct " << direct.value << ", underflow flag " << under.underflow << ", limit "
       << lim.value;
    return {"d-sim-bound", ok, os.str()};
}

inline std::vector<CheckResult> run_appendix_checks() {
    return {check_kinematics_oracle(), check_duty_cycling(), check_action_distance(),
            check_d_sim_bound()};
}

}  // namespace needleplan
