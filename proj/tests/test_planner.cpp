#include <catch2/catch_amalgamated.hpp>

#include "needleplan/harness.hpp"
#include "needleplan/planner.hpp"

using namespace needleplan;

namespace {

ProblemInstance open_problem(Vec3 goal, double ell_max = 100.0) {
    ProblemInstance p;
    p.env = make_environment({}, {{-150, -150, -150}, {150, 150, 150}}, 1.0, 0.0);
    p.start = Pose::identity();
    p.goal = goal;
    p.tau = 1.0;
    p.ell_max = ell_max;
    p.kappa_max = 0.01;
    return p;
}

PlannerConfig quick_cfg(Variant v) {
    PlannerConfig cfg;
    cfg.variant = v;
    cfg.time_budget_s = 30.0;
    return cfg;
}

}  // namespace

TEST_CASE("straight-ahead goal solves for every variant", "[planner]") {
    const auto problem = open_problem({0, 0, 50});
    for (Variant v : {Variant::RcsB, Variant::RcsNr, Variant::Rcs}) {
        const PlanResult r = plan(problem, quick_cfg(v));
        REQUIRE(r.status == PlanStatus::Solved);
        REQUIRE(r.trajectory.has_value());
        CHECK(r.trajectory->targeting_error_mm <= problem.tau);
        CHECK(verify_trajectory(r, problem).all_passed());
    }
}

TEST_CASE("direct connection gives zero targeting error on the open problem", "[planner]") {
    const auto problem = open_problem({20, 10, 70});
    const PlanResult r = plan(problem, quick_cfg(Variant::Rcs));
    REQUIRE(r.status == PlanStatus::Solved);
    CHECK(r.trajectory->targeting_error_mm < 1e-9);
}

TEST_CASE("blocked problem certifies no plan", "[planner]") {
    const auto problem = make_blocked_problem(21, BlockedSpec{});
    PlannerConfig cfg = quick_cfg(Variant::Rcs);
    cfg.delta_ell_max = 4.0;
    cfg.cutoff = {1.0, 0.4};
    cfg.d_sim = 0.01;
    cfg.time_budget_s = 120.0;
    const PlanResult r = plan(problem, cfg);
    CHECK(r.status == PlanStatus::ExhaustedNoPlan);
    CHECK(r.stats.nodes_expanded > 0);
}

TEST_CASE("bounded expansions on a blocked pocket with a tiny lattice", "[planner]") {
    BlockedSpec spec;
    spec.pocket_radius = 3.0;
    spec.ell_max = 4.0;
    const auto problem = make_blocked_problem(22, spec);
    PlannerConfig cfg = quick_cfg(Variant::Rcs);
    cfg.delta_ell_max = 2.0;
    cfg.cutoff = {1.0, 0.8};  // length levels <= 1, angle level 0 only
    cfg.d_sim = 0.01;
    cfg.time_budget_s = 120.0;
    const PlanResult r = plan(problem, cfg);
    REQUIRE(r.status == PlanStatus::ExhaustedNoPlan);

    // independent bound: enumerate every primitive sequence whose length sum
    // stays within ell_max (the lattice tree an exhaustive search could touch)
    const std::vector<double> lengths{2.0, 1.0};
    long bound = 0;
    const std::function<void(double)> enumerate = [&](double used) {
        for (double l : lengths) {
            if (used + l > problem.ell_max + 1e-9) continue;
            bound += 2 * 4;  // curvatures x coarsest angles
            enumerate(used + l);
        }
    };
    enumerate(0.0);
    bound += 1;  // the root
    CHECK(r.stats.nodes_expanded < bound);
}

TEST_CASE("extraction ranks are non-decreasing (serial variants)", "[planner]") {
    const auto cp = make_corridor_problem(33, CorridorSpec{});
    for (Variant v : {Variant::Rcs, Variant::RcsB}) {
        std::vector<int> ranks;
        PlannerConfig cfg = quick_cfg(v);
        cfg.rank_trace = &ranks;
        cfg.cutoff = {0.125, kPi / 32};
        plan(cp.problem, cfg);
        REQUIRE_FALSE(ranks.empty());
        for (std::size_t i = 1; i < ranks.size(); ++i) CHECK(ranks[i] >= ranks[i - 1]);
    }
}

TEST_CASE("serial runs are deterministic", "[planner]") {
    const auto cp = make_corridor_problem(34, CorridorSpec{});
    PlannerConfig cfg = quick_cfg(Variant::Rcs);
    cfg.cutoff = {0.125, kPi / 32};
    const PlanResult a = plan(cp.problem, cfg);
    const PlanResult b = plan(cp.problem, cfg);
    REQUIRE(a.status == b.status);
    auto ja = plan_to_json(a), jb = plan_to_json(b);
    ja["stats"]["wall_time_s"] = jb["stats"]["wall_time_s"] = 0.0;
    ja["stats"]["time_to_first_solution_s"] = jb["stats"]["time_to_first_solution_s"] = 0.0;
    CHECK(ja.dump() == jb.dump());
}

TEST_CASE("solved corridor re-simulates to its stored waypoints", "[planner]") {
    const auto cp = make_corridor_problem(35, CorridorSpec{});
    PlannerConfig cfg = quick_cfg(Variant::Rcs);
    cfg.cutoff = {0.125, kPi / 32};
    const PlanResult r = plan(cp.problem, cfg);
    REQUIRE(r.status == PlanStatus::Solved);
    Pose cur = cp.problem.start;
    REQUIRE((r.trajectory->waypoints.front().position - cur.position).norm() < 1e-12);
    for (std::size_t i = 0; i < r.trajectory->primitives.size(); ++i) {
        cur = apply_primitive(cur, r.trajectory->primitives[i]);
        CHECK(distance(cur, r.trajectory->waypoints[i + 1], 1.0) < 1e-9);
    }
    CHECK(verify_trajectory(r, cp.problem).all_passed());
}

TEST_CASE("validate_node applies checks in order", "[planner]") {
    const auto problem = open_problem({0, 0, 50}, 30.0);
    const PlannerConfig cfg = quick_cfg(Variant::Rcs);
    const auto feat = detail::features_of(Variant::Rcs);
    ClosedSet closed(cfg.d_sim);

    SearchNode over;
    over.pose = Pose::identity();
    over.accumulated_length = 30.0 + cfg.cutoff.r_ell;  // ell_max + one cutoff step
    CHECK(validate_node(over, nullptr, problem, cfg, closed, feat) == RejectReason::Length);

    // goal 4.87 mm inside the unreachable torus
    auto deep = problem;
    deep.goal = {5, 0, 5};
    SearchNode root;
    root.pose = Pose::identity();
    CHECK(validate_node(root, nullptr, deep, cfg, closed, feat) ==
          RejectReason::Reachability);

    closed.insert(root.pose);
    CHECK(validate_node(root, nullptr, problem, cfg, closed, feat) ==
          RejectReason::Duplicate);
}

TEST_CASE("exists_similar basics", "[planner]") {
    ClosedSet closed(0.05);
    CHECK_FALSE(exists_similar(Pose::identity(), closed, 0.05, 0.05));
    closed.insert(Pose::identity());
    CHECK(exists_similar(Pose::identity(), closed, 0.05, 0.05));
    Pose shifted = Pose::identity();
    shifted.position = {0.2, 0, 0};  // 4 * d_sim away, identical orientation
    CHECK_FALSE(exists_similar(shifted, closed, 0.05, 0.05));
}

TEST_CASE("insert_refined respects cutoff and explored ids", "[planner]") {
    PlannerConfig cfg;
    cfg.cutoff = {0.125, 0.157};
    SearchNode parent;
    parent.pose = Pose::identity();

    MotionPrimitive coarse{0.01, 20.0, 0.0};
    coarse.id = primitive_id(1, coarse, cfg.delta_ell_max, cfg.delta_theta_max);
    std::vector<MotionPrimitive> pushed;
    int n = insert_refined_primitives(parent, coarse, cfg,
                                      [&](const MotionPrimitive& m) { pushed.push_back(m); });
    CHECK(n == 2);  // both level-0 omissions apply
    // a second pass with the same primitive finds everything explored
    n = insert_refined_primitives(parent, coarse, cfg,
                                  [&](const MotionPrimitive& m) { pushed.push_back(m); });
    CHECK(n == 0);

    // refinements below the cutoff never enqueue
    PlannerConfig tight = cfg;
    tight.cutoff = {30.0, 10.0};  // everything below cutoff
    SearchNode parent2;
    n = insert_refined_primitives(parent2, coarse, tight, [&](const MotionPrimitive&) {});
    CHECK(n == 0);
}

TEST_CASE("variant success ordering on corridors run to exhaustion", "[planner][slow]") {
    // optimizations only prune invalid or redundant work: anything RCS_B
    // solves, RCS solves
    for (std::uint64_t seed : {50, 51, 52}) {
        CorridorSpec spec;
        spec.n_primitives = 2;
        spec.max_level = 2;
        const auto cp = make_corridor_problem(seed, spec);
        PlannerConfig cfg = quick_cfg(Variant::RcsB);
        cfg.cutoff = {0.6, 0.2};
        cfg.time_budget_s = 60.0;
        const PlanResult basic = plan(cp.problem, cfg);
        cfg.variant = Variant::Rcs;
        const PlanResult rcs = plan(cp.problem, cfg);
        if (basic.status == PlanStatus::Solved) CHECK(rcs.status == PlanStatus::Solved);
        if (rcs.status == PlanStatus::Solved)
            CHECK(verify_trajectory(rcs, cp.problem).all_passed());
    }
}

TEST_CASE("RCS_NR accepts a superset of RCS_B's configurations", "[planner][slow]") {
    BlockedSpec spec;
    spec.pocket_radius = 3.0;
    spec.ell_max = 4.0;
    const auto problem = make_blocked_problem(23, spec);
    PlannerConfig cfg = quick_cfg(Variant::RcsB);
    cfg.delta_ell_max = 2.0;
    cfg.cutoff = {1.0, 0.8};
    cfg.d_sim = 0.01;
    cfg.time_budget_s = 120.0;
    const PlanResult basic = plan(problem, cfg);
    cfg.variant = Variant::RcsNr;
    const PlanResult nr = plan(problem, cfg);
    REQUIRE(basic.status == PlanStatus::ExhaustedNoPlan);
    REQUIRE(nr.status == PlanStatus::ExhaustedNoPlan);
    CHECK(nr.stats.nodes_expanded >= basic.stats.nodes_expanded);
}

TEST_CASE("parallel with one thread matches serial output", "[planner]") {
    const auto cp = make_corridor_problem(36, CorridorSpec{});
    PlannerConfig cfg = quick_cfg(Variant::Rcs);
    cfg.cutoff = {0.125, kPi / 32};
    const PlanResult serial = plan(cp.problem, cfg);
    cfg.variant = Variant::RcsPar;
    cfg.thread_count = 1;
    const PlanResult par = plan(cp.problem, cfg);
    REQUIRE(serial.status == par.status);
    auto ja = plan_to_json(serial), jb = plan_to_json(par);
    ja["stats"]["wall_time_s"] = jb["stats"]["wall_time_s"] = 0.0;
    ja["stats"]["time_to_first_solution_s"] = jb["stats"]["time_to_first_solution_s"] = 0.0;
    CHECK(ja.dump() == jb.dump());
}

TEST_CASE("parallel solutions satisfy the same invariants", "[planner]") {
    const auto problem = open_problem({20, -15, 70});
    PlannerConfig cfg = quick_cfg(Variant::RcsPar);
    cfg.thread_count = 4;
    const PlanResult r = plan(problem, cfg);
    REQUIRE(r.status == PlanStatus::Solved);
    CHECK(verify_trajectory(r, problem).all_passed());
}

TEST_CASE("parallel exhaustion on a blocked pocket", "[planner][slow]") {
    BlockedSpec spec;
    spec.pocket_radius = 3.0;
    spec.ell_max = 4.0;
    const auto problem = make_blocked_problem(24, spec);
    PlannerConfig cfg = quick_cfg(Variant::RcsPar);
    cfg.thread_count = 4;
    cfg.delta_ell_max = 2.0;
    cfg.cutoff = {1.0, 0.8};
    cfg.d_sim = 0.01;
    cfg.time_budget_s = 300.0;
    const PlanResult r = plan(problem, cfg);
    CHECK(r.status == PlanStatus::ExhaustedNoPlan);
}

TEST_CASE("plan file round-trip", "[planner]") {
    const auto problem = open_problem({0, 0, 50});
    const PlanResult r = plan(problem, quick_cfg(Variant::Rcs));
    REQUIRE(r.status == PlanStatus::Solved);
    const auto path = std::filesystem::temp_directory_path() / "needleplan_plan_rt.json";
    save_plan(r, path);
    const PlanResult back = load_plan(path);
    CHECK(plan_to_json(back).dump() == plan_to_json(r).dump());
    std::filesystem::remove(path);
}
