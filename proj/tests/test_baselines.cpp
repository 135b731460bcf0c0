#include <catch2/catch_amalgamated.hpp>

#include "needleplan/baselines.hpp"
#include "needleplan/harness.hpp"

using namespace needleplan;

namespace {

ProblemInstance open_problem(Vec3 goal) {
    ProblemInstance p;
    p.env = make_environment({}, {{-150, -150, -150}, {150, 150, 150}}, 1.0, 0.0);
    p.start = Pose::identity();
    p.goal = goal;
    p.tau = 1.0;
    p.ell_max = 100.0;
    p.kappa_max = 0.01;
    return p;
}

}  // namespace

TEST_CASE("rrt solves the open problem within tolerance", "[baselines]") {
    const auto problem = open_problem({20, 5, 70});
    RrtConfig cfg;
    cfg.rng_seed = 9;
    cfg.time_budget_s = 30.0;
    const PlanResult r = plan_rrt(problem, cfg);
    REQUIRE(r.status == PlanStatus::Solved);
    CHECK(r.trajectory->targeting_error_mm <= problem.tau);
    CHECK(verify_trajectory(r, problem).all_passed());
}

TEST_CASE("rrt edges respect curvature and extension bounds", "[baselines]") {
    const auto problem = open_problem({20, 5, 70});
    RrtConfig cfg;
    cfg.rng_seed = 10;
    cfg.max_extend = 12.0;
    cfg.anytime = true;
    cfg.time_budget_s = 1.0;
    const PlanResult r = plan_rrt(problem, cfg);
    if (r.trajectory) {
        for (const auto& m : r.trajectory->primitives) {
            CHECK(m.kappa <= problem.kappa_max + 1e-12);
            // the appended goal arc may exceed max_extend; tree edges may not
        }
        for (std::size_t i = 0; i + 1 < r.trajectory->primitives.size(); ++i)
            CHECK(r.trajectory->primitives[i].delta_ell <= cfg.max_extend + 1e-9);
    }
}

TEST_CASE("rrt is deterministic for a fixed seed", "[baselines]") {
    const auto problem = open_problem({-20, 15, 70});
    RrtConfig cfg;
    cfg.rng_seed = 11;
    cfg.time_budget_s = 30.0;
    const PlanResult a = plan_rrt(problem, cfg);
    const PlanResult b = plan_rrt(problem, cfg);
    REQUIRE(a.status == b.status);
    auto ja = plan_to_json(a), jb = plan_to_json(b);
    ja["stats"]["wall_time_s"] = jb["stats"]["wall_time_s"] = 0.0;
    ja["stats"]["time_to_first_solution_s"] = jb["stats"]["time_to_first_solution_s"] = 0.0;
    CHECK(ja.dump() == jb.dump());
}

TEST_CASE("rrt never claims success on a blocked pocket", "[baselines]") {
    const auto problem = make_blocked_problem(61, BlockedSpec{});
    RrtConfig cfg;
    cfg.rng_seed = 12;
    cfg.time_budget_s = 1.5;
    const PlanResult r = plan_rrt(problem, cfg);
    CHECK(r.status == PlanStatus::TimedOut);
}

TEST_CASE("parallel rrt returns a verifier-passing plan", "[baselines]") {
    const auto problem = open_problem({20, 5, 70});
    RrtConfig cfg;
    cfg.rng_seed = 13;
    cfg.thread_count = 4;
    cfg.time_budget_s = 30.0;
    const PlanResult r = plan_rrt_parallel(problem, cfg);
    REQUIRE(r.status == PlanStatus::Solved);
    CHECK(verify_trajectory(r, problem).all_passed());
}

TEST_CASE("single-res solves the open problem", "[baselines]") {
    const auto problem = open_problem({0, 0, 50});
    PlannerConfig cfg;
    cfg.time_budget_s = 30.0;
    const PlanResult r = plan_single_res(problem, cfg);
    REQUIRE(r.status == PlanStatus::Solved);
    CHECK(verify_trajectory(r, problem).all_passed());
}

TEST_CASE("single-res exhausts a blocked pocket", "[baselines][slow]") {
    BlockedSpec spec;
    spec.pocket_radius = 3.0;
    spec.ell_max = 4.0;
    const auto problem = make_blocked_problem(62, spec);
    PlannerConfig cfg;
    cfg.cutoff = {1.0, 0.8};
    cfg.d_sim = 0.01;
    cfg.time_budget_s = 120.0;
    const PlanResult r = plan_single_res(problem, cfg);
    CHECK(r.status == PlanStatus::ExhaustedNoPlan);
}
