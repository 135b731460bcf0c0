// Command-line front end: planning, benchmarking, scenario generation,
// plan verification and the appendix property suites.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "needleplan/harness.hpp"

using namespace needleplan;
namespace fs = std::filesystem;

namespace {

struct PlanArgs {
    std::string scenario;
    std::string planner = "rcs";
    int threads = 1;
    double time_budget = 100.0;
    double delta_ell_max = 20.0;
    double delta_theta_max = kPi / 2;
    double cutoff_ell = 0.125;
    double cutoff_theta = 0.157;
    double d_sim = 5.5e-5;
    double alpha = 0.05;
    double collision_step = 0.5;
    double goal_bias = 0.05;
    std::uint64_t seed = 0;
    bool anytime = false;
    std::string out;
};

PlannerConfig to_planner_config(const PlanArgs& a) {
    PlannerConfig cfg;
    cfg.delta_ell_max = a.delta_ell_max;
    cfg.delta_theta_max = a.delta_theta_max;
    cfg.cutoff = {a.cutoff_ell, a.cutoff_theta};
    cfg.d_sim = a.d_sim;
    cfg.alpha = a.alpha;
    cfg.collision_step = a.collision_step;
    cfg.thread_count = a.threads;
    cfg.time_budget_s = a.time_budget;
    cfg.rng_seed = a.seed;
    cfg.anytime = a.anytime;
    return cfg;
}

int run_plan(const PlanArgs& a) {
    const ProblemInstance problem = load_scenario(a.scenario);
    PlanResult result;
    if (a.planner == "rrt" || a.planner == "rrt-par") {
        RrtConfig cfg;
        cfg.goal_bias = a.goal_bias;
        cfg.rng_seed = a.seed;
        cfg.time_budget_s = a.time_budget;
        cfg.collision_step = a.collision_step;
        cfg.alpha = a.alpha;
        cfg.anytime = a.anytime;
        cfg.thread_count = a.threads;
        result = (a.planner == "rrt-par" || a.threads > 1) ? plan_rrt_parallel(problem, cfg)
                                                           : plan_rrt(problem, cfg);
    } else {
        PlannerConfig cfg = to_planner_config(a);
        if (a.planner == "rcs") cfg.variant = Variant::Rcs;
        else if (a.planner == "rcs-b") cfg.variant = Variant::RcsB;
        else if (a.planner == "rcs-nr") cfg.variant = Variant::RcsNr;
        else if (a.planner == "rcs-par") cfg.variant = Variant::RcsPar;
        else if (a.planner == "single-res") cfg.variant = Variant::Rcs;
        else {
            std::cerr << "unknown planner: " << a.planner << "\n";
            return 2;
        }
        if (a.planner == "rcs" && a.threads > 1) cfg.variant = Variant::RcsPar;
        result = a.planner == "single-res" ? plan_single_res(problem, cfg)
                                           : plan(problem, cfg);
    }

    std::cout << "status: " << status_name(result.status) << "\n";
    if (result.trajectory) {
        std::cout << "length_mm: " << result.trajectory->length_mm << "\n"
                  << "targeting_error_mm: " << result.trajectory->targeting_error_mm << "\n"
                  << "primitives: " << result.trajectory->primitives.size() << "\n"
                  << "cost: "
                  << cost(*result.trajectory, problem.ell_max, problem.tau, problem.goal)
                  << "\n";
    }
    std::cout << "nodes_expanded: " << result.stats.nodes_expanded << "\n"
              << "nodes_pruned_similar: " << result.stats.nodes_pruned_similar << "\n"
              << "nodes_pruned_reachability: " << result.stats.nodes_pruned_reachability << "\n"
              << "wall_time_s: " << result.stats.wall_time_s << "\n"
              << "time_to_first_solution_s: " << result.stats.time_to_first_solution_s << "\n";
    if (!a.out.empty()) save_plan(result, a.out);
    return result.status == PlanStatus::Solved ? 0 : 1;
}

int run_bench(const std::string& suite_dir, const std::string& planner_list,
              double time_budget, int threads, const std::string& out_csv) {
    std::vector<ProblemInstance> suite;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(suite_dir))
        if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) suite.push_back(load_scenario(f));
    if (suite.empty()) {
        std::cerr << "no scenarios in " << suite_dir << "\n";
        return 2;
    }

    std::vector<std::string> names;
    std::stringstream ss(planner_list);
    for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) names.push_back(item);

    PlannerConfig base;
    base.time_budget_s = time_budget;
    base.thread_count = threads;
    RrtConfig rrt;
    rrt.time_budget_s = time_budget;
    rrt.thread_count = threads;
    const auto planners = make_planners(names, base, rrt);

    long done = 0;
    const long total = static_cast<long>(suite.size() * planners.size());
    const auto records = run_benchmark(suite, planners, [&](const BenchRecord& r) {
        ++done;
        std::cout << "[" << done << "/" << total << "] " << r.case_id << " " << r.planner
                  << " " << status_name(r.status) << " ttfs=" << r.time_to_first_solution_s
                  << "s\n";
    });

    save_bench_csv(records, out_csv);
    std::vector<double> grid;
    for (double t = 1e-3; t <= time_budget * 1.0001; t *= std::pow(10.0, 0.25))
        grid.push_back(t);
    const auto curve = success_curve(records, grid);
    const fs::path curve_path = fs::path(out_csv).replace_extension(".curve.csv");
    {
        std::ofstream out(curve_path);
        out << "planner,time_s,success_rate\n";
        for (const auto& [planner, fractions] : curve.fraction)
            for (std::size_t i = 0; i < fractions.size(); ++i)
                out << planner << ',' << curve.times[i] << ',' << fractions[i] << '\n';
    }
    std::cout << "\n" << summarize_benchmark(records, "rcs-par") << "\n"
              << "records: " << out_csv << "\nsuccess curve: " << curve_path << "\n";
    return 0;
}

int run_gen(std::uint64_t seed, int n_vessels, double box_size, double spacing,
            double radius_min, double radius_max, const std::string& out) {
    SyntheticSpec spec;
    spec.n_vessels = n_vessels;
    spec.box_size = box_size;
    spec.point_spacing = spacing;
    spec.vessel_radius_min = radius_min;
    spec.vessel_radius_max = radius_max;
    const auto env = generate_synthetic_scenario(seed, spec);

    ProblemInstance p;
    try {
        p = generate_test_cases(env, 1, 1, seed + 1, 0.01, 100.0, 1.0).at(0);
    } catch (const ExhaustionError&) {
        // degenerate workspace (all pairs direct-connect): take any free pair
        Rng rng(seed + 1);
        const Aabb inner = env->bounds.inflated(-4.0);
        p.env = env;
        do {
            p.start.position = {rng.uniform(inner.min.x, inner.max.x),
                                rng.uniform(inner.min.y, inner.max.y),
                                rng.uniform(inner.min.z, inner.max.z)};
        } while (!point_free(*env, p.start.position));
        p.start.orientation = heading_to_orientation(rng.unit_vector(), 0.0);
        do {
            p.goal = {rng.uniform(inner.min.x, inner.max.x),
                      rng.uniform(inner.min.y, inner.max.y),
                      rng.uniform(inner.min.z, inner.max.z)};
        } while (!point_free(*env, p.goal) || !goal_reachable(p.start, p.goal, 0.01, 1.0));
    }
    p.name = fs::path(out).stem().string();
    const fs::path out_path(out);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    save_scenario(p, out_path, out_path.stem().string() + "_points.txt");
    std::cout << "scenario: " << out << " (" << env->obstacle_points.size()
              << " obstacle points)\n";
    return 0;
}

int run_cases(const std::string& scenario, int n_starts, int goals_per_start,
              std::uint64_t seed, const std::string& out_dir) {
    const ProblemInstance base = load_scenario(scenario);
    const auto cases = generate_test_cases(base.env, n_starts, goals_per_start, seed,
                                           base.kappa_max, base.ell_max, base.tau);
    fs::create_directories(out_dir);
    save_point_file(base.env->obstacle_points, fs::path(out_dir) / "obstacles.txt");
    int i = 0;
    for (auto c : cases) {
        char name[32];
        std::snprintf(name, sizeof(name), "case_%03d.json", i);
        c.name = fs::path(name).stem().string();
        // write by hand to reference the shared point file
        nlohmann::json j;
        ProblemInstance copy = c;
        save_scenario(copy, fs::path(out_dir) / name, "obstacles.txt");
        ++i;
    }
    std::cout << "wrote " << cases.size() << " cases to " << out_dir << "\n";
    return 0;
}

int run_verify(const std::string& plan_path, const std::string& scenario_path) {
    const ProblemInstance problem = load_scenario(scenario_path);
    const PlanResult result = load_plan(plan_path);
    const VerifyReport rep = verify_trajectory(result, problem);
    for (const auto& c : rep.checks)
        std::cout << (c.passed ? "[PASS] " : "[FAIL] ") << c.name
                  << (c.detail.empty() ? "" : " (" + c.detail + ")") << "\n";
    std::cout << (rep.all_passed() ? "plan valid\n" : "plan INVALID\n");
    return rep.all_passed() ? 0 : 1;
}

int run_check_appendix() {
    bool ok = true;
    for (const auto& r : run_appendix_checks()) {
        std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << "\n";
        ok = ok && r.passed;
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Resolution-complete steerable-needle motion planning"};
    app.require_subcommand(1);

    PlanArgs pa;
    auto* plan_cmd = app.add_subcommand("plan", "plan a single scenario");
    plan_cmd->add_option("--scenario", pa.scenario)->required();
    plan_cmd->add_option("--planner", pa.planner,
                         "rcs|rcs-b|rcs-nr|rcs-par|rrt|rrt-par|single-res");
    plan_cmd->add_option("--threads", pa.threads);
    plan_cmd->add_option("--time-budget", pa.time_budget);
    plan_cmd->add_option("--delta-ell-max", pa.delta_ell_max);
    plan_cmd->add_option("--delta-theta-max", pa.delta_theta_max);
    plan_cmd->add_option("--cutoff-ell", pa.cutoff_ell);
    plan_cmd->add_option("--cutoff-theta", pa.cutoff_theta);
    plan_cmd->add_option("--d-sim", pa.d_sim);
    plan_cmd->add_option("--alpha", pa.alpha);
    plan_cmd->add_option("--collision-step", pa.collision_step);
    plan_cmd->add_option("--goal-bias", pa.goal_bias);
    plan_cmd->add_option("--seed", pa.seed);
    plan_cmd->add_flag("--anytime", pa.anytime);
    plan_cmd->add_option("--out", pa.out);

    std::string suite_dir, planner_list = "rcs,rrt", out_csv = "bench.csv";
    double bench_budget = 100.0;
    int bench_threads = 8;
    auto* bench_cmd = app.add_subcommand("bench", "benchmark planners over a suite");
    bench_cmd->add_option("--suite", suite_dir)->required();
    bench_cmd->add_option("--planners", planner_list);
    bench_cmd->add_option("--time-budget", bench_budget);
    bench_cmd->add_option("--threads", bench_threads);
    bench_cmd->add_option("--out", out_csv);

    std::uint64_t gen_seed = 0;
    int n_vessels = 8;
    double box_size = 100.0, gen_spacing = 1.0, radius_min = 2.0, radius_max = 6.0;
    std::string gen_out = "scenario.json";
    auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic scenario");
    gen_cmd->add_option("--seed", gen_seed);
    gen_cmd->add_option("--n-vessels", n_vessels);
    gen_cmd->add_option("--box-size", box_size);
    gen_cmd->add_option("--point-spacing", gen_spacing);
    gen_cmd->add_option("--vessel-radius-min", radius_min);
    gen_cmd->add_option("--vessel-radius-max", radius_max);
    gen_cmd->add_option("--out", gen_out);

    std::string cases_scenario, cases_out = "cases";
    int n_starts = 50, goals_per_start = 10;
    std::uint64_t cases_seed = 0;
    auto* cases_cmd = app.add_subcommand("cases", "sample test cases from a scenario");
    cases_cmd->add_option("--scenario", cases_scenario)->required();
    cases_cmd->add_option("--n-starts", n_starts);
    cases_cmd->add_option("--goals-per-start", goals_per_start);
    cases_cmd->add_option("--seed", cases_seed);
    cases_cmd->add_option("--out", cases_out);

    std::string verify_plan, verify_scenario;
    auto* verify_cmd = app.add_subcommand("verify", "re-validate a plan against a scenario");
    verify_cmd->add_option("--plan", verify_plan)->required();
    verify_cmd->add_option("--scenario", verify_scenario)->required();

    auto* check_cmd = app.add_subcommand("check-appendix",
                                         "run the kinematics, duty-cycling, action-distance "
                                         "and d_sim bound suites");

    CLI11_PARSE(app, argc, argv);

    try {
        if (plan_cmd->parsed()) return run_plan(pa);
        if (bench_cmd->parsed())
            return run_bench(suite_dir, planner_list, bench_budget, bench_threads, out_csv);
        if (gen_cmd->parsed())
            return run_gen(gen_seed, n_vessels, box_size, gen_spacing, radius_min, radius_max,
                           gen_out);
        if (cases_cmd->parsed())
            return run_cases(cases_scenario, n_starts, goals_per_start, cases_seed, cases_out);
        if (verify_cmd->parsed()) return run_verify(verify_plan, verify_scenario);
        if (check_cmd->parsed()) return run_check_appendix();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
