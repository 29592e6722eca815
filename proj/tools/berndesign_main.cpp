// berndesign: construct variance-optimal correlated Bernoulli designs from an
// index vector, sample assignments, estimate treatment effects with the IPW
// estimator, reproduce the simulation studies, and run the worst-case
// robustness analysis. All randomness is counter-based: the same seed always
// produces byte-identical output files.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "berndesign/berndesign.hpp"
#include "berndesign/csv.hpp"
#include "berndesign/json_io.hpp"

namespace {

using namespace berndesign;

// Documented default seed; never wall-clock.
constexpr std::uint64_t kDefaultSeed = 0x0B3D0001ULL;

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::string item;
    std::stringstream ss(text);
    while (std::getline(ss, item, ',')) {
        item = csv::trim(item);
        if (item.empty()) continue;
        try {
            out.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw precondition_error("cannot parse integer list entry: '" +
                                     item + "'");
        }
    }
    require(!out.empty(), "empty integer list");
    return out;
}

struct SolveArgs {
    std::string input, output;
    std::string method;
    std::string hybrid_mode = "knapsack";
    double alpha = 0.5;
    int exact_limit = 24;
    double time_budget = 1.0;
};

int run_solve(const SolveArgs& args) {
    const OracleVector g(csv::read_column(args.input, "g"));
    const SolverConfig cfg{args.exact_limit, args.time_budget,
                           "lexicographically-smallest S"};
    DesignSpec design = DesignSpec::iid(g.n());
    std::string summary;
    if (args.method == "knapsack") {
        Partition p = solve_knapsack(g, cfg);
        summary = "diff " + csv::format_double(p.diff) + " |diff| " +
                  csv::format_double(std::fabs(p.diff));
        design = DesignSpec::two_cluster(std::move(p));
    } else if (args.method == "balanced") {
        Partition p = solve_balanced(g, cfg);
        summary = "diff " + csv::format_double(p.diff) + " |diff| " +
                  csv::format_double(std::fabs(p.diff));
        design = DesignSpec::two_cluster(std::move(p));
    } else if (args.method == "greedy-pairs") {
        Partition p = solve_balanced_greedy_pairs(g);
        summary = "diff " + csv::format_double(p.diff) + " |diff| " +
                  csv::format_double(std::fabs(p.diff));
        design = DesignSpec::two_cluster(std::move(p));
    } else if (args.method == "pairs") {
        MatchedPairs mp = build_matched_pairs(g);
        summary = std::to_string(mp.pairs.size()) + " matched pairs";
        design = DesignSpec::stratified(g.n(), std::move(mp));
    } else if (args.method == "hybrid") {
        const HybridMode mode = (args.hybrid_mode == "balanced")
                                    ? HybridMode::balanced
                                    : HybridMode::knapsack;
        HybridGrouping hg = build_hybrid(g, args.alpha, mode, cfg);
        double sum_sq = 0.0;
        for (const auto& grp : hg.groups) sum_sq += grp.diff * grp.diff;
        summary = std::to_string(hg.group_count) +
                  " groups, sum diff^2 = " + csv::format_double(sum_sq);
        design = DesignSpec::hybrid(g.n(), std::move(hg));
    } else {
        throw precondition_error("unknown method: " + args.method);
    }
    write_design_file(args.output, design);
    std::cout << args.method << ": " << summary << "\n";
    return 0;
}

struct SampleArgs {
    std::string design_path, output;
    std::uint64_t seed = kDefaultSeed;
    int reps = 1;
};

int run_sample(const SampleArgs& args) {
    const DesignSpec design = read_design_file(args.design_path);
    const auto violations = validate_design(design);
    if (!violations.empty())
        throw precondition_error("invalid design: " + violations.front());
    require(args.reps >= 1, "sample: --reps must be >= 1");
    const int n = design.n();
    csv::Writer out(args.output);
    std::vector<std::string> header(n);
    for (int i = 1; i <= n; ++i) header[i - 1] = "z_" + std::to_string(i);
    out.header(header);
    for (int r = 0; r < args.reps; ++r) {
        const std::uint64_t rep_seed = rng::derive(
            rng::derive(args.seed, rng::tag("rep")), static_cast<std::uint64_t>(r));
        const AssignmentVector z = sample_assignment(design, rep_seed);
        std::vector<std::string> fields(n);
        for (int i = 0; i < n; ++i) fields[i] = z.z[i] ? "1" : "0";
        out.line(fields);
    }
    return 0;
}

struct EstimateArgs {
    std::string y_path, z_path, design_path, h_path, output;
    double level = 0.95;
};

int run_estimate(const EstimateArgs& args) {
    const std::vector<double> y = csv::read_column(args.y_path, "y");
    const OracleVector h(csv::read_column(args.h_path, "h"));
    const DesignSpec design = read_design_file(args.design_path);
    const auto* two_cluster = std::get_if<TwoClusterDesign>(&design.variant);
    require(two_cluster != nullptr,
            "estimate needs a two_cluster design (balanced split)");
    const Partition& partition = two_cluster->partition;
    require(static_cast<int>(y.size()) == partition.n &&
                h.n() == partition.n,
            "estimate: y, h, and design disagree on n");

    const csv::Table z_table = csv::read_table(args.z_path);
    require(z_table.rows.size() == 1,
            "estimate expects exactly one assignment row in z.csv");
    require(static_cast<int>(z_table.header.size()) == partition.n,
            "estimate: z.csv has the wrong number of columns");
    AssignmentVector z;
    z.z.reserve(z_table.header.size());
    for (const auto& field : z_table.rows[0]) {
        const double v = csv::parse_double(field);
        require(v == 0.0 || v == 1.0, "assignment entries must be 0 or 1");
        z.z.push_back(static_cast<std::uint8_t>(v));
    }

    EstimateRecord rec;
    rec.level = args.level;
    rec.tau_hat = ipw_estimate(y, z);
    const VarianceEstimate ve = variance_estimator(y, partition, h);
    rec.a2 = ve.a2;
    rec.b2 = ve.b2;
    rec.nu2 = ve.nu2;
    const auto [lo, hi] =
        confidence_interval(rec.tau_hat, rec.nu2, partition.n, args.level);
    rec.ci_low = lo;
    rec.ci_high = hi;
    rec.pi = build_pi(partition, h);

    nlohmann::json j;
    j["tau_hat"] = rec.tau_hat;
    j["a2"] = rec.a2;
    j["b2"] = rec.b2;
    j["nu2"] = rec.nu2;
    j["ci_low"] = rec.ci_low;
    j["ci_high"] = rec.ci_high;
    j["level"] = rec.level;
    j["pi"] = rec.pi;
    std::ofstream out(args.output);
    if (!out) throw io_error("cannot write " + args.output);
    out << j.dump(2) << '\n';
    return 0;
}

struct SimulateArgs {
    std::string figure, config_path, output;
    std::string scale = "desk";
    std::uint64_t seed = kDefaultSeed;
};

int run_simulate_config(const SimulateArgs& args) {
    std::ifstream in(args.config_path);
    if (!in) throw io_error("cannot open " + args.config_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw io_error(args.config_path + ": invalid JSON (" + e.what() + ")");
    }

    DGPSpec dgp;
    dgp.id = parse_dgp(j.value("dgp", std::string("main")));
    dgp.sigma_y = j.value("sigma_y", 1.0);
    const int n = j.at("n").get<int>();
    const int replicates = j.at("replicates").get<int>();
    const double alpha = j.value("alpha", 0.5);
    const bool compute_ci = j.value("compute_ci", false);
    const double level = j.value("level", 0.95);
    const std::uint64_t seed = j.value("seed", args.seed);
    const SolverConfig cfg{j.value("exact_limit", 24),
                           j.value("time_budget", 0.05),
                           "lexicographically-smallest S"};

    ProxySpec proxy = ProxySpec::exact();
    if (j.contains("proxy")) {
        const auto& pj = j.at("proxy");
        const std::string kind = pj.value("kind", std::string("exact"));
        if (kind == "exact") {
            proxy = ProxySpec::exact();
        } else if (kind == "gaussian_perturb") {
            proxy = ProxySpec::gaussian(pj.value("sigma_g2", 0.0));
        } else if (kind == "mu0_proxy") {
            proxy = ProxySpec::mu0();
        } else {
            throw precondition_error("unknown proxy kind: " + kind);
        }
    }

    std::vector<std::string> requested =
        j.value("designs", std::vector<std::string>{"bern", "hybrid_bern",
                                                    "sib", "hybrid_sib",
                                                    "stratified"});
    const auto all = standard_design_builders(alpha, cfg, /*include_iid=*/true);
    std::vector<DesignBuilder> builders;
    for (const auto& builder : all) {
        for (const auto& name : requested)
            if (name == builder.name) {
                builders.push_back(builder);
                break;
            }
    }
    require(builders.size() == requested.size(),
            "config lists an unknown design name");

    const auto results = run_monte_carlo(dgp, n, builders, proxy, replicates,
                                         seed, compute_ci, level);
    csv::Writer out(args.output);
    out.header({"design", "n", "replicates", "sample_variance",
                "mean_estimate", "coverage", "closed_form_variance"});
    for (const auto& name : requested) {
        for (const auto& res : results) {
            if (res.design_kind != name) continue;
            out.line({res.design_kind, std::to_string(res.n),
                      std::to_string(res.replicates),
                      csv::format_double(res.sample_variance),
                      csv::format_double(res.mean_estimate),
                      res.coverage ? csv::format_double(*res.coverage) : "",
                      csv::format_double(res.closed_form_variance)});
        }
    }
    return 0;
}

int run_simulate(const SimulateArgs& args) {
    require(args.figure.empty() != args.config_path.empty(),
            "simulate needs exactly one of --figure or --config");
    if (!args.config_path.empty()) return run_simulate_config(args);

    const FigureId figure = parse_figure(args.figure);
    const FigureScale scale = (args.scale == "full") ? FigureScale::full
                                                     : FigureScale::desk;
    const auto rows = reproduce_figure(figure, scale, args.seed);
    csv::Writer out(args.output);
    out.header({"setting", "n", "design", "perturbation_id", "sample_variance"});
    for (const auto& row : rows)
        out.line({row.setting, std::to_string(row.n), row.design,
                  std::to_string(row.perturbation_id),
                  csv::format_double(row.sample_variance)});
    return 0;
}

struct RobustnessArgs {
    std::string n_grid_text = "64,128,256,512,1024,2048,4096";
    double alpha = 0.5;
    double epsilon = 1.0;
    std::string dgp = "main";
    std::uint64_t seed = kDefaultSeed;
    std::string output;
};

int run_robustness(const RobustnessArgs& args) {
    const std::vector<int> grid = parse_int_list(args.n_grid_text);
    const auto records = inflation_scaling_experiment(
        grid, args.alpha, args.epsilon, parse_dgp(args.dgp), args.seed);
    csv::Writer out(args.output);
    out.header({"n", "design", "qf_before", "qf_after", "inflation"});
    for (const auto& rec : records)
        out.line({std::to_string(rec.n), rec.design_kind,
                  csv::format_double(rec.qf_before),
                  csv::format_double(rec.qf_after),
                  csv::format_double(rec.inflation())});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "berndesign: variance-optimal correlated Bernoulli "
        "treatment-assignment designs"};
    app.require_subcommand(1);

    SolveArgs solve_args;
    auto* solve = app.add_subcommand(
        "solve", "Build a design from an index vector CSV (column 'g')");
    solve->add_option("--input", solve_args.input, "input g.csv")->required();
    solve->add_option("--method", solve_args.method,
                      "knapsack|balanced|greedy-pairs|pairs|hybrid")
        ->required();
    solve->add_option("--alpha", solve_args.alpha,
                      "hybrid interpolation exponent in (0,1)");
    solve->add_option("--hybrid-mode", solve_args.hybrid_mode,
                      "per-group problem: knapsack|balanced");
    solve->add_option("--exact-limit", solve_args.exact_limit,
                      "max n for exhaustive search");
    solve->add_option("--time-budget", solve_args.time_budget,
                      "branch-and-bound budget in seconds");
    solve->add_option("--output", solve_args.output, "output design.json")
        ->required();

    SampleArgs sample_args;
    auto* sample = app.add_subcommand(
        "sample", "Draw assignment replicates from a design");
    sample->add_option("--design", sample_args.design_path, "design.json")
        ->required();
    sample->add_option("--seed", sample_args.seed,
                       "64-bit seed (default 0x0B3D0001)");
    sample->add_option("--reps", sample_args.reps, "number of replicates");
    sample->add_option("--output", sample_args.output, "output z.csv")
        ->required();

    EstimateArgs estimate_args;
    auto* estimate = app.add_subcommand(
        "estimate",
        "IPW estimate with paired variance estimator and confidence interval");
    // --h is the documented flag for the index vector, so help keeps only
    // its long form here.
    estimate->set_help_flag("--help", "print help and exit");
    estimate->add_option("--y", estimate_args.y_path, "outcomes y.csv")
        ->required();
    estimate->add_option("--z", estimate_args.z_path, "one assignment row")
        ->required();
    estimate->add_option("--design", estimate_args.design_path,
                         "balanced two_cluster design.json")
        ->required();
    estimate->add_option("--h", estimate_args.h_path, "index vector h.csv")
        ->required();
    estimate->add_option("--level", estimate_args.level, "confidence level");
    estimate->add_option("--output", estimate_args.output, "output est.json")
        ->required();

    SimulateArgs simulate_args;
    auto* simulate =
        app.add_subcommand("simulate", "Reproduce the simulation studies");
    simulate->add_option("--figure", simulate_args.figure,
                         "fig1|fig2_3|appxB|appxB_proxy");
    simulate->add_option("--config", simulate_args.config_path,
                         "JSON config with dgp/n/designs/proxy/replicates");
    simulate->add_option("--scale", simulate_args.scale, "desk|full");
    simulate->add_option("--seed", simulate_args.seed,
                         "64-bit seed (default 0x0B3D0001)");
    simulate->add_option("--output", simulate_args.output, "output CSV")
        ->required();

    RobustnessArgs robustness_args;
    auto* robustness = app.add_subcommand(
        "robustness", "Worst-case inflation scaling experiment");
    robustness->add_option("--n-grid", robustness_args.n_grid_text,
                           "comma-separated even sizes");
    robustness->add_option("--alpha", robustness_args.alpha,
                           "hybrid exponent in (0,1)");
    robustness->add_option("--epsilon", robustness_args.epsilon,
                           "l-infinity perturbation radius");
    robustness->add_option("--dgp", robustness_args.dgp,
                           "main|appx_uniform|appx_gauss_cubic|appx_poisson");
    robustness->add_option("--seed", robustness_args.seed,
                           "64-bit seed (default 0x0B3D0001)");
    robustness->add_option("--output", robustness_args.output, "output CSV")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return 64;
    }

    try {
        if (solve->parsed()) return run_solve(solve_args);
        if (sample->parsed()) return run_sample(sample_args);
        if (estimate->parsed()) return run_estimate(estimate_args);
        if (simulate->parsed()) return run_simulate(simulate_args);
        if (robustness->parsed()) return run_robustness(robustness_args);
    } catch (const precondition_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 64;
}
