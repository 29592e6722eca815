#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "berndesign/core.hpp"
#include "berndesign/designs.hpp"
#include "berndesign/errors.hpp"
#include "berndesign/estimation.hpp"
#include "berndesign/rng.hpp"
#include "berndesign/solvers.hpp"

// Data-generating processes, proxy construction, and the Monte Carlo engine.
// The protocol conditions on X: one Population per (dgp, n, seed), regenerated
// only when the seed changes, with fresh assignment and outcome noise per
// replicate. Replicate r draws from key (seed, "rep", r), so results never
// depend on how many replicates run after it.

namespace berndesign {

enum class DGPId { main, appx_uniform, appx_gauss_cubic, appx_poisson };

struct DGPSpec {
    DGPId id = DGPId::main;
    double sigma_y = 1.0;  // conditional SD of Y around its mean
};

inline DGPId parse_dgp(const std::string& name) {
    if (name == "main") return DGPId::main;
    if (name == "appx_uniform") return DGPId::appx_uniform;
    if (name == "appx_gauss_cubic") return DGPId::appx_gauss_cubic;
    if (name == "appx_poisson") return DGPId::appx_poisson;
    throw precondition_error("unknown dgp id: " + name);
}

inline std::string dgp_name(DGPId id) {
    switch (id) {
        case DGPId::main: return "main";
        case DGPId::appx_uniform: return "appx_uniform";
        case DGPId::appx_gauss_cubic: return "appx_gauss_cubic";
        default: return "appx_poisson";
    }
}

struct ConditionalMeans {
    double mu1 = 0.0;
    double mu0 = 0.0;
};

/// The conditional mean functions of each DGP, exposed so tests can inject
/// covariate values directly. Only the main DGP uses a second covariate.
inline ConditionalMeans conditional_means(DGPId id, double x1, double x2 = 0.0) {
    switch (id) {
        case DGPId::main: {
            const double shared = std::pow(std::fabs(x2), 1.5);
            return {x1 * x1 - 3.0 * shared, -2.0 * shared};
        }
        case DGPId::appx_uniform:
            return {x1 + 0.05 * std::pow(x1, 1.05), x1};
        case DGPId::appx_gauss_cubic: {
            const double cube = x1 * x1 * x1;
            return {1.2 * cube, cube};
        }
        default: {
            const double sq = x1 * x1;
            return {sq + 0.2 * x1 * x1 * x1, sq};
        }
    }
}

/// A simulated cohort: covariates, conditional means and variances, the
/// derived oracle vector, and the conditional average treatment effect.
struct Population {
    int dim = 1;
    std::vector<double> x;  // n x dim, row-major
    std::vector<double> mu1, mu0;
    OracleVector g;  // mu1 + mu0 entrywise
    std::vector<double> s1, s0;
    double tau_n = 0.0;
};

namespace detail {

constexpr std::uint64_t kCovariateStream = rng::tag("pop-x");
constexpr std::uint64_t kProxyStream = rng::tag("proxy-noise");

}  // namespace detail

inline Population generate_population(const DGPSpec& dgp, int n,
                                      std::uint64_t seed) {
    require(n >= 1, "generate_population: n must be >= 1");
    require(dgp.sigma_y > 0.0, "generate_population: sigma_y must be positive");
    Population pop;
    pop.dim = (dgp.id == DGPId::main) ? 2 : 1;
    pop.x.resize(static_cast<std::size_t>(n) * pop.dim);
    pop.mu1.resize(n);
    pop.mu0.resize(n);
    pop.s1.assign(n, dgp.sigma_y * dgp.sigma_y);
    pop.s0.assign(n, dgp.sigma_y * dgp.sigma_y);

    std::vector<double> gvals(n);
    double tau_sum = 0.0;
    for (int i = 0; i < n; ++i) {
        double x1 = 0.0, x2 = 0.0;
        switch (dgp.id) {
            case DGPId::main: {
                // N(0, [[10, 5], [5, 10]]) via its Cholesky factor.
                const double z1 = rng::normal_at(seed, detail::kCovariateStream,
                                                 2ull * i);
                const double z2 = rng::normal_at(seed, detail::kCovariateStream,
                                                 2ull * i + 1);
                const double root10 = std::sqrt(10.0);
                x1 = root10 * z1;
                x2 = (5.0 / root10) * z1 + std::sqrt(7.5) * z2;
                pop.x[2 * i] = x1;
                pop.x[2 * i + 1] = x2;
                break;
            }
            case DGPId::appx_uniform:
                x1 = rng::uniform_at(seed, detail::kCovariateStream, i);
                pop.x[i] = x1;
                break;
            case DGPId::appx_gauss_cubic:
                x1 = rng::normal_at(seed, detail::kCovariateStream, i);
                pop.x[i] = x1;
                break;
            default:
                x1 = static_cast<double>(
                    rng::poisson_at(20.0, seed, detail::kCovariateStream, i));
                pop.x[i] = x1;
                break;
        }
        const ConditionalMeans m = conditional_means(dgp.id, x1, x2);
        pop.mu1[i] = m.mu1;
        pop.mu0[i] = m.mu0;
        gvals[i] = m.mu1 + m.mu0;
        tau_sum += m.mu1 - m.mu0;
    }
    pop.g = OracleVector(std::move(gvals));
    pop.tau_n = tau_sum / n;
    return pop;
}

struct ProxySpec {
    enum class Kind { exact, gaussian_perturb, mu0_proxy };
    Kind kind = Kind::exact;
    double sigma_g2 = 0.0;  // noise variance for gaussian_perturb

    static ProxySpec exact() { return {Kind::exact, 0.0}; }
    static ProxySpec gaussian(double sigma_g2) {
        require(sigma_g2 >= 0.0, "ProxySpec: sigma_g2 must be nonnegative");
        return {Kind::gaussian_perturb, sigma_g2};
    }
    static ProxySpec mu0() { return {Kind::mu0_proxy, 0.0}; }
};

inline OracleVector make_proxy(const Population& pop, const ProxySpec& proxy,
                               std::uint64_t seed) {
    switch (proxy.kind) {
        case ProxySpec::Kind::exact:
            return pop.g;
        case ProxySpec::Kind::mu0_proxy:
            return OracleVector(pop.mu0);
        default: {
            const double sd = std::sqrt(proxy.sigma_g2);
            std::vector<double> h = pop.g.values;
            for (std::size_t i = 0; i < h.size(); ++i)
                h[i] += sd * rng::normal_at(seed, detail::kProxyStream, i);
            return OracleVector(std::move(h));
        }
    }
}

/// A named design construction. Builders run in list order and see every
/// design built before them, which lets the standard suite chain warm starts.
struct DesignBuilder {
    std::string name;
    std::function<DesignSpec(
        const OracleVector& h,
        const std::vector<std::pair<std::string, DesignSpec>>& built)>
        build;
};

/// Builders for the designs of the simulation studies, in dependency order:
/// stratified, hybrid_sib, hybrid_bern, sib, bern (plus iid on request).
/// Warm starts are chained so the quadratic-form ordering
///   bern <= sib <= hybrid_sib <= stratified and bern <= hybrid_bern <= hybrid_sib
/// holds as a deterministic guarantee.
inline std::vector<DesignBuilder> standard_design_builders(
    double alpha, const SolverConfig& cfg, bool include_iid = false) {
    auto find = [](const std::vector<std::pair<std::string, DesignSpec>>& built,
                   const std::string& name) -> const DesignSpec* {
        for (const auto& [nm, d] : built)
            if (nm == name) return &d;
        return nullptr;
    };

    std::vector<DesignBuilder> out;
    if (include_iid) {
        out.push_back({"iid", [](const OracleVector& h, const auto&) {
                           return DesignSpec::iid(h.n());
                       }});
    }
    out.push_back({"stratified", [](const OracleVector& h, const auto&) {
                       return DesignSpec::stratified(h.n(),
                                                     build_matched_pairs(h));
                   }});
    out.push_back({"hybrid_sib", [alpha, cfg](const OracleVector& h,
                                              const auto&) {
                       return DesignSpec::hybrid(
                           h.n(),
                           build_hybrid(h, alpha, HybridMode::balanced, cfg));
                   }});
    out.push_back(
        {"hybrid_bern", [alpha, cfg, find](const OracleVector& h,
                                           const auto& built) {
             const DesignSpec* sib_hybrid = find(built, "hybrid_sib");
             const HybridGrouping* warm =
                 sib_hybrid ? &std::get<HybridDesign>(sib_hybrid->variant).grouping
                            : nullptr;
             return DesignSpec::hybrid(
                 h.n(), build_hybrid(h, alpha, HybridMode::knapsack, cfg, warm));
         }});
    out.push_back({"sib", [cfg, find](const OracleVector& h, const auto& built) {
                       std::vector<Partition> warm;
                       if (const DesignSpec* hs = find(built, "hybrid_sib"))
                           warm.push_back(sign_balanced_union(
                               h, std::get<HybridDesign>(hs->variant).grouping));
                       return DesignSpec::two_cluster(
                           solve_balanced(h, cfg, warm));
                   }});
    out.push_back({"bern", [cfg, find](const OracleVector& h, const auto& built) {
                       std::vector<Partition> warm;
                       if (const DesignSpec* s = find(built, "sib"))
                           warm.push_back(
                               std::get<TwoClusterDesign>(s->variant).partition);
                       if (const DesignSpec* hb = find(built, "hybrid_bern"))
                           warm.push_back(sign_balanced_union(
                               h, std::get<HybridDesign>(hb->variant).grouping));
                       return DesignSpec::two_cluster(
                           solve_knapsack(h, cfg, warm));
                   }});
    return out;
}

struct SimResult {
    std::string design_kind;
    int n = 0;
    int replicates = 0;
    double sample_variance = 0.0;
    double mean_estimate = 0.0;
    std::optional<double> coverage;  // vs tau_n, when CIs were computed
    double closed_form_variance = 0.0;
    // Fourth central moment of tau_hat across replicates; gives the standard
    // error of the sample variance, sqrt((m4 - var^2) / R).
    double fourth_central_moment = 0.0;
};

namespace detail {

constexpr std::uint64_t kRepStream = rng::tag("rep");
constexpr std::uint64_t kAssignStream = rng::tag("rep-z");
constexpr std::uint64_t kNoiseStream = rng::tag("rep-y");

}  // namespace detail

/// Runs the fixed-X protocol: one population, each design built once from the
/// proxy, `replicates` draws of (Z, Y) per design. The closed-form variance is
/// evaluated with the true g, which is the quantity the sample variance
/// estimates. Coverage (when requested) is of tau_n and requires balanced
/// two-cluster designs with n divisible by 4.
inline std::vector<SimResult> run_monte_carlo(
    const DGPSpec& dgp, int n, const std::vector<DesignBuilder>& builders,
    const ProxySpec& proxy, int replicates, std::uint64_t seed,
    bool compute_ci = false, double ci_level = 0.95) {
    require(replicates >= 2, "run_monte_carlo: replicates must be >= 2");
    const Population pop = generate_population(dgp, n, seed);
    const OracleVector h = make_proxy(pop, proxy, seed);

    std::vector<std::pair<std::string, DesignSpec>> built;
    built.reserve(builders.size());
    for (const auto& builder : builders)
        built.emplace_back(builder.name, builder.build(h, built));

    std::vector<SimResult> results;
    results.reserve(built.size());
    std::vector<double> y(static_cast<std::size_t>(n));
    for (std::size_t d = 0; d < built.size(); ++d) {
        const auto& [name, design] = built[d];
        double sum = 0.0, sum_sq = 0.0, sum_cb = 0.0, sum_qu = 0.0;
        int covered = 0;
        for (int r = 0; r < replicates; ++r) {
            const std::uint64_t rep_seed =
                rng::derive(rng::derive(seed, detail::kRepStream),
                            static_cast<std::uint64_t>(r));
            const AssignmentVector z = sample_assignment(
                design, rng::derive(rng::derive(rep_seed, detail::kAssignStream),
                                    d));
            const std::uint64_t noise_seed =
                rng::derive(rng::derive(rep_seed, detail::kNoiseStream), d);
            for (int i = 0; i < n; ++i) {
                const double mean = z.z[i] ? pop.mu1[i] : pop.mu0[i];
                y[i] = mean + dgp.sigma_y * rng::normal_at(noise_seed, 0, i);
            }
            const double tau_hat = ipw_estimate(y, z);
            sum += tau_hat;
            sum_sq += tau_hat * tau_hat;
            sum_cb += tau_hat * tau_hat * tau_hat;
            sum_qu += tau_hat * tau_hat * tau_hat * tau_hat;
            if (compute_ci) {
                const auto* two_cluster =
                    std::get_if<TwoClusterDesign>(&design.variant);
                require(two_cluster != nullptr,
                        "run_monte_carlo: CI computation needs a two-cluster "
                        "design");
                const VarianceEstimate ve =
                    variance_estimator(y, two_cluster->partition, h);
                const auto [lo, hi] =
                    confidence_interval(tau_hat, ve.nu2, n, ci_level);
                if (lo <= pop.tau_n && pop.tau_n <= hi) ++covered;
            }
        }
        SimResult res;
        res.design_kind = name;
        res.n = n;
        res.replicates = replicates;
        res.mean_estimate = sum / replicates;
        res.sample_variance =
            (sum_sq - sum * sum / replicates) / (replicates - 1);
        const double m = res.mean_estimate;
        res.fourth_central_moment =
            sum_qu / replicates - 4.0 * m * sum_cb / replicates +
            6.0 * m * m * sum_sq / replicates - 3.0 * m * m * m * m;
        if (compute_ci)
            res.coverage = static_cast<double>(covered) / replicates;
        res.closed_form_variance =
            conditional_variance(pop.g, pop.s1, pop.s0, design);
        results.push_back(std::move(res));
    }
    return results;
}

enum class FigureId { fig1, fig2_3, appxB, appxB_proxy };
enum class FigureScale { desk, full };

inline FigureId parse_figure(const std::string& name) {
    if (name == "fig1") return FigureId::fig1;
    if (name == "fig2_3") return FigureId::fig2_3;
    if (name == "appxB") return FigureId::appxB;
    if (name == "appxB_proxy") return FigureId::appxB_proxy;
    throw precondition_error("unknown figure id: " + name);
}

/// One long-format output row of a figure protocol.
struct FigureRow {
    std::string setting;
    int n = 0;
    std::string design;
    int perturbation_id = 0;  // 0 for unperturbed protocols
    double sample_variance = 0.0;
};

/// Reproduces the simulation studies. Desk scale trims the grids so the whole
/// suite stays laptop-sized; full scale follows the published protocols.
inline std::vector<FigureRow> reproduce_figure(FigureId figure,
                                               FigureScale scale,
                                               std::uint64_t seed) {
    const double alpha = 0.5;
    const SolverConfig cfg{24, 0.05, "lexicographically-smallest S"};
    const std::vector<int> full_grid{50, 100, 150, 200, 250, 500, 750, 1000};
    const std::vector<int> desk_grid{50, 100, 250};
    std::vector<FigureRow> rows;

    auto emit = [&rows](const std::string& setting, int perturbation_id,
                        const std::vector<SimResult>& results,
                        const std::vector<std::string>& order) {
        for (const std::string& name : order)
            for (const SimResult& res : results)
                if (res.design_kind == name)
                    rows.push_back({setting, res.n, name, perturbation_id,
                                    res.sample_variance});
    };
    const std::vector<std::string> suite_order{"bern", "hybrid_bern", "sib",
                                               "hybrid_sib", "stratified"};

    if (figure == FigureId::fig1 || figure == FigureId::appxB ||
        figure == FigureId::appxB_proxy) {
        const auto& grid =
            (scale == FigureScale::desk) ? desk_grid : full_grid;
        const int reps = 10000;
        std::vector<DGPSpec> dgps;
        if (figure == FigureId::fig1) {
            dgps.push_back({DGPId::main, 1.0});
        } else {
            dgps.push_back({DGPId::appx_uniform, 1.0});
            dgps.push_back({DGPId::appx_gauss_cubic, 1.0});
            dgps.push_back({DGPId::appx_poisson, 1.0});
        }
        const ProxySpec proxy = (figure == FigureId::appxB_proxy)
                                    ? ProxySpec::mu0()
                                    : ProxySpec::exact();
        const auto builders = standard_design_builders(alpha, cfg);
        for (const DGPSpec& dgp : dgps) {
            for (int n : grid) {
                const std::uint64_t run_seed = rng::derive(
                    rng::derive(rng::derive(seed, rng::tag("figure-cell")),
                                rng::tag(dgp_name(dgp.id).c_str())),
                    static_cast<std::uint64_t>(n));
                emit(dgp_name(dgp.id), 0,
                     run_monte_carlo(dgp, n, builders, proxy, reps, run_seed),
                     suite_order);
            }
        }
        return rows;
    }

    // fig2_3: distribution of sample variances across random perturbations
    // h = g + N(0, sigma_g^2).
    const int perturbations = (scale == FigureScale::desk) ? 20 : 100;
    const int reps = (scale == FigureScale::desk) ? 500 : 1000;
    const std::vector<double> sigma_g2{25.0, 100.0, 400.0};
    const std::vector<int> perturb_grid{50, 250, 1000};
    const std::vector<std::string> perturb_order{"bern", "hybrid_bern",
                                                 "stratified"};
    const auto builders = standard_design_builders(alpha, cfg);
    const DGPSpec dgp{DGPId::main, 1.0};
    for (double s2 : sigma_g2) {
        const std::string setting =
            "sigma" + std::to_string(static_cast<int>(s2));
        for (int n : perturb_grid) {
            for (int p = 1; p <= perturbations; ++p) {
                const std::uint64_t run_seed = rng::derive(
                    rng::derive(rng::derive(rng::derive(seed,
                                                        rng::tag("perturb")),
                                            static_cast<std::uint64_t>(s2)),
                                static_cast<std::uint64_t>(n)),
                    static_cast<std::uint64_t>(p));
                emit(setting, p,
                     run_monte_carlo(dgp, n, builders,
                                     ProxySpec::gaussian(s2), reps, run_seed),
                     perturb_order);
            }
        }
    }
    return rows;
}

}  // namespace berndesign
