#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "berndesign/rng.hpp"
#include "berndesign/sim.hpp"

using namespace berndesign;

TEST_CASE("conditional means: injected covariate values") {
    SUBCASE("main at X = (1, 0)") {
        const ConditionalMeans m = conditional_means(DGPId::main, 1.0, 0.0);
        CHECK(m.mu1 == 1.0);
        CHECK(m.mu0 == 0.0);
    }
    SUBCASE("cubic DGP at zero") {
        const ConditionalMeans m =
            conditional_means(DGPId::appx_gauss_cubic, 0.0);
        CHECK(m.mu1 == 0.0);
        CHECK(m.mu0 == 0.0);
    }
    SUBCASE("poisson DGP at X = 2") {
        const ConditionalMeans m = conditional_means(DGPId::appx_poisson, 2.0);
        CHECK(m.mu0 == 4.0);
        CHECK(m.mu1 == doctest::Approx(5.6).epsilon(1e-15));
        CHECK(m.mu1 + m.mu0 == doctest::Approx(9.6).epsilon(1e-15));
    }
}

TEST_CASE("population: g = mu1 + mu0 and tau_n is their mean gap") {
    for (DGPId id : {DGPId::main, DGPId::appx_uniform, DGPId::appx_gauss_cubic,
                     DGPId::appx_poisson}) {
        const Population pop = generate_population({id, 1.0}, 40, 2021);
        double tau = 0.0;
        for (int i = 0; i < 40; ++i) {
            CHECK(pop.g.values[i] == pop.mu1[i] + pop.mu0[i]);
            CHECK(pop.s1[i] == 1.0);
            CHECK(pop.s0[i] == 1.0);
            tau += pop.mu1[i] - pop.mu0[i];
        }
        CHECK(pop.tau_n == doctest::Approx(tau / 40).epsilon(1e-12));
    }
}

TEST_CASE("population generation is deterministic and seed-sensitive") {
    const DGPSpec dgp{DGPId::main, 1.0};
    const Population a = generate_population(dgp, 25, 7);
    const Population b = generate_population(dgp, 25, 7);
    const Population c = generate_population(dgp, 25, 8);
    CHECK(a.g.values == b.g.values);
    CHECK(a.x == b.x);
    CHECK(a.g.values != c.g.values);
}

TEST_CASE("main covariates match the target covariance at Monte Carlo scale") {
    const int n = 200000;
    const Population pop = generate_population({DGPId::main, 1.0}, n, 31);
    double m1 = 0, m2 = 0, v1 = 0, v2 = 0, cross = 0;
    for (int i = 0; i < n; ++i) {
        m1 += pop.x[2 * i];
        m2 += pop.x[2 * i + 1];
    }
    m1 /= n;
    m2 /= n;
    for (int i = 0; i < n; ++i) {
        const double a = pop.x[2 * i] - m1;
        const double b = pop.x[2 * i + 1] - m2;
        v1 += a * a;
        v2 += b * b;
        cross += a * b;
    }
    v1 /= n;
    v2 /= n;
    cross /= n;
    CHECK(m1 == doctest::Approx(0.0).epsilon(0.05));
    CHECK(v1 == doctest::Approx(10.0).epsilon(0.02));
    CHECK(v2 == doctest::Approx(10.0).epsilon(0.02));
    CHECK(cross == doctest::Approx(5.0).epsilon(0.03));
}

TEST_CASE("poisson sampler: mean within 4 standard errors over 1e6 draws") {
    const int n = 1000000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i)
        sum += static_cast<double>(rng::poisson_at(20.0, 99, 1, i));
    const double mean = sum / n;
    const double se = std::sqrt(20.0 / n);
    CHECK(std::fabs(mean - 20.0) <= 4.0 * se);
}

TEST_CASE("proxies") {
    const Population pop = generate_population({DGPId::appx_gauss_cubic, 1.0},
                                               30, 555);
    SUBCASE("exact returns g itself") {
        CHECK(make_proxy(pop, ProxySpec::exact(), 1).values == pop.g.values);
    }
    SUBCASE("zero-variance gaussian noise is exact") {
        CHECK(make_proxy(pop, ProxySpec::gaussian(0.0), 1).values ==
              pop.g.values);
    }
    SUBCASE("gaussian noise is deterministic per seed") {
        const OracleVector a = make_proxy(pop, ProxySpec::gaussian(25.0), 11);
        const OracleVector b = make_proxy(pop, ProxySpec::gaussian(25.0), 11);
        const OracleVector c = make_proxy(pop, ProxySpec::gaussian(25.0), 12);
        CHECK(a.values == b.values);
        CHECK(a.values != c.values);
    }
    SUBCASE("mu0 proxy is a positive rescaling of g for the cubic DGP") {
        const OracleVector h = make_proxy(pop, ProxySpec::mu0(), 1);
        for (int i = 0; i < 30; ++i)
            CHECK(h.values[i] ==
                  doctest::Approx(pop.g.values[i] / 2.2).epsilon(1e-12));
    }
}

TEST_CASE("run_monte_carlo matches the closed form on a small study") {
    const SolverConfig cfg{24, 0.02, "lexicographically-smallest S"};
    const auto builders = standard_design_builders(0.5, cfg);
    const auto results = run_monte_carlo({DGPId::main, 1.0}, 20, builders,
                                         ProxySpec::exact(), 40000, 424242);
    REQUIRE(results.size() == 5);
    for (const auto& res : results) {
        CHECK(res.replicates == 40000);
        // The sample variance sits within five of its own standard errors of
        // the closed-form conditional variance (SE from the fourth moment).
        const double se = std::sqrt(
            std::max(0.0, res.fourth_central_moment -
                              res.sample_variance * res.sample_variance) /
            res.replicates);
        CHECK(std::fabs(res.sample_variance - res.closed_form_variance) <=
              5.0 * se);
        CHECK(res.closed_form_variance >= 4.0 / 20 - 1e-12);
    }
}

TEST_CASE("run_monte_carlo is replicate-count stable") {
    // The population and the per-replicate draws are keyed independently, so
    // a longer run extends a shorter one without changing shared replicates.
    const SolverConfig cfg{24, 0.02, "lexicographically-smallest S"};
    std::vector<DesignBuilder> builders{
        standard_design_builders(0.5, cfg)[0]};  // stratified only
    const auto short_run = run_monte_carlo({DGPId::appx_uniform, 1.0}, 12,
                                           builders, ProxySpec::exact(), 50,
                                           10101);
    const auto long_run = run_monte_carlo({DGPId::appx_uniform, 1.0}, 12,
                                          builders, ProxySpec::exact(), 500,
                                          10101);
    CHECK(short_run[0].closed_form_variance ==
          long_run[0].closed_form_variance);
    CHECK(short_run[0].n == long_run[0].n);
}

TEST_CASE("run_monte_carlo computes coverage for balanced clusters") {
    const SolverConfig cfg{24, 0.02, "lexicographically-smallest S"};
    std::vector<DesignBuilder> builders;
    builders.push_back({"sib", [cfg](const OracleVector& h, const auto&) {
                            return DesignSpec::two_cluster(
                                solve_balanced(h, cfg));
                        }});
    const auto results =
        run_monte_carlo({DGPId::main, 1.0}, 16, builders, ProxySpec::exact(),
                        200, 77, /*compute_ci=*/true);
    REQUIRE(results.size() == 1);
    REQUIRE(results[0].coverage.has_value());
    CHECK(*results[0].coverage >= 0.0);
    CHECK(*results[0].coverage <= 1.0);
}

TEST_CASE("design suite survives heavily tied index values") {
    // Poisson covariates produce many exactly tied g entries; rounding at the
    // knapsack boundary must never leave a group split empty or unbalanced.
    const SolverConfig cfg{24, 0.05, "lexicographically-smallest S"};
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const Population pop =
            generate_population({DGPId::appx_poisson, 1.0}, 50, seed);
        const DesignSuite suite = build_design_suite(pop.g, 0.5, cfg);
        CHECK(suite.sib.balanced());
        CHECK(suite.bern.diff <= 0.0);
        for (const auto& grp : suite.hybrid_sib.groups)
            CHECK(grp.s.size() * 2 == grp.members.size());
    }
}

TEST_CASE("a zero-variance perturbation collapses to the exact-proxy run") {
    const SolverConfig cfg{24, 0.02, "lexicographically-smallest S"};
    const auto builders = standard_design_builders(0.5, cfg);
    const auto exact = run_monte_carlo({DGPId::main, 1.0}, 16, builders,
                                       ProxySpec::exact(), 300, 999);
    const auto zero_noise = run_monte_carlo({DGPId::main, 1.0}, 16, builders,
                                            ProxySpec::gaussian(0.0), 300, 999);
    REQUIRE(exact.size() == zero_noise.size());
    for (std::size_t i = 0; i < exact.size(); ++i) {
        CHECK(exact[i].sample_variance == zero_noise[i].sample_variance);
        CHECK(exact[i].mean_estimate == zero_noise[i].mean_estimate);
        CHECK(exact[i].closed_form_variance ==
              zero_noise[i].closed_form_variance);
    }
}

TEST_CASE("figure protocols emit the documented grids") {
    // Row counts only; values are exercised by the acceptance suite.
    const auto rows = reproduce_figure(FigureId::fig1, FigureScale::desk, 5);
    CHECK(rows.size() == 15);  // 5 designs x 3 sample sizes
    int n50 = 0;
    for (const auto& row : rows) {
        CHECK(row.setting == "main");
        CHECK(row.perturbation_id == 0);
        if (row.n == 50) ++n50;
        CHECK(row.sample_variance > 0.0);
    }
    CHECK(n50 == 5);
}

TEST_CASE("figure output is deterministic per seed") {
    const auto a = reproduce_figure(FigureId::fig1, FigureScale::desk, 9);
    const auto b = reproduce_figure(FigureId::fig1, FigureScale::desk, 9);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].design == b[i].design);
        CHECK(a[i].sample_variance == b[i].sample_variance);
    }
}
