#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "berndesign/designs.hpp"
#include "berndesign/estimation.hpp"
#include "berndesign/rng.hpp"
#include "berndesign/solvers.hpp"

using namespace berndesign;

namespace {

AssignmentVector assign(std::vector<std::uint8_t> z) {
    return AssignmentVector{std::move(z)};
}

}  // namespace

TEST_CASE("ipw estimate: direct arithmetic") {
    CHECK(ipw_estimate({4, 2}, assign({1, 0})) == 2.0);
    CHECK(ipw_estimate({1, 1, 1, 1}, assign({1, 0, 1, 0})) == 0.0);
    CHECK(ipw_estimate({4, 2}, assign({1, 1})) == 6.0);  // no controls
    CHECK_THROWS_AS(ipw_estimate({1.0}, assign({1, 0})), precondition_error);
}

TEST_CASE("conditional variance: direct evaluation of the decomposition") {
    SUBCASE("n = 2, unit variances, zero-difference cluster") {
        const OracleVector g({1, 1});
        const DesignSpec d =
            DesignSpec::two_cluster(Partition::from_oracle(g, {1}));
        CHECK(conditional_variance(g, {1, 1}, {1, 1}, d) ==
              doctest::Approx(2.0).epsilon(1e-14));
    }
    SUBCASE("no variability anywhere gives zero") {
        const OracleVector g({0, 0, 0, 0});
        const DesignSpec d = DesignSpec::iid(4);
        CHECK(conditional_variance(g, {0, 0, 0, 0}, {0, 0, 0, 0}, d) == 0.0);
    }
    SUBCASE("homoscedastic unit noise contributes exactly 4/n") {
        for (int n : {10, 50, 128}) {
            const OracleVector g(std::vector<double>(n, 0.0));
            const std::vector<double> ones(n, 1.0);
            const DesignSpec d = DesignSpec::iid(n);
            CHECK(conditional_variance(g, ones, ones, d) ==
                  doctest::Approx(4.0 / n).epsilon(1e-12));
        }
    }
    SUBCASE("negative variance input is rejected") {
        const OracleVector g({1, 1});
        CHECK_THROWS_AS(
            conditional_variance(g, {-1, 1}, {1, 1}, DesignSpec::iid(2)),
            precondition_error);
    }
}

TEST_CASE("ex-post mean: balanced splits agree under flips") {
    SUBCASE("g-balanced split has equal means both ways") {
        CHECK(ex_post_mean({1, 1}, {0, 0}, assign({1, 0})) == 1.0);
        CHECK(ex_post_mean({1, 1}, {0, 0}, assign({0, 1})) == 1.0);
    }
    SUBCASE("unbalanced split does not") {
        CHECK(ex_post_mean({1, 2}, {0, 0}, assign({1, 0})) == 1.0);
        CHECK(ex_post_mean({1, 2}, {0, 0}, assign({0, 1})) == 2.0);
    }
    SUBCASE("all-zero means vanish for every assignment") {
        for (std::uint8_t a : {0, 1})
            for (std::uint8_t b : {0, 1})
                CHECK(ex_post_mean({0, 0}, {0, 0}, assign({a, b})) == 0.0);
    }
}

TEST_CASE("build_pi sorts each half by h") {
    SUBCASE("worked example") {
        const OracleVector h({3, 1, 4, 2});
        const Partition p = Partition::from_oracle(h, {2, 3});
        CHECK(build_pi(p, h) == std::vector<Index>{2, 3, 4, 1});
    }
    SUBCASE("sorted h with S = first half gives the identity") {
        const OracleVector h({1, 2, 3, 4, 5, 6});
        const Partition p = Partition::from_oracle(h, {1, 2, 3});
        CHECK(build_pi(p, h) == std::vector<Index>{1, 2, 3, 4, 5, 6});
    }
    SUBCASE("all-equal h falls back to index order") {
        const OracleVector h({7, 7, 7, 7});
        const Partition p = Partition::from_oracle(h, {2, 4});
        CHECK(build_pi(p, h) == std::vector<Index>{2, 4, 1, 3});
    }
    SUBCASE("unbalanced partitions are rejected") {
        const OracleVector h({1, 2, 3, 4});
        const Partition p = Partition::from_oracle(h, {1});
        CHECK_THROWS_AS(build_pi(p, h), precondition_error);
    }
}

TEST_CASE("variance estimator: frozen arithmetic at n = 4") {
    const OracleVector h({1, 2, 3, 4});
    const Partition p = Partition::from_oracle(h, {1, 2});
    const std::vector<double> y{1, 2, 3, 4};
    // pi is the identity; a^2 = (2/4)(4 + 4) = 4, b^2 = 14 - 11 = 3,
    // tau = -2, nu^2 = 8 - (3 + 4) = 1.
    const VarianceEstimate ve = variance_estimator(y, p, h);
    CHECK(ve.a2 == 4.0);
    CHECK(ve.b2 == 3.0);
    CHECK(ve.nu2 == 1.0);
}

TEST_CASE("variance estimator: degenerate cases") {
    const OracleVector h({1, 2, 3, 4});
    const Partition p = Partition::from_oracle(h, {1, 2});
    SUBCASE("constant outcomes") {
        const VarianceEstimate ve = variance_estimator({5, 5, 5, 5}, p, h);
        CHECK(ve.a2 == 0.0);
        CHECK(ve.b2 == 0.0);
        CHECK(ve.nu2 == 0.0);
    }
    SUBCASE("perfectly matched halves zero out a^2") {
        const VarianceEstimate ve = variance_estimator({2, 9, 2, 9}, p, h);
        CHECK(ve.a2 == 0.0);
    }
    SUBCASE("n = 2 mod 4 is rejected") {
        const OracleVector h6({1, 2, 3, 4, 5, 6});
        const Partition p6 = Partition::from_oracle(h6, {1, 2, 3});
        CHECK_THROWS_AS(variance_estimator({1, 2, 3, 4, 5, 6}, p6, h6),
                        precondition_error);
    }
}

TEST_CASE("variance estimator is invariant under relabeling") {
    // Apply the same permutation to units everywhere: y, h, and S.
    const std::uint64_t key = 4242;
    const int n = 16;
    std::vector<double> y(n), h(n);
    for (int i = 0; i < n; ++i) {
        y[i] = rng::normal_at(key, 0, i) * 3.0;
        h[i] = rng::normal_at(key, 1, i);
    }
    const Partition p =
        solve_balanced(OracleVector(h), SolverConfig{24, 0.01, ""});
    const VarianceEstimate base = variance_estimator(y, p, OracleVector(h));

    std::vector<Index> relabel(n);
    std::iota(relabel.begin(), relabel.end(), 1);
    for (int i = n - 1; i > 0; --i)
        std::swap(relabel[i], relabel[rng::u64_at(key, 2, i) % (i + 1)]);
    std::vector<double> y2(n), h2(n);
    for (int i = 0; i < n; ++i) {
        y2[relabel[i] - 1] = y[i];
        h2[relabel[i] - 1] = h[i];
    }
    std::vector<Index> s2;
    for (Index i : p.s) s2.push_back(relabel[i - 1]);
    const Partition p2 = Partition::from_oracle(OracleVector(h2), s2);
    const VarianceEstimate moved = variance_estimator(y2, p2, OracleVector(h2));
    CHECK(moved.a2 == doctest::Approx(base.a2).epsilon(1e-12));
    CHECK(moved.b2 == doctest::Approx(base.b2).epsilon(1e-12));
    CHECK(moved.nu2 == doctest::Approx(base.nu2).epsilon(1e-12));
}

TEST_CASE("confidence interval: frozen quantile arithmetic") {
    SUBCASE("tau = 0, nu2 = 4, n = 4, level 0.95") {
        const auto [lo, hi] = confidence_interval(0.0, 4.0, 4, 0.95);
        CHECK(lo == doctest::Approx(-1.959963985).epsilon(1e-6));
        CHECK(hi == doctest::Approx(1.959963985).epsilon(1e-6));
    }
    SUBCASE("zero nu2 collapses to the floor width") {
        const auto [lo, hi] = confidence_interval(2.5, 0.0, 100, 0.9);
        CHECK(lo == doctest::Approx(2.5).epsilon(1e-7));
        CHECK(hi == doctest::Approx(2.5).epsilon(1e-7));
        CHECK(lo <= 2.5);
        CHECK(hi >= 2.5);
    }
    SUBCASE("tau = 1, nu2 = 1, n = 100") {
        const auto [lo, hi] = confidence_interval(1.0, 1.0, 100, 0.95);
        CHECK(lo == doctest::Approx(0.804).epsilon(1e-3));
        CHECK(hi == doctest::Approx(1.196).epsilon(1e-3));
    }
    SUBCASE("negative nu2 is floored, not rejected") {
        const auto [lo, hi] = confidence_interval(0.0, -5.0, 16, 0.95);
        CHECK(lo <= 0.0);
        CHECK(hi >= 0.0);
        CHECK(hi - lo < 1e-5);
    }
}

TEST_CASE("balance diagnostics: direct evaluation") {
    const OracleVector g({1, 1, 2, 2});
    const Partition p = Partition::from_oracle(g, {1, 3});  // diff = 0
    const std::vector<Index> pi = build_pi(p, g);
    SUBCASE("identical variance multisets cancel") {
        // S = {1,3} draws {3,4} from each variance vector, as does S^c.
        const DiagnosticsRecord rec = balance_diagnostics(
            p, pi, {1, 2, 1, 2}, {1, 2, 1, 2}, {3, 4, 4, 3}, {4, 3, 3, 4}, g);
        CHECK(rec.var_gap_1 == 0.0);
        CHECK(rec.var_gap_0 == 0.0);
        CHECK(rec.g_gap == 0.0);
    }
    SUBCASE("pair gaps on the worked example") {
        // pi = (1, 3, 2, 4); mu1 = [1,2,1,2] pairs positions (1,3) and (3->2?):
        // cross-half gaps: mu1[pi(1)] - mu1[pi(3)] = 1 - 2, and
        // mu1[pi(2)] - mu1[pi(4)] = 1 - 2; pair_gap_1 = (1 + 1)/4 = 0.5.
        const DiagnosticsRecord rec = balance_diagnostics(
            p, pi, {1, 2, 1, 2}, {0, 0, 0, 0}, {1, 1, 1, 1}, {1, 1, 1, 1}, g);
        CHECK(pi == std::vector<Index>{1, 3, 2, 4});
        CHECK(rec.pair_gap_1 == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(rec.pair_gap_0 == 0.0);
    }
    SUBCASE("assumption-3 example with the identity permutation") {
        const OracleVector h({1, 2, 3, 4});
        const Partition q = Partition::from_oracle(h, {1, 2});
        const std::vector<Index> id = build_pi(q, h);
        CHECK(id == std::vector<Index>{1, 2, 3, 4});
        const DiagnosticsRecord rec = balance_diagnostics(
            q, id, {1, 2, 1, 2}, {0, 0, 0, 0}, {1, 1, 1, 1}, {1, 1, 1, 1}, h);
        CHECK(rec.pair_gap_1 == 0.0);  // (1-1)^2 + (2-2)^2 over n
    }
}

TEST_CASE("exact unbiasedness over the enumerated support") {
    // Noiseless outcomes equal to the arm means: the weight-averaged IPW
    // estimate must equal tau_n exactly for every design with few bits.
    const int n = 6;
    std::vector<double> mu1{4, 2, 6, 1, 3, 5};
    std::vector<double> mu0{1, 0, 2, 1, 2, 0};
    double tau_n = 0.0;
    for (int i = 0; i < n; ++i) tau_n += mu1[i] - mu0[i];
    tau_n /= n;

    std::vector<double> gv(n);
    for (int i = 0; i < n; ++i) gv[i] = mu1[i] + mu0[i];
    const OracleVector g(gv);

    std::vector<DesignSpec> designs;
    designs.push_back(DesignSpec::iid(n));
    designs.push_back(DesignSpec::two_cluster(solve_knapsack(g)));
    designs.push_back(DesignSpec::two_cluster(solve_balanced(g)));
    designs.push_back(DesignSpec::stratified(n, build_matched_pairs(g)));
    designs.push_back(DesignSpec::hybrid(
        n, build_hybrid(g, 0.5, HybridMode::balanced)));

    for (const auto& d : designs) {
        double avg = 0.0;
        for (const auto& atom : mixture_representation(d)) {
            std::vector<double> y(n);
            for (int i = 0; i < n; ++i) y[i] = atom.z[i] ? mu1[i] : mu0[i];
            avg += atom.weight * ipw_estimate(y, AssignmentVector{atom.z});
        }
        CHECK(avg == doctest::Approx(tau_n).epsilon(1e-13));
    }
}

TEST_CASE("law of total variance: ex-post spread equals the quadratic form") {
    // Var(E[tau_hat | X, Z]) computed from the support must match
    // (4/n^2) g' Sigma g from the closed form.
    const int n = 8;
    const std::uint64_t key = 99321;
    std::vector<double> mu1(n), mu0(n), gv(n);
    for (int i = 0; i < n; ++i) {
        mu1[i] = 2.0 * rng::normal_at(key, 0, i) + 1.0;
        mu0[i] = rng::normal_at(key, 1, i);
        gv[i] = mu1[i] + mu0[i];
    }
    const OracleVector g(gv);

    std::vector<DesignSpec> designs;
    designs.push_back(DesignSpec::iid(n));
    designs.push_back(DesignSpec::two_cluster(solve_balanced(g)));
    designs.push_back(DesignSpec::stratified(n, build_matched_pairs(g)));
    designs.push_back(DesignSpec::hybrid(
        n, build_hybrid(g, 0.5, HybridMode::knapsack)));

    for (const auto& d : designs) {
        double mean = 0.0, second = 0.0;
        for (const auto& atom : mixture_representation(d)) {
            const double m = ex_post_mean(mu1, mu0, AssignmentVector{atom.z});
            mean += atom.weight * m;
            second += atom.weight * m * m;
        }
        const double var_expost = second - mean * mean;
        const double expected =
            4.0 * quadratic_form(g, d) / (static_cast<double>(n) * n);
        CHECK(var_expost == doctest::Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("zero-difference splits have zero ex-post bias") {
    // mu1 = g/2 + t and mu0 = g/2 - t for arbitrary t keeps g = mu1 + mu0.
    for (int trial = 0; trial < 30; ++trial) {
        const std::uint64_t key = rng::derive(1441, trial);
        const int half = 2 + static_cast<int>(rng::u64_at(key, 0, 0) % 6);
        const int n = 2 * half;
        std::vector<double> gv(n), t(n);
        for (int i = 0; i < half; ++i) {
            // Dyadic grid values keep all sums exact, so the duplicated
            // halves admit a split with diff identically zero.
            const double v =
                std::round(rng::normal_at(key, 1, i) * 32.0) / 8.0;
            gv[i] = v;
            gv[i + half] = v;
        }
        for (int i = 0; i < n; ++i) t[i] = rng::normal_at(key, 2, i);
        const OracleVector g(gv);
        const Partition p = solve_balanced(g);
        REQUIRE(p.diff == 0.0);

        std::vector<double> mu1(n), mu0(n);
        double tau_n = 0.0;
        for (int i = 0; i < n; ++i) {
            mu1[i] = gv[i] / 2 + t[i];
            mu0[i] = gv[i] / 2 - t[i];
            tau_n += 2 * t[i];
        }
        tau_n /= n;

        AssignmentVector z;
        z.z.assign(n, 0);
        for (Index i : p.s) z.z[i - 1] = 1;
        AssignmentVector flipped;
        flipped.z.assign(n, 0);
        for (int i = 0; i < n; ++i) flipped.z[i] = 1 - z.z[i];

        const double m1 = ex_post_mean(mu1, mu0, z);
        const double m2 = ex_post_mean(mu1, mu0, flipped);
        CHECK(m1 == doctest::Approx(m2).epsilon(1e-10));
        CHECK(m1 == doctest::Approx(tau_n).epsilon(1e-10));
    }
}
