#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "berndesign/core.hpp"
#include "berndesign/designs.hpp"
#include "berndesign/errors.hpp"
#include "berndesign/sim.hpp"
#include "berndesign/solvers.hpp"

// Worst-case analysis of oracle misestimation over an l-infinity ball: the
// adversary moves every coordinate of h by epsilon in the direction that
// inflates g' Sigma g the most. With Sigma entries of magnitude 1/4 the exact
// inflations are (|D| + n eps)^2/4 - D^2/4 for a two-cluster design (at least
// n^2 eps^2 / 4) and (n/2) eps^2 + eps * sum of pair gaps for matched pairs.
// Hybrid designs inflate groupwise, interpolating at order n^{2 - alpha}.

namespace berndesign {

enum class PerturbKind { two_cluster, stratified, hybrid };

struct PerturbationSpec {
    double epsilon = 0.0;
    PerturbKind design_kind = PerturbKind::two_cluster;

    PerturbationSpec() = default;
    PerturbationSpec(double eps, PerturbKind kind)
        : epsilon(eps), design_kind(kind) {
        require(eps >= 0.0, "PerturbationSpec: epsilon must be nonnegative");
    }
};

struct WorstCaseResult {
    OracleVector g;  // the adversarial index vector inside the ball
    double qf_before = 0.0;
    double qf_after = 0.0;
};

/// Applies the explicit worst-case construction to a design built from h.
/// Returns the perturbed vector together with g' Sigma g evaluated at h and
/// at the perturbed vector (both via the exact closed forms).
inline WorstCaseResult worst_case_perturbation(const OracleVector& h,
                                               const PerturbationSpec& spec,
                                               const DesignSpec& design) {
    require(h.n() == design.n(), "worst_case_perturbation: length mismatch");
    const double eps = spec.epsilon;
    const int n = h.n();
    WorstCaseResult out;
    std::vector<double> g = h.values;

    if (spec.design_kind == PerturbKind::two_cluster) {
        const auto* d = std::get_if<TwoClusterDesign>(&design.variant);
        require(d != nullptr,
                "worst_case_perturbation: design is not two-cluster");
        const double diff = signed_sum_difference(h.values, d->partition.s);
        // Push the larger-sum side up; on a tie, S^c goes up.
        const bool s_up = diff > 0.0;
        const auto in_s = d->partition.membership();
        for (int i = 0; i < n; ++i)
            g[i] += (in_s[i] == s_up) ? eps : -eps;
        const double abs_diff = std::fabs(diff);
        out.qf_before = 0.25 * diff * diff;
        out.qf_after = 0.25 * (abs_diff + n * eps) * (abs_diff + n * eps);
    } else if (spec.design_kind == PerturbKind::stratified) {
        const auto* d = std::get_if<StratifiedDesign>(&design.variant);
        require(d != nullptr, "worst_case_perturbation: design is not stratified");
        double gap_sq = 0.0, gap_sum = 0.0;
        for (const auto& [a, b] : d->pairs.pairs) {
            // The member with larger h moves up, the other down; ties widen
            // toward the second member.
            const Index up = (h[a] > h[b]) ? a : b;
            const Index down = (up == a) ? b : a;
            g[up - 1] += eps;
            g[down - 1] -= eps;
            const double gap = std::fabs(h[a] - h[b]);
            gap_sq += gap * gap;
            gap_sum += gap;
        }
        out.qf_before = 0.25 * gap_sq;
        out.qf_after =
            out.qf_before + 0.5 * n * eps * eps + eps * gap_sum;
    } else {
        const auto* d = std::get_if<HybridDesign>(&design.variant);
        require(d != nullptr, "worst_case_perturbation: design is not hybrid");
        out.qf_after = 0.0;
        for (const auto& grp : d->grouping.groups) {
            std::vector<char> in_s(static_cast<std::size_t>(n) + 1, 0);
            for (Index i : grp.s) in_s[i] = 1;
            double diff = 0.0;
            for (Index i : grp.members) diff += in_s[i] ? h[i] : -h[i];
            const bool s_up = diff > 0.0;
            for (Index i : grp.members)
                g[i - 1] += (static_cast<bool>(in_s[i]) == s_up) ? eps : -eps;
            const double abs_diff = std::fabs(diff);
            const double size = static_cast<double>(grp.members.size());
            out.qf_before += 0.25 * diff * diff;
            out.qf_after +=
                0.25 * (abs_diff + size * eps) * (abs_diff + size * eps);
        }
    }
    out.g = OracleVector(std::move(g));
    return out;
}

struct InflationRecord {
    int n = 0;
    std::string design_kind;
    double qf_before = 0.0;
    double qf_after = 0.0;

    double inflation() const { return qf_after - qf_before; }
};

/// Draws h from a DGP at each grid size, builds the two-cluster, stratified,
/// and hybrid designs from it, and applies the worst-case perturbation to
/// each. Deterministic per seed.
inline std::vector<InflationRecord> inflation_scaling_experiment(
    const std::vector<int>& n_grid, double alpha, double epsilon, DGPId dgp_id,
    std::uint64_t seed) {
    require(alpha > 0.0 && alpha < 1.0,
            "inflation_scaling_experiment: alpha must lie in (0, 1)");
    require(epsilon >= 0.0,
            "inflation_scaling_experiment: epsilon must be nonnegative");
    const SolverConfig cfg{24, 0.05, "lexicographically-smallest S"};
    std::vector<InflationRecord> records;
    for (int n : n_grid) {
        require(n >= 2 && n % 2 == 0,
                "inflation_scaling_experiment: grid sizes must be even");
        const std::uint64_t h_seed = rng::derive(
            rng::derive(seed, rng::tag("inflation-n")),
            static_cast<std::uint64_t>(n));
        const DGPSpec dgp{dgp_id, 1.0};
        const OracleVector h = generate_population(dgp, n, h_seed).g;

        const DesignSpec two_cluster =
            DesignSpec::two_cluster(solve_knapsack(h, cfg));
        const DesignSpec stratified =
            DesignSpec::stratified(n, build_matched_pairs(h));
        const DesignSpec hybrid = DesignSpec::hybrid(
            n, build_hybrid(h, alpha, HybridMode::knapsack, cfg));

        const auto record = [&](const char* name, PerturbKind kind,
                                const DesignSpec& design) {
            const WorstCaseResult res =
                worst_case_perturbation(h, {epsilon, kind}, design);
            records.push_back({n, name, res.qf_before, res.qf_after});
        };
        record("two_cluster", PerturbKind::two_cluster, two_cluster);
        record("stratified", PerturbKind::stratified, stratified);
        record("hybrid", PerturbKind::hybrid, hybrid);
    }
    return records;
}

}  // namespace berndesign
