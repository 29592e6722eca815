#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "berndesign/core.hpp"
#include "berndesign/designs.hpp"
#include "berndesign/errors.hpp"
#include "berndesign/rng.hpp"

// IPW point estimation, exact conditional variance, ex-post bias, the paired
// variance estimator with its sorting permutation, confidence intervals, and
// finite-n balance diagnostics.

namespace berndesign {

struct EstimateRecord {
    double tau_hat = 0.0;
    double a2 = 0.0;
    double b2 = 0.0;
    double nu2 = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double level = 0.95;
    std::vector<Index> pi;  // pi[k] = unit at (1-based) position k + 1
};

struct DiagnosticsRecord {
    double var_gap_1 = 0.0;
    double var_gap_0 = 0.0;
    double g_gap = 0.0;
    double pair_gap_1 = 0.0;
    double pair_gap_0 = 0.0;
    double adj_gap_1 = 0.0;
    double adj_gap_0 = 0.0;
};

/// (2/n) sum_i (y_i z_i - y_i (1 - z_i)).
inline double ipw_estimate(const std::vector<double>& y,
                           const AssignmentVector& z) {
    require(y.size() == z.z.size(), "ipw_estimate: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i)
        acc += z.z[i] ? y[i] : -y[i];
    return 2.0 * acc / static_cast<double>(y.size());
}

/// Exact Var(tau_hat | X) for the design:
/// (2/n^2) sum (s1_i + s0_i) + (4/n^2) g' Sigma g.
inline double conditional_variance(const OracleVector& g,
                                   const std::vector<double>& s1,
                                   const std::vector<double>& s0,
                                   const DesignSpec& design) {
    const std::size_t n = g.values.size();
    require(s1.size() == n && s0.size() == n,
            "conditional_variance: length mismatch");
    for (std::size_t i = 0; i < n; ++i)
        require(s1[i] >= 0.0 && s0[i] >= 0.0,
                "conditional_variance: variances must be nonnegative");
    double noise = 0.0;
    for (std::size_t i = 0; i < n; ++i) noise += s1[i] + s0[i];
    const double dn = static_cast<double>(n);
    return 2.0 * noise / (dn * dn) +
           4.0 * quadratic_form(g, design) / (dn * dn);
}

/// E[tau_hat | X, Z = z] = (2/n)(sum_{z=1} mu1 - sum_{z=0} mu0).
inline double ex_post_mean(const std::vector<double>& mu1,
                           const std::vector<double>& mu0,
                           const AssignmentVector& z) {
    require(mu1.size() == z.z.size() && mu0.size() == z.z.size(),
            "ex_post_mean: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < mu1.size(); ++i)
        acc += z.z[i] ? mu1[i] : -mu0[i];
    return 2.0 * acc / static_cast<double>(mu1.size());
}

/// The sorting permutation: positions 1..n/2 list S ascending by h (ties by
/// index), positions n/2+1..n list S^c likewise.
inline std::vector<Index> build_pi(const Partition& partition,
                                   const OracleVector& h) {
    require(partition.n == h.n(), "build_pi: length mismatch");
    require(partition.balanced(), "build_pi: partition must have |S| = n/2");
    auto by_h = [&](Index a, Index b) {
        if (h[a] != h[b]) return h[a] < h[b];
        return a < b;
    };
    std::vector<Index> pi = partition.s;
    std::sort(pi.begin(), pi.end(), by_h);
    std::vector<Index> comp = partition.complement();
    std::sort(comp.begin(), comp.end(), by_h);
    pi.insert(pi.end(), comp.begin(), comp.end());
    return pi;
}

struct VarianceEstimate {
    double a2 = 0.0;
    double b2 = 0.0;
    double nu2 = 0.0;
};

/// The paired variance estimator nu^2 = 2 a^2 - (b^2 + tau^2). Requires
/// n = 0 mod 4 so that no adjacent pair (pi(2i-1), pi(2i)) straddles the two
/// halves of the partition. tau^2 is computed from the partition itself: for
/// a two-cluster design tau_hat only changes sign between the two
/// assignments, so its square does not depend on which side was treated.
inline VarianceEstimate variance_estimator(const std::vector<double>& y,
                                           const Partition& partition,
                                           const OracleVector& h) {
    const int n = partition.n;
    require(static_cast<int>(y.size()) == n, "variance_estimator: length mismatch");
    require(partition.balanced(),
            "variance_estimator: partition must have |S| = n/2");
    require(n % 4 == 0,
            "variance_estimator: n must be divisible by 4 so adjacent pairs "
            "stay within one half");
    const std::vector<Index> pi = build_pi(partition, h);
    const int half = n / 2;

    VarianceEstimate out;
    for (int i = 1; i <= half; ++i) {
        const double gap = y[pi[i - 1] - 1] - y[pi[i + half - 1] - 1];
        out.a2 += gap * gap;
    }
    out.a2 *= 2.0 / n;

    double adjacent = 0.0, cross = 0.0;
    for (int i = 1; i <= half; ++i) {
        adjacent += y[pi[2 * i - 1] - 1] * y[pi[2 * i - 2] - 1];
        cross += y[pi[i - 1] - 1] * y[pi[i + half - 1] - 1];
    }
    out.b2 = 4.0 * (adjacent - cross) / n;

    double side_gap = 0.0;  // sum_S y - sum_{S^c} y
    const auto in_s = partition.membership();
    for (int i = 0; i < n; ++i) side_gap += in_s[i] ? y[i] : -y[i];
    const double tau_hat = 2.0 * side_gap / n;
    out.nu2 = 2.0 * out.a2 - (out.b2 + tau_hat * tau_hat);
    return out;
}

/// tau_hat +/- q_{(1+level)/2} sqrt(max(nu2, eps)) / sqrt(n). nu2 may be
/// negative in small samples; the width is floored, the estimate is not.
inline std::pair<double, double> confidence_interval(double tau_hat, double nu2,
                                                     int n, double level) {
    require(n >= 1, "confidence_interval: n must be >= 1");
    require(level > 0.0 && level < 1.0,
            "confidence_interval: level must lie in (0, 1)");
    constexpr double kFloor = 1e-12;
    const double q = rng::normal_quantile_two_sided(level);
    const double width =
        q * std::sqrt(std::max(nu2, kFloor)) / std::sqrt(static_cast<double>(n));
    return {tau_hat - width, tau_hat + width};
}

/// Finite-n values of the asymptotic assumptions, evaluated as diagnostics.
inline DiagnosticsRecord balance_diagnostics(const Partition& partition,
                                             const std::vector<Index>& pi,
                                             const std::vector<double>& mu1,
                                             const std::vector<double>& mu0,
                                             const std::vector<double>& s1,
                                             const std::vector<double>& s0,
                                             const OracleVector& g) {
    const int n = partition.n;
    require(static_cast<int>(mu1.size()) == n &&
                static_cast<int>(mu0.size()) == n &&
                static_cast<int>(s1.size()) == n &&
                static_cast<int>(s0.size()) == n && g.n() == n &&
                static_cast<int>(pi.size()) == n,
            "balance_diagnostics: length mismatch");
    require(partition.balanced(),
            "balance_diagnostics: partition must have |S| = n/2 for pair gaps");
    require(n % 2 == 0, "balance_diagnostics: n must be even");

    DiagnosticsRecord rec;
    const auto in_s = partition.membership();
    double v1 = 0.0, v0 = 0.0, gsum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double sign = in_s[i] ? 1.0 : -1.0;
        v1 += sign * s1[i];
        v0 += sign * s0[i];
        gsum += sign * g.values[i];
    }
    rec.var_gap_1 = std::fabs(v1) / n;
    rec.var_gap_0 = std::fabs(v0) / n;
    rec.g_gap = std::fabs(gsum) / std::sqrt(static_cast<double>(n));

    const int half = n / 2;
    for (int i = 1; i <= half; ++i) {
        const double d1 = mu1[pi[i - 1] - 1] - mu1[pi[i + half - 1] - 1];
        const double d0 = mu0[pi[i - 1] - 1] - mu0[pi[i + half - 1] - 1];
        rec.pair_gap_1 += d1 * d1;
        rec.pair_gap_0 += d0 * d0;
        const double a1 = mu1[pi[2 * i - 1] - 1] - mu1[pi[2 * i - 2] - 1];
        const double a0 = mu0[pi[2 * i - 1] - 1] - mu0[pi[2 * i - 2] - 1];
        rec.adj_gap_1 += a1 * a1;
        rec.adj_gap_0 += a0 * a0;
    }
    rec.pair_gap_1 /= n;
    rec.pair_gap_0 /= n;
    rec.adj_gap_1 /= n;
    rec.adj_gap_0 /= n;
    return rec;
}

}  // namespace berndesign
