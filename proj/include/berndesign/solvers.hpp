#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "berndesign/core.hpp"
#include "berndesign/errors.hpp"

// Partition solvers. Weights are real-valued oracle entries, so integer
// dynamic programming is out; exact solves use depth-first enumeration up to
// cfg.exact_limit and complete Karmarkar-Karp branch-and-bound on differencing
// beyond it. Among equally optimal subsets the lexicographically smallest S
// wins, and unconstrained/balanced solutions are always oriented so that
// diff = sum_S g - sum_{S^c} g <= 0.
//
// The time budget is converted to a deterministic node budget so that repeated
// runs with the same config explore exactly the same tree and return identical
// results.

namespace berndesign {

struct SolverConfig {
    int exact_limit = 24;      // max n for exhaustive / complete search
    double time_budget = 1.0;  // seconds of branch-and-bound, as a node budget
    std::string tie_break = "lexicographically-smallest S";
};

enum class HybridMode { knapsack, balanced };

namespace detail {

inline void check_config(const SolverConfig& cfg) {
    require(cfg.exact_limit >= 1, "SolverConfig: exact_limit must be >= 1");
    require(cfg.time_budget > 0.0, "SolverConfig: time_budget must be > 0");
    require(cfg.tie_break.empty() ||
                cfg.tie_break == "lexicographically-smallest S",
            "SolverConfig: unsupported tie_break rule");
}

inline std::uint64_t node_budget(const SolverConfig& cfg, int n) {
    const double per_node = static_cast<double>(std::max(64, n));
    const double nodes = cfg.time_budget * 4.0e8 / per_node;
    const std::uint64_t floor_nodes = 4ULL * static_cast<std::uint64_t>(n) + 64;
    return std::max(floor_nodes, static_cast<std::uint64_t>(nodes));
}

inline bool lex_less(const std::vector<Index>& a, const std::vector<Index>& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

/// Indices 1..n sorted ascending by (value, index).
inline std::vector<Index> sorted_order(const std::vector<double>& values) {
    std::vector<Index> order(values.size());
    std::iota(order.begin(), order.end(), 1);
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
        if (values[a - 1] != values[b - 1]) return values[a - 1] < values[b - 1];
        return a < b;
    });
    return order;
}

/// Tracks the best (sum-difference, side set) seen so far. Candidates are
/// compared on |diff| computed canonically from the side set; ties go to the
/// lexicographically smaller sorted set after orienting diff <= 0.
class Incumbent {
public:
    explicit Incumbent(const std::vector<double>& values) : values_(&values) {}

    void offer(std::vector<Index> s) {
        std::sort(s.begin(), s.end());
        double d = signed_sum_difference(*values_, s);
        if (d > 0.0) {  // orient to the feasible side of the knapsack constraint
            s = Partition(static_cast<int>(values_->size()), std::move(s), d)
                    .complement();
            d = signed_sum_difference(*values_, s);
        } else if (d == 0.0) {
            auto comp = Partition(static_cast<int>(values_->size()), s, d)
                            .complement();
            if (lex_less(comp, s)) s = std::move(comp);
        }
        if (!found_ || std::fabs(d) < std::fabs(best_diff_) ||
            (std::fabs(d) == std::fabs(best_diff_) && lex_less(s, best_s_))) {
            best_s_ = std::move(s);
            best_diff_ = d;
            found_ = true;
        }
    }

    bool found() const { return found_; }
    bool exact_zero() const { return found_ && best_diff_ == 0.0; }
    const std::vector<Index>& best() const { return best_s_; }

private:
    const std::vector<double>* values_;
    std::vector<Index> best_s_;
    double best_diff_ = 0.0;
    bool found_ = false;
};

// ---------------------------------------------------------------------------
// Exact enumeration (n <= exact_limit)
// ---------------------------------------------------------------------------

/// Minimizes |sum_S g - sum_{S^c} g| over all subsets (balanced == false) or
/// all subsets of size n/2 (balanced == true), keeping the orientation with
/// diff <= 0 and breaking ties toward the lexicographically smallest S.
///
/// The running difference is accumulated in index order using +g for included
/// and -g for excluded units, which is bit-identical to the canonical
/// signed_sum_difference of the leaf set. Complementary subsets therefore
/// carry exactly negated differences, so one orientation of every split is
/// always feasible even when rounding puts near-ties at the constraint
/// boundary.
class ExactSearch {
public:
    ExactSearch(const std::vector<double>& values, bool balanced)
        : values_(values), balanced_(balanced),
          n_(static_cast<int>(values.size())) {}

    std::vector<Index> run() {
        current_.clear();
        dfs(1, 0.0);
        return best_s_;
    }

private:
    void dfs(int idx, double diff) {
        if (idx > n_) {
            if (balanced_ && static_cast<int>(current_.size()) * 2 != n_) return;
            if (diff > 0.0) return;  // the complement leaf carries -diff
            if (!found_ || diff > best_diff_ ||
                (diff == best_diff_ && lex_less(current_, best_s_))) {
                best_diff_ = diff;
                best_s_ = current_;
                found_ = true;
            }
            return;
        }
        if (balanced_) {
            const int have = static_cast<int>(current_.size());
            const int remaining = n_ - idx + 1;
            if (have + remaining < n_ / 2) return;  // cannot fill S
            if (have > n_ / 2) return;              // S already too large
        }
        current_.push_back(idx);
        dfs(idx + 1, diff + values_[idx - 1]);
        current_.pop_back();
        dfs(idx + 1, diff - values_[idx - 1]);
    }

    const std::vector<double>& values_;
    bool balanced_;
    int n_;
    std::vector<Index> current_;
    std::vector<Index> best_s_;
    double best_diff_ = -std::numeric_limits<double>::infinity();
    bool found_ = false;
};

// ---------------------------------------------------------------------------
// Complete Karmarkar-Karp branch-and-bound
// ---------------------------------------------------------------------------

/// One node of the differencing tree: a partial commitment that the indices in
/// `plus` and those in `minus` end up on opposite sides, contributing `value`
/// (>= 0) to the final difference.
struct CkkEntry {
    double value = 0.0;
    std::vector<Index> plus, minus;
};

class CkkSearch {
public:
    CkkSearch(const std::vector<double>& magnitudes, Incumbent& incumbent,
              std::uint64_t budget)
        : incumbent_(incumbent), budget_(budget) {
        entries_.reserve(magnitudes.size());
        for (std::size_t i = 0; i < magnitudes.size(); ++i) {
            CkkEntry e;
            e.value = magnitudes[i];
            e.plus = {static_cast<Index>(i + 1)};
            entries_.push_back(std::move(e));
        }
        std::stable_sort(entries_.begin(), entries_.end(),
                         [](const CkkEntry& a, const CkkEntry& b) {
                             return a.value > b.value;
                         });
    }

    void run() { search(); }

private:
    void offer(const CkkEntry& e) {
        // The plus side of the final entry is one cluster in magnitude space.
        incumbent_.offer(e.plus);
    }

    static CkkEntry merge(const CkkEntry& a, const CkkEntry& b, bool same_side) {
        CkkEntry out;
        out.value = same_side ? a.value + b.value : a.value - b.value;
        out.plus = a.plus;
        out.minus = a.minus;
        const auto& add_plus = same_side ? b.plus : b.minus;
        const auto& add_minus = same_side ? b.minus : b.plus;
        out.plus.insert(out.plus.end(), add_plus.begin(), add_plus.end());
        out.minus.insert(out.minus.end(), add_minus.begin(), add_minus.end());
        return out;
    }

    std::size_t insert_sorted(CkkEntry e) {
        const auto pos = std::upper_bound(
            entries_.begin(), entries_.end(), e,
            [](const CkkEntry& x, const CkkEntry& y) { return x.value > y.value; });
        const std::size_t idx = static_cast<std::size_t>(pos - entries_.begin());
        entries_.insert(pos, std::move(e));
        return idx;
    }

    // Explores in place with undo so that a node costs two merged-entry
    // constructions instead of a deep copy of the whole list. The invariant
    // is that search() restores entries_ before returning.
    void search() {
        if (nodes_ >= budget_) return;
        ++nodes_;
        if (entries_.size() == 1) {
            offer(entries_[0]);
            return;
        }
        double rest = 0.0;
        for (std::size_t k = 1; k < entries_.size(); ++k)
            rest += entries_[k].value;
        if (entries_[0].value >= rest) {
            // Dominant element: the best completion pits it against the rest.
            CkkEntry folded = entries_[0];
            folded.value = entries_[0].value - rest;
            for (std::size_t k = 1; k < entries_.size(); ++k) {
                folded.plus.insert(folded.plus.end(), entries_[k].minus.begin(),
                                   entries_[k].minus.end());
                folded.minus.insert(folded.minus.end(),
                                    entries_[k].plus.begin(),
                                    entries_[k].plus.end());
            }
            offer(folded);
            return;
        }
        if (incumbent_.exact_zero()) return;

        CkkEntry a = std::move(entries_[0]);
        CkkEntry b = std::move(entries_[1]);
        entries_.erase(entries_.begin(), entries_.begin() + 2);

        std::size_t pos = insert_sorted(merge(a, b, /*same_side=*/false));
        search();
        entries_.erase(entries_.begin() + pos);

        pos = insert_sorted(merge(a, b, /*same_side=*/true));
        search();
        entries_.erase(entries_.begin() + pos);

        entries_.insert(entries_.begin(), std::move(b));
        entries_.insert(entries_.begin(), std::move(a));
    }

    std::vector<CkkEntry> entries_;
    Incumbent& incumbent_;
    std::uint64_t budget_;
    std::uint64_t nodes_ = 0;
};

/// Maps a cluster in magnitude space back to original signs: entries with
/// negative weight switch sides so the magnitude-space difference is
/// preserved for the signed input.
inline std::vector<Index> signed_side(const std::vector<double>& values,
                                      const std::vector<Index>& magnitude_side) {
    std::vector<char> in(values.size(), 0);
    for (Index i : magnitude_side) in[i - 1] = 1;
    std::vector<Index> out;
    for (std::size_t k = 0; k < values.size(); ++k) {
        const bool neg = values[k] < 0.0;
        if (in[k] != neg) out.push_back(static_cast<Index>(k + 1));
    }
    return out;
}

/// Best-improvement local search. Balanced mode considers cross-side swaps
/// only; unconstrained mode considers single-element moves as well.
inline std::vector<Index> improve_side(const std::vector<double>& values,
                                       std::vector<Index> s, bool balanced) {
    const int n = static_cast<int>(values.size());
    std::vector<char> in(static_cast<std::size_t>(n), 0);
    for (Index i : s) in[i - 1] = 1;
    double scale = 0.0;
    for (double v : values) scale += std::fabs(v);
    double d = signed_sum_difference(values, s);
    for (int sweep = 0; sweep < 8; ++sweep) {
        if (std::fabs(d) <= 1e-12 * scale) break;
        double best_abs = std::fabs(d);
        int best_i = -1, best_j = -1;
        if (!balanced) {
            for (int i = 1; i <= n; ++i) {
                const double cand = in[i - 1] ? d - 2.0 * values[i - 1]
                                              : d + 2.0 * values[i - 1];
                if (std::fabs(cand) < best_abs) {
                    best_abs = std::fabs(cand);
                    best_i = i;
                    best_j = 0;
                }
            }
        }
        for (int i = 1; i <= n; ++i) {
            if (!in[i - 1]) continue;
            for (int j = 1; j <= n; ++j) {
                if (in[j - 1]) continue;
                const double cand = d - 2.0 * values[i - 1] + 2.0 * values[j - 1];
                if (std::fabs(cand) < best_abs) {
                    best_abs = std::fabs(cand);
                    best_i = i;
                    best_j = j;
                }
            }
        }
        if (best_i < 0) break;
        if (best_j == 0) {
            in[best_i - 1] ^= 1;
        } else {
            in[best_i - 1] = 0;
            in[best_j - 1] = 1;
        }
        std::vector<Index> side;
        for (int i = 1; i <= n; ++i)
            if (in[i - 1]) side.push_back(i);
        d = signed_sum_difference(values, side);
        s = std::move(side);
    }
    std::vector<Index> side;
    for (int i = 1; i <= n; ++i)
        if (in[i - 1]) side.push_back(i);
    return side;
}

/// Sequential pairing construction on the (value, index)-sorted input:
/// walk consecutive pairs and send the larger element to whichever side has
/// the smaller running sum.
inline std::vector<Index> greedy_pairs_side(const std::vector<double>& values) {
    const auto order = sorted_order(values);
    std::vector<Index> s;
    double d = 0.0;
    for (std::size_t k = 0; k + 1 < order.size(); k += 2) {
        const Index small = order[k];
        const Index large = order[k + 1];
        if (d < 0.0) {
            s.push_back(large);
            d += values[large - 1] - values[small - 1];
        } else {
            s.push_back(small);
            d -= values[large - 1] - values[small - 1];
        }
    }
    return s;
}

/// Balanced differencing: pair consecutive sorted elements, then run CKK on
/// the pair gaps. Every pair sends one member to each side, so the result is
/// balanced by construction.
inline void balanced_differencing(const std::vector<double>& values,
                                  Incumbent& incumbent, std::uint64_t budget) {
    const auto order = sorted_order(values);
    const std::size_t pairs = order.size() / 2;
    std::vector<double> gaps(pairs);
    std::vector<Index> small_of(pairs), large_of(pairs);
    for (std::size_t k = 0; k < pairs; ++k) {
        small_of[k] = order[2 * k];
        large_of[k] = order[2 * k + 1];
        gaps[k] = values[large_of[k] - 1] - values[small_of[k] - 1];
    }

    // Incumbent over pair items, translated to unit sides after the search.
    Incumbent pair_incumbent(gaps);
    CkkSearch search(gaps, pair_incumbent, budget);
    search.run();
    if (pair_incumbent.found()) {
        std::vector<char> plus(pairs, 0);
        for (Index k : pair_incumbent.best()) plus[k - 1] = 1;
        std::vector<Index> side;
        for (std::size_t k = 0; k < pairs; ++k)
            side.push_back(plus[k] ? large_of[k] : small_of[k]);
        incumbent.offer(std::move(side));
    }
}

}  // namespace detail

/// Greedy pairing construction. Guarantees
/// diff^2 <= sum_k (g_(2k) - g_(2k-1))^2.
inline Partition solve_balanced_greedy_pairs(const OracleVector& g) {
    require(g.n() % 2 == 0,
            "solve_balanced_greedy_pairs: n must be even for a balanced split");
    return Partition::from_oracle(g, detail::greedy_pairs_side(g.values));
}

/// Optimal (or budgeted-incumbent) solution of the knapsack problem
///   max sum_S g  s.t.  sum_S g <= (1/2) sum g.
/// Exact for n <= cfg.exact_limit; otherwise complete Karmarkar-Karp under the
/// configured budget, seeded with any warm starts plus the greedy pairing.
inline Partition solve_knapsack(const OracleVector& g,
                                const SolverConfig& cfg = {},
                                std::span<const Partition> warm_starts = {}) {
    detail::check_config(cfg);
    const int n = g.n();
    if (n <= cfg.exact_limit) {
        detail::ExactSearch search(g.values, /*balanced=*/false);
        return Partition::from_oracle(g, search.run());
    }
    detail::Incumbent incumbent(g.values);
    for (const Partition& warm : warm_starts) {
        require(warm.n == n, "solve_knapsack: warm start has wrong n");
        incumbent.offer(warm.s);
    }
    if (n % 2 == 0) incumbent.offer(detail::greedy_pairs_side(g.values));
    std::vector<double> magnitudes(g.values.size());
    for (std::size_t i = 0; i < magnitudes.size(); ++i)
        magnitudes[i] = std::fabs(g.values[i]);
    detail::Incumbent magnitude_incumbent(magnitudes);
    detail::CkkSearch search(magnitudes, magnitude_incumbent,
                             detail::node_budget(cfg, n));
    search.run();
    if (magnitude_incumbent.found())
        incumbent.offer(detail::signed_side(g.values, magnitude_incumbent.best()));
    incumbent.offer(
        detail::improve_side(g.values, incumbent.best(), /*balanced=*/false));
    return Partition::from_oracle(g, incumbent.best());
}

/// Balanced partitioning: the knapsack problem with |S| = n/2. Never returns
/// a worse split than solve_balanced_greedy_pairs (the greedy seeds the
/// incumbent).
inline Partition solve_balanced(const OracleVector& g,
                                const SolverConfig& cfg = {},
                                std::span<const Partition> warm_starts = {}) {
    detail::check_config(cfg);
    const int n = g.n();
    require(n % 2 == 0, "solve_balanced: n must be even for a balanced split");
    if (n <= cfg.exact_limit) {
        detail::ExactSearch search(g.values, /*balanced=*/true);
        return Partition::from_oracle(g, search.run());
    }
    detail::Incumbent incumbent(g.values);
    incumbent.offer(detail::greedy_pairs_side(g.values));
    for (const Partition& warm : warm_starts) {
        require(warm.n == n, "solve_balanced: warm start has wrong n");
        require(warm.balanced(), "solve_balanced: warm start is not balanced");
        incumbent.offer(warm.s);
    }
    detail::balanced_differencing(g.values, incumbent,
                                  detail::node_budget(cfg, n));
    incumbent.offer(
        detail::improve_side(g.values, incumbent.best(), /*balanced=*/true));
    return Partition::from_oracle(g, incumbent.best());
}

/// Matched pairs: sort by (g, index) ascending and pair consecutive
/// sorted positions.
inline MatchedPairs build_matched_pairs(const OracleVector& g) {
    require(g.n() % 2 == 0, "build_matched_pairs: n must be even");
    const auto order = detail::sorted_order(g.values);
    MatchedPairs mp;
    mp.pairs.reserve(order.size() / 2);
    for (std::size_t k = 0; k + 1 < order.size(); k += 2)
        mp.pairs.emplace_back(order[k], order[k + 1]);
    return mp;
}

namespace detail {

/// Largest integer G >= 1 with G <= n^alpha.
inline int floor_power(int n, double alpha) {
    const long double target = static_cast<long double>(alpha) *
                               std::log(static_cast<long double>(n));
    const int center = static_cast<int>(
        std::floor(std::exp(target) + 0.5L));
    int best = 1;
    for (int c = std::max(1, center - 2); c <= center + 2; ++c) {
        if (std::log(static_cast<long double>(c)) <= target + 1e-12L)
            best = std::max(best, c);
    }
    return best;
}

}  // namespace detail

/// Algorithm-1 hybrid construction: G = floor(n^alpha) contiguous groups of
/// the g-sorted order (the r larger groups first), each solved as its own
/// knapsack or balanced-partition problem. `warm` may supply a grouping with
/// the same block structure whose per-group splits seed the group solves.
inline HybridGrouping build_hybrid(const OracleVector& g, double alpha,
                                   HybridMode mode, const SolverConfig& cfg = {},
                                   const HybridGrouping* warm = nullptr) {
    detail::check_config(cfg);
    const int n = g.n();
    require(n % 2 == 0, "build_hybrid: n must be even");
    require(alpha > 0.0 && alpha < 1.0, "build_hybrid: alpha must lie in (0, 1)");

    HybridGrouping hg;
    hg.alpha = alpha;
    hg.group_count = detail::floor_power(n, alpha);
    hg.base_size = 2 * (n / (2 * hg.group_count));
    hg.remainder_groups = (n - hg.base_size * hg.group_count) / 2;
    // The time budget covers the whole construction, split across groups.
    SolverConfig group_cfg = cfg;
    group_cfg.time_budget = cfg.time_budget / hg.group_count;
    if (warm != nullptr) {
        require(warm->group_count == hg.group_count &&
                    warm->base_size == hg.base_size &&
                    warm->remainder_groups == hg.remainder_groups,
                "build_hybrid: warm grouping has a different block structure");
    }

    const auto order = detail::sorted_order(g.values);
    std::size_t cursor = 0;
    for (int grp_index = 0; grp_index < hg.group_count; ++grp_index) {
        const int size = (grp_index < hg.remainder_groups) ? hg.base_size + 2
                                                           : hg.base_size;
        GroupPartition grp;
        grp.members.assign(order.begin() + cursor, order.begin() + cursor + size);
        cursor += size;
        std::sort(grp.members.begin(), grp.members.end());
        if (size > 0) {
            std::vector<double> local(size);
            for (int k = 0; k < size; ++k)
                local[k] = g.values[grp.members[k] - 1];
            OracleVector local_g(std::move(local));

            std::vector<Partition> warm_local;
            if (warm != nullptr) {
                const auto& wgrp = warm->groups[grp_index];
                require(wgrp.members == grp.members,
                        "build_hybrid: warm grouping has different members");
                std::vector<Index> local_s;
                for (Index global : wgrp.s) {
                    const auto it = std::lower_bound(grp.members.begin(),
                                                     grp.members.end(), global);
                    local_s.push_back(static_cast<Index>(
                        std::distance(grp.members.begin(), it) + 1));
                }
                warm_local.push_back(
                    Partition::from_oracle(local_g, std::move(local_s)));
            }

            const Partition local_split =
                (mode == HybridMode::knapsack)
                    ? solve_knapsack(local_g, group_cfg, warm_local)
                    : solve_balanced(local_g, group_cfg, warm_local);
            grp.s.reserve(local_split.s.size());
            for (Index local_index : local_split.s)
                grp.s.push_back(grp.members[local_index - 1]);
            grp.diff = local_split.diff;
        }
        hg.groups.push_back(std::move(grp));
    }
    return hg;
}

/// Collapses a hybrid grouping into one two-cluster split, flipping group
/// orientations greedily so the running sum difference stays within the
/// largest per-group difference. Balanced groups yield a balanced result.
inline Partition sign_balanced_union(const OracleVector& g,
                                     const HybridGrouping& hg) {
    std::vector<Index> side;
    double running = 0.0;
    for (const auto& grp : hg.groups) {
        const bool keep = std::fabs(running + grp.diff) <=
                          std::fabs(running - grp.diff);
        if (keep) {
            side.insert(side.end(), grp.s.begin(), grp.s.end());
            running += grp.diff;
        } else {
            std::vector<char> in(g.values.size(), 0);
            for (Index i : grp.s) in[i - 1] = 1;
            for (Index i : grp.members)
                if (!in[i - 1]) side.push_back(i);
            running -= grp.diff;
        }
    }
    return Partition::from_oracle(g, std::move(side));
}

/// The five designs of the simulation studies, built from one proxy with warm
/// starts chained so the closed-form variance ordering
///   bern <= sib <= hybrid_sib <= stratified,  bern <= hybrid_bern <= hybrid_sib
/// holds deterministically even on the heuristic path.
struct DesignSuite {
    Partition bern;
    Partition sib;
    HybridGrouping hybrid_bern;
    HybridGrouping hybrid_sib;
    MatchedPairs stratified;
};

inline DesignSuite build_design_suite(const OracleVector& h, double alpha,
                                      const SolverConfig& cfg = {}) {
    require(h.n() % 2 == 0, "build_design_suite: n must be even");
    DesignSuite suite;
    suite.stratified = build_matched_pairs(h);
    suite.hybrid_sib = build_hybrid(h, alpha, HybridMode::balanced, cfg);
    suite.hybrid_bern =
        build_hybrid(h, alpha, HybridMode::knapsack, cfg, &suite.hybrid_sib);

    const Partition sib_warm = sign_balanced_union(h, suite.hybrid_sib);
    std::vector<Partition> warm{sib_warm};
    suite.sib = solve_balanced(h, cfg, warm);

    std::vector<Partition> bern_warm{suite.sib,
                                     sign_balanced_union(h, suite.hybrid_bern)};
    suite.bern = solve_knapsack(h, cfg, bern_warm);
    return suite;
}

}  // namespace berndesign
