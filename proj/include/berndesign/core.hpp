#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "berndesign/errors.hpp"

// Domain types shared by all modules. Unit indices are 1-based wherever they
// appear in a public struct, matching the external JSON/CSV formats; raw value
// vectors are ordinary 0-based std::vectors. All types are immutable after
// construction and safe to share across threads.

namespace berndesign {

using Index = std::int32_t;  // 1-based unit index

/// Per-unit index values g_i (or a proxy h_i): one finite real per unit.
struct OracleVector {
    std::vector<double> values;

    OracleVector() = default;
    explicit OracleVector(std::vector<double> v) : values(std::move(v)) {
        require(!values.empty(), "OracleVector: length must be >= 1");
        for (std::size_t i = 0; i < values.size(); ++i) {
            require(std::isfinite(values[i]),
                    "OracleVector: entry " + std::to_string(i + 1) +
                        " is not finite");
        }
    }

    int n() const { return static_cast<int>(values.size()); }
    double operator[](Index unit) const { return values[unit - 1]; }  // 1-based
};

/// Signed sum difference over a side assignment: sum_S g - sum_{S^c} g,
/// accumulated in unit order so the result is reproducible bit for bit.
inline double signed_sum_difference(const std::vector<double>& values,
                                    const std::vector<Index>& s) {
    std::vector<char> in_s(values.size(), 0);
    for (Index i : s) in_s[i - 1] = 1;
    double d = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k)
        d += in_s[k] ? values[k] : -values[k];
    return d;
}

/// A two-sided split of {1..n}: the set S and its complement, with the sum
/// difference cached at construction (the struct is immutable, so the cache
/// cannot go stale).
struct Partition {
    int n = 0;
    std::vector<Index> s;  // sorted ascending, 1-based
    double diff = 0.0;     // sum_S g - sum_{S^c} g at build time

    Partition() = default;
    Partition(int n_, std::vector<Index> s_, double diff_)
        : n(n_), s(std::move(s_)), diff(diff_) {
        require(n >= 0, "Partition: n must be nonnegative");
        require(std::is_sorted(s.begin(), s.end()), "Partition: s must be sorted");
        for (std::size_t k = 0; k < s.size(); ++k) {
            require(s[k] >= 1 && s[k] <= n, "Partition: index out of range");
            require(k == 0 || s[k] != s[k - 1], "Partition: duplicate index");
        }
    }

    static Partition from_oracle(const OracleVector& g, std::vector<Index> s_) {
        std::sort(s_.begin(), s_.end());
        const double d = signed_sum_difference(g.values, s_);
        return Partition(g.n(), std::move(s_), d);
    }

    bool balanced() const { return static_cast<int>(s.size()) * 2 == n; }

    std::vector<Index> complement() const {
        std::vector<char> in_s(static_cast<std::size_t>(n) + 1, 0);
        for (Index i : s) in_s[i] = 1;
        std::vector<Index> out;
        out.reserve(static_cast<std::size_t>(n) - s.size());
        for (Index i = 1; i <= n; ++i)
            if (!in_s[i]) out.push_back(i);
        return out;
    }

    std::vector<char> membership() const {  // membership[i-1] == 1 iff i in S
        std::vector<char> in_s(static_cast<std::size_t>(n), 0);
        for (Index i : s) in_s[i - 1] = 1;
        return in_s;
    }
};

/// Matched pairs (a_k, b_k): every unit in exactly one pair, n even.
struct MatchedPairs {
    std::vector<std::pair<Index, Index>> pairs;

    int n() const { return static_cast<int>(pairs.size()) * 2; }
};

/// One group of a hybrid design: a contiguous block of the g-sorted order,
/// with a two-cluster split solved inside it.
struct GroupPartition {
    std::vector<Index> members;  // original 1-based indices, sorted ascending
    std::vector<Index> s;        // treated-together side, subset of members
    double diff = 0.0;           // sum_s g - sum_{members \ s} g at build time
};

/// floor(n^alpha) groups of even size tiling {1..n} after sorting by g.
struct HybridGrouping {
    double alpha = 0.5;
    int group_count = 0;       // G = floor(n^alpha)
    int base_size = 0;         // k = 2 floor(n / (2G))
    int remainder_groups = 0;  // r = (n - kG) / 2; r groups get k + 2 members
    std::vector<GroupPartition> groups;

    int n() const {
        std::size_t total = 0;
        for (const auto& grp : groups) total += grp.members.size();
        return static_cast<int>(total);
    }
};

struct IidDesign {
    int n = 0;
};

struct TwoClusterDesign {
    Partition partition;
};

struct StratifiedDesign {
    int n = 0;
    MatchedPairs pairs;
};

struct HybridDesign {
    int n = 0;
    HybridGrouping grouping;
};

/// One two-point component of a mixture: the uniform distribution on
/// {v, 1 - v}. A mixture is a convex combination of such components.
struct MixtureComponent {
    std::vector<std::uint8_t> v;
    double weight = 0.0;
};

struct MixtureDesign {
    int n = 0;
    std::vector<MixtureComponent> components;
};

/// A treatment-assignment distribution on {0,1}^n with every marginal
/// Bern(1/2).
struct DesignSpec {
    std::variant<IidDesign, TwoClusterDesign, StratifiedDesign, HybridDesign,
                 MixtureDesign>
        variant;

    int n() const {
        return std::visit(
            [](const auto& d) -> int {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, TwoClusterDesign>)
                    return d.partition.n;
                else
                    return d.n;
            },
            variant);
    }

    static DesignSpec iid(int n) { return DesignSpec{IidDesign{n}}; }
    static DesignSpec two_cluster(Partition p) {
        return DesignSpec{TwoClusterDesign{std::move(p)}};
    }
    static DesignSpec stratified(int n, MatchedPairs pairs) {
        return DesignSpec{StratifiedDesign{n, std::move(pairs)}};
    }
    static DesignSpec hybrid(int n, HybridGrouping grouping) {
        return DesignSpec{HybridDesign{n, std::move(grouping)}};
    }
    static DesignSpec mixture(int n, std::vector<MixtureComponent> components) {
        return DesignSpec{MixtureDesign{n, std::move(components)}};
    }
};

/// A realized assignment Z in {0,1}^n.
struct AssignmentVector {
    std::vector<std::uint8_t> z;

    int n() const { return static_cast<int>(z.size()); }
};

namespace detail {

inline std::string format_number(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", x);
    return std::string(buf);
}

inline void check_index_cover(int n, const std::vector<Index>& indices,
                              std::vector<std::string>& out) {
    std::vector<int> count(static_cast<std::size_t>(n) + 1, 0);
    for (Index i : indices) {
        if (i < 1 || i > n) {
            out.push_back("index " + std::to_string(i) + " out of range");
        } else {
            ++count[i];
        }
    }
    for (Index i = 1; i <= n; ++i) {
        if (count[i] > 1)
            out.push_back("index " + std::to_string(i) + " appears twice");
    }
    for (Index i = 1; i <= n; ++i) {
        if (count[i] == 0)
            out.push_back("index " + std::to_string(i) + " missing");
    }
}

}  // namespace detail

/// Checks every structural invariant of a design. Returns one description per
/// violation; an empty list means the design is well formed. Violations are
/// data, not failures.
inline std::vector<std::string> validate_design(const DesignSpec& design) {
    std::vector<std::string> out;
    const int n = design.n();
    if (n < 1) out.push_back("n must be >= 1");

    std::visit(
        [&](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, TwoClusterDesign>) {
                const auto& s = d.partition.s;
                for (std::size_t k = 0; k < s.size(); ++k) {
                    if (s[k] < 1 || s[k] > n)
                        out.push_back("index " + std::to_string(s[k]) +
                                      " out of range");
                    if (k > 0 && s[k] == s[k - 1])
                        out.push_back("index " + std::to_string(s[k]) +
                                      " appears twice");
                }
            } else if constexpr (std::is_same_v<T, StratifiedDesign>) {
                if (n % 2 != 0) out.push_back("n must be even for matched pairs");
                std::vector<Index> flat;
                flat.reserve(d.pairs.pairs.size() * 2);
                for (const auto& [a, b] : d.pairs.pairs) {
                    flat.push_back(a);
                    flat.push_back(b);
                }
                detail::check_index_cover(n, flat, out);
            } else if constexpr (std::is_same_v<T, HybridDesign>) {
                const auto& hg = d.grouping;
                if (!(hg.alpha > 0.0 && hg.alpha < 1.0))
                    out.push_back("alpha must lie in (0, 1)");
                if (static_cast<int>(hg.groups.size()) != hg.group_count)
                    out.push_back("group count does not match G");
                std::vector<Index> flat;
                for (std::size_t gi = 0; gi < hg.groups.size(); ++gi) {
                    const auto& grp = hg.groups[gi];
                    if (grp.members.size() % 2 != 0)
                        out.push_back("group " + std::to_string(gi + 1) +
                                      " has odd size");
                    const int expect = (static_cast<int>(gi) <
                                        hg.remainder_groups)
                                           ? hg.base_size + 2
                                           : hg.base_size;
                    if (static_cast<int>(grp.members.size()) != expect)
                        out.push_back("group " + std::to_string(gi + 1) +
                                      " has size " +
                                      std::to_string(grp.members.size()) +
                                      ", expected " + std::to_string(expect));
                    for (Index i : grp.s) {
                        if (!std::binary_search(grp.members.begin(),
                                                grp.members.end(), i))
                            out.push_back("index " + std::to_string(i) +
                                          " in group split but not a member");
                    }
                    flat.insert(flat.end(), grp.members.begin(),
                                grp.members.end());
                }
                detail::check_index_cover(n, flat, out);
            } else if constexpr (std::is_same_v<T, MixtureDesign>) {
                double total = 0.0;
                for (std::size_t c = 0; c < d.components.size(); ++c) {
                    const auto& comp = d.components[c];
                    if (comp.weight < 0.0)
                        out.push_back("component " + std::to_string(c + 1) +
                                      " has negative weight");
                    total += comp.weight;
                    if (static_cast<int>(comp.v.size()) != n)
                        out.push_back("component " + std::to_string(c + 1) +
                                      " has length " +
                                      std::to_string(comp.v.size()) +
                                      ", expected " + std::to_string(n));
                    for (auto bitv : comp.v) {
                        if (bitv != 0 && bitv != 1) {
                            out.push_back("component " + std::to_string(c + 1) +
                                          " has a non-binary entry");
                            break;
                        }
                    }
                }
                if (std::fabs(total - 1.0) > 1e-9)
                    out.push_back("weights sum to " +
                                  detail::format_number(total));
            } else {
                (void)d;  // IID: nothing beyond n >= 1
            }
        },
        design.variant);
    return out;
}

}  // namespace berndesign
