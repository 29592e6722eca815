#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "berndesign/core.hpp"
#include "berndesign/errors.hpp"
#include "berndesign/rng.hpp"

// Turning a DesignSpec into samples, exact support enumerations, covariance
// matrices, and O(n) quadratic forms. Dense matrices are a testing facility;
// everything on the production path uses the closed forms.

namespace berndesign {

/// Dense symmetric covariance matrix of a correlated Bernoulli design.
/// Diagonal is 1/4 and every entry lies in [-1/4, 1/4].
struct CovarianceMatrix {
    int n = 0;
    std::vector<double> entries;  // row-major n x n

    double at(int i, int j) const {  // 1-based
        return entries[static_cast<std::size_t>(i - 1) * n + (j - 1)];
    }
    double& at(int i, int j) {
        return entries[static_cast<std::size_t>(i - 1) * n + (j - 1)];
    }

    /// Positive semidefiniteness within tolerance: Cholesky of
    /// entries + shift*I must succeed, which certifies lambda_min >= -shift.
    bool is_psd(double shift = 1e-9) const {
        std::vector<double> a = entries;
        const std::size_t dim = static_cast<std::size_t>(n);
        for (std::size_t i = 0; i < dim; ++i) a[i * dim + i] += shift;
        for (std::size_t j = 0; j < dim; ++j) {
            double pivot = a[j * dim + j];
            for (std::size_t k = 0; k < j; ++k)
                pivot -= a[j * dim + k] * a[j * dim + k];
            if (pivot <= 0.0) return false;
            const double root = std::sqrt(pivot);
            a[j * dim + j] = root;
            for (std::size_t i = j + 1; i < dim; ++i) {
                double v = a[i * dim + j];
                for (std::size_t k = 0; k < j; ++k)
                    v -= a[i * dim + k] * a[j * dim + k];
                a[i * dim + j] = v / root;
            }
        }
        return true;
    }
};

namespace detail {

constexpr std::uint64_t kBitStream = rng::tag("design-bit");
constexpr std::uint64_t kMixStream = rng::tag("design-mix");

/// Independent fair bits a design consumes per draw: one per unit (IID), one
/// per cluster/pair/group. Mixture components carry their own fair bit, drawn
/// after the categorical pick, but the support size is what matters here.
inline int bit_count(const DesignSpec& design) {
    return std::visit(
        [](const auto& d) -> int {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, IidDesign>) {
                return d.n;
            } else if constexpr (std::is_same_v<T, TwoClusterDesign>) {
                return 1;
            } else if constexpr (std::is_same_v<T, StratifiedDesign>) {
                return static_cast<int>(d.pairs.pairs.size());
            } else if constexpr (std::is_same_v<T, HybridDesign>) {
                int bits = 0;
                for (const auto& grp : d.grouping.groups)
                    if (!grp.members.empty()) ++bits;
                return bits;
            } else {
                return 0;  // mixture: explicit support
            }
        },
        design.variant);
}

}  // namespace detail

/// Draws one assignment. Deterministic given (design, seed); distinct seeds
/// give independent draws.
inline AssignmentVector sample_assignment(const DesignSpec& design,
                                          std::uint64_t seed) {
    const int n = design.n();
    AssignmentVector out;
    out.z.assign(static_cast<std::size_t>(n), 0);
    std::visit(
        [&](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, IidDesign>) {
                for (int i = 1; i <= n; ++i)
                    out.z[i - 1] = static_cast<std::uint8_t>(
                        rng::bit_at(seed, detail::kBitStream, i));
            } else if constexpr (std::is_same_v<T, TwoClusterDesign>) {
                const int star = rng::bit_at(seed, detail::kBitStream, 0);
                for (int i = 0; i < n; ++i)
                    out.z[i] = static_cast<std::uint8_t>(1 - star);
                for (Index i : d.partition.s)
                    out.z[i - 1] = static_cast<std::uint8_t>(star);
            } else if constexpr (std::is_same_v<T, StratifiedDesign>) {
                for (std::size_t k = 0; k < d.pairs.pairs.size(); ++k) {
                    const int bit = rng::bit_at(seed, detail::kBitStream,
                                                static_cast<std::uint64_t>(k));
                    const auto& [a, b] = d.pairs.pairs[k];
                    out.z[a - 1] = static_cast<std::uint8_t>(bit);
                    out.z[b - 1] = static_cast<std::uint8_t>(1 - bit);
                }
            } else if constexpr (std::is_same_v<T, HybridDesign>) {
                for (std::size_t grp_idx = 0; grp_idx < d.grouping.groups.size();
                     ++grp_idx) {
                    const auto& grp = d.grouping.groups[grp_idx];
                    if (grp.members.empty()) continue;
                    const int star =
                        rng::bit_at(seed, detail::kBitStream,
                                    static_cast<std::uint64_t>(grp_idx));
                    for (Index i : grp.members)
                        out.z[i - 1] = static_cast<std::uint8_t>(1 - star);
                    for (Index i : grp.s)
                        out.z[i - 1] = static_cast<std::uint8_t>(star);
                }
            } else {
                // Categorical pick of a two-point component, then a fair bit
                // choosing v versus 1 - v.
                require(!d.components.empty(),
                        "sample_assignment: mixture has no components");
                const double u = rng::uniform_at(seed, detail::kMixStream, 0);
                double cum = 0.0;
                std::size_t pick = d.components.size() - 1;
                for (std::size_t c = 0; c < d.components.size(); ++c) {
                    cum += d.components[c].weight;
                    if (u < cum) {
                        pick = c;
                        break;
                    }
                }
                const int keep = rng::bit_at(seed, detail::kBitStream, 0);
                const auto& v = d.components[pick].v;
                for (int i = 0; i < n; ++i)
                    out.z[i] = keep ? v[i] : static_cast<std::uint8_t>(1 - v[i]);
            }
        },
        design.variant);
    return out;
}

/// One support atom: an assignment and its probability.
struct SupportAtom {
    std::vector<std::uint8_t> z;
    double weight = 0.0;
};

/// Enumerates the full support with exact weights (dyadic for the
/// bit-generated variants). Entries may repeat when mixture components
/// overlap; weights always sum to one. Refuses designs with more than 20
/// independent bits.
inline std::vector<SupportAtom> mixture_representation(
    const DesignSpec& design) {
    const int bits = detail::bit_count(design);
    require(bits <= 20,
            "mixture_representation: support too large (" +
                std::to_string(bits) + " independent bits, limit 20)");
    const int n = design.n();
    std::vector<SupportAtom> atoms;

    std::visit(
        [&](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, MixtureDesign>) {
                for (const auto& comp : d.components) {
                    SupportAtom a;
                    a.z = comp.v;
                    a.weight = comp.weight * 0.5;
                    atoms.push_back(a);
                    for (auto& bit : a.z) bit = static_cast<std::uint8_t>(1 - bit);
                    atoms.push_back(std::move(a));
                }
            } else {
                const double weight = std::ldexp(1.0, -bits);
                const std::uint32_t count = 1u << bits;
                for (std::uint32_t code = 0; code < count; ++code) {
                    SupportAtom a;
                    a.weight = weight;
                    a.z.assign(static_cast<std::size_t>(n), 0);
                    if constexpr (std::is_same_v<T, IidDesign>) {
                        for (int i = 0; i < n; ++i)
                            a.z[i] = static_cast<std::uint8_t>((code >> i) & 1u);
                    } else if constexpr (std::is_same_v<T, TwoClusterDesign>) {
                        const int star = static_cast<int>(code & 1u);
                        for (int i = 0; i < n; ++i)
                            a.z[i] = static_cast<std::uint8_t>(1 - star);
                        for (Index i : d.partition.s)
                            a.z[i - 1] = static_cast<std::uint8_t>(star);
                    } else if constexpr (std::is_same_v<T, StratifiedDesign>) {
                        for (std::size_t k = 0; k < d.pairs.pairs.size(); ++k) {
                            const int bit = static_cast<int>((code >> k) & 1u);
                            const auto& [x, y] = d.pairs.pairs[k];
                            a.z[x - 1] = static_cast<std::uint8_t>(bit);
                            a.z[y - 1] = static_cast<std::uint8_t>(1 - bit);
                        }
                    } else if constexpr (std::is_same_v<T, HybridDesign>) {
                        int bit_idx = 0;
                        for (const auto& grp : d.grouping.groups) {
                            if (grp.members.empty()) continue;
                            const int star =
                                static_cast<int>((code >> bit_idx) & 1u);
                            ++bit_idx;
                            for (Index i : grp.members)
                                a.z[i - 1] = static_cast<std::uint8_t>(1 - star);
                            for (Index i : grp.s)
                                a.z[i - 1] = static_cast<std::uint8_t>(star);
                        }
                    }
                    atoms.push_back(std::move(a));
                }
            }
        },
        design.variant);
    return atoms;
}

/// Closed-form assembly of the design covariance. Guarded at n <= 2048: the
/// matrix is quadratic in n and exists only for verification.
inline CovarianceMatrix dense_covariance(const DesignSpec& design) {
    const int n = design.n();
    require(n <= 2048, "dense_covariance: n exceeds the 2048 size guard");
    CovarianceMatrix cov;
    cov.n = n;
    cov.entries.assign(static_cast<std::size_t>(n) * n, 0.0);

    std::visit(
        [&](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, IidDesign>) {
                for (int i = 1; i <= n; ++i) cov.at(i, i) = 0.25;
            } else if constexpr (std::is_same_v<T, TwoClusterDesign>) {
                const auto in_s = d.partition.membership();
                for (int i = 1; i <= n; ++i)
                    for (int j = 1; j <= n; ++j)
                        cov.at(i, j) = (in_s[i - 1] == in_s[j - 1]) ? 0.25 : -0.25;
            } else if constexpr (std::is_same_v<T, StratifiedDesign>) {
                for (int i = 1; i <= n; ++i) cov.at(i, i) = 0.25;
                for (const auto& [a, b] : d.pairs.pairs) {
                    cov.at(a, b) = -0.25;
                    cov.at(b, a) = -0.25;
                }
            } else if constexpr (std::is_same_v<T, HybridDesign>) {
                for (const auto& grp : d.grouping.groups) {
                    std::vector<char> in_s(static_cast<std::size_t>(n) + 1, 0);
                    for (Index i : grp.s) in_s[i] = 1;
                    for (Index i : grp.members)
                        for (Index j : grp.members)
                            cov.at(i, j) = (in_s[i] == in_s[j]) ? 0.25 : -0.25;
                }
            } else {
                for (const auto& comp : d.components) {
                    for (int i = 1; i <= n; ++i)
                        for (int j = 1; j <= n; ++j)
                            cov.at(i, j) += comp.weight *
                                            ((comp.v[i - 1] == comp.v[j - 1])
                                                 ? 0.25
                                                 : -0.25);
                }
            }
        },
        design.variant);
    return cov;
}

/// g' Sigma g in O(n) per design block, without materializing Sigma. The
/// oracle vector is the one supplied here, not the one the design was built
/// from, so designs built from a proxy can be evaluated at the true g.
inline double quadratic_form(const OracleVector& g, const DesignSpec& design) {
    require(g.n() == design.n(), "quadratic_form: length mismatch");
    return std::visit(
        [&](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, IidDesign>) {
                double sum_sq = 0.0;
                for (double v : g.values) sum_sq += v * v;
                return 0.25 * sum_sq;
            } else if constexpr (std::is_same_v<T, TwoClusterDesign>) {
                const double diff = signed_sum_difference(g.values, d.partition.s);
                return 0.25 * diff * diff;
            } else if constexpr (std::is_same_v<T, StratifiedDesign>) {
                double total = 0.0;
                for (const auto& [a, b] : d.pairs.pairs) {
                    const double gap = g[a] - g[b];
                    total += gap * gap;
                }
                return 0.25 * total;
            } else if constexpr (std::is_same_v<T, HybridDesign>) {
                double total = 0.0;
                for (const auto& grp : d.grouping.groups) {
                    double diff = 0.0;
                    std::vector<char> in_s(g.values.size(), 0);
                    for (Index i : grp.s) in_s[i - 1] = 1;
                    for (Index i : grp.members)
                        diff += in_s[i - 1] ? g[i] : -g[i];
                    total += 0.25 * diff * diff;
                }
                return total;
            } else {
                double total = 0.0;
                for (const auto& comp : d.components) {
                    double diff = 0.0;
                    for (int i = 1; i <= g.n(); ++i)
                        diff += comp.v[i - 1] ? g[i] : -g[i];
                    total += comp.weight * 0.25 * diff * diff;
                }
                return total;
            }
        },
        design.variant);
}

}  // namespace berndesign
