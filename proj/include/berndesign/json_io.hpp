#pragma once

#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "berndesign/core.hpp"
#include "berndesign/errors.hpp"

// DesignSpec <-> JSON. Exactly one variant payload is present and all indices
// are 1-based. Hybrid payloads carry alpha and the per-group member/split
// sets; two-cluster and hybrid payloads keep the build-time diff as metadata.

namespace berndesign {

inline nlohmann::json design_to_json(const DesignSpec& design) {
    nlohmann::json j;
    j["n"] = design.n();
    std::visit(
        [&](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, IidDesign>) {
                j["variant"] = "iid";
            } else if constexpr (std::is_same_v<T, TwoClusterDesign>) {
                j["variant"] = "two_cluster";
                j["s"] = d.partition.s;
                j["diff"] = d.partition.diff;
            } else if constexpr (std::is_same_v<T, StratifiedDesign>) {
                j["variant"] = "stratified";
                auto pairs = nlohmann::json::array();
                for (const auto& [a, b] : d.pairs.pairs)
                    pairs.push_back({a, b});
                j["pairs"] = std::move(pairs);
            } else if constexpr (std::is_same_v<T, HybridDesign>) {
                j["variant"] = "hybrid";
                j["alpha"] = d.grouping.alpha;
                auto groups = nlohmann::json::array();
                for (const auto& grp : d.grouping.groups) {
                    nlohmann::json item;
                    item["members"] = grp.members;
                    item["s"] = grp.s;
                    item["diff"] = grp.diff;
                    groups.push_back(std::move(item));
                }
                j["groups"] = std::move(groups);
            } else {
                j["variant"] = "mixture";
                auto mix = nlohmann::json::array();
                for (const auto& comp : d.components) {
                    nlohmann::json item;
                    item["v"] = comp.v;
                    item["w"] = comp.weight;
                    mix.push_back(std::move(item));
                }
                j["mixture"] = std::move(mix);
            }
        },
        design.variant);
    return j;
}

inline DesignSpec design_from_json(const nlohmann::json& j) {
    if (!j.contains("variant") || !j.contains("n"))
        throw io_error("design JSON needs 'variant' and 'n'");
    const std::string variant = j.at("variant").get<std::string>();
    const int n = j.at("n").get<int>();

    if (variant == "iid") return DesignSpec::iid(n);
    if (variant == "two_cluster") {
        std::vector<Index> s = j.at("s").get<std::vector<Index>>();
        std::sort(s.begin(), s.end());
        const double diff = j.value("diff", 0.0);
        return DesignSpec::two_cluster(Partition(n, std::move(s), diff));
    }
    if (variant == "stratified") {
        MatchedPairs mp;
        for (const auto& pair : j.at("pairs")) {
            if (!pair.is_array() || pair.size() != 2)
                throw io_error("stratified pairs must be 2-element arrays");
            mp.pairs.emplace_back(pair[0].get<Index>(), pair[1].get<Index>());
        }
        return DesignSpec::stratified(n, std::move(mp));
    }
    if (variant == "hybrid") {
        HybridGrouping hg;
        hg.alpha = j.at("alpha").get<double>();
        for (const auto& item : j.at("groups")) {
            GroupPartition grp;
            grp.members = item.at("members").get<std::vector<Index>>();
            grp.s = item.at("s").get<std::vector<Index>>();
            grp.diff = item.value("diff", 0.0);
            std::sort(grp.members.begin(), grp.members.end());
            std::sort(grp.s.begin(), grp.s.end());
            hg.groups.push_back(std::move(grp));
        }
        hg.group_count = static_cast<int>(hg.groups.size());
        hg.base_size =
            (hg.group_count > 0) ? 2 * (n / (2 * hg.group_count)) : 0;
        hg.remainder_groups =
            (hg.group_count > 0) ? (n - hg.base_size * hg.group_count) / 2 : 0;
        return DesignSpec::hybrid(n, std::move(hg));
    }
    if (variant == "mixture") {
        MixtureDesign mix;
        mix.n = n;
        for (const auto& item : j.at("mixture")) {
            MixtureComponent comp;
            comp.v = item.at("v").get<std::vector<std::uint8_t>>();
            comp.weight = item.at("w").get<double>();
            mix.components.push_back(std::move(comp));
        }
        return DesignSpec{std::move(mix)};
    }
    throw io_error("unknown design variant: " + variant);
}

inline void write_design_file(const std::string& path,
                              const DesignSpec& design) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path);
    out << design_to_json(design).dump(2) << '\n';
    if (!out) throw io_error("write failed: " + path);
}

inline DesignSpec read_design_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw io_error(path + ": invalid JSON (" + e.what() + ")");
    }
    return design_from_json(j);
}

}  // namespace berndesign
